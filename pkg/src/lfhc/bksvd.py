"""Randomized Block-Krylov SVD low-rank approximation of stacked layers.

For each colour channel the three layers are stacked vertically into a
``3m x n`` matrix, approximated at rank ``k`` and split back into layers.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import InputError
from .layers import T_FLOOR, LayerStack
from .validation import check_matrix


@dataclass(frozen=True)
class BkSvdParams:
    rank: int
    epsilon: float = 0.1
    iterations: int = 0  # 0 selects ceil(log(n) / sqrt(epsilon)), clamped to [2, 32]
    rng_seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        if self.iterations < 0:
            raise InputError("iterations must be >= 0")

    def check_shape(self, shape):
        if not 1 <= self.rank <= min(shape):
            raise InputError(f"rank {self.rank} out of range [1, {min(shape)}] for shape {shape}")

    def resolved_iterations(self, n):
        if self.iterations:
            return self.iterations
        q = math.ceil(math.log(max(n, 2)) / math.sqrt(self.epsilon))
        return min(max(q, 2), 32)


def sketch_generator(seed, channel, block=0):
    """Counter-based (Philox) stream keyed by seed, channel and block index."""
    key = [int(seed) % 2**64, ((int(channel) % 2**32) << 32) | (int(block) % 2**32)]
    return np.random.Generator(np.random.Philox(key=key))


def _new_directions(Y, scale, room):
    """Orthonormal basis of the significant part of ``Y``, at most ``room`` columns."""
    U, sv, _ = np.linalg.svd(Y, full_matrices=False)
    keep = int(np.sum(sv > 1e-10 * scale))
    return U[:, : min(keep, room)]


def krylov_basis(A, params, channel=0):
    """Orthonormal basis Q of the block Krylov space of ``A``.

    Blocks are ``A Pi, (A A^T) A Pi, ...``; each block is re-orthogonalised
    twice against all previous ones. Directions that vanish under the
    projection (numerical rank reached) are dropped rather than normalised,
    so Q never exceeds the rank of ``A``.
    """
    rows, cols = A.shape
    k = params.rank
    q = params.resolved_iterations(cols)
    limit = min(rows, cols)
    Pi = sketch_generator(params.rng_seed, channel).standard_normal((cols, k))
    basis = np.zeros((rows, 0))
    Y = A @ Pi
    for _ in range(q + 1):
        scale = np.linalg.norm(Y, 2)
        if scale == 0.0:
            break
        for _ in range(2):
            Y = Y - basis @ (basis.T @ Y)
        Yq = _new_directions(Y, scale, limit - basis.shape[1])
        if Yq.shape[1] == 0:
            break
        basis = np.hstack([basis, Yq])
        if basis.shape[1] >= limit:
            break
        Y = A @ (A.T @ Yq)
    return basis


def bk_svd_basis(A, params, channel=0):
    """Return ``(Z, sigma)``: rank-k orthonormal basis ``Z = Q U_k`` and the top-k singular values."""
    A = check_matrix(A, "A")
    params.check_shape(A.shape)
    Q = krylov_basis(A, params, channel)
    M = Q.T @ A
    S = M @ M.T
    U, ev, _ = np.linalg.svd(S)
    k = min(params.rank, Q.shape[1])
    Z = Q @ U[:, :k]
    return Z, np.sqrt(np.maximum(ev[:k], 0.0))


def bk_svd_lowrank(A, params, channel=0):
    """Rank-k approximation ``Z Z^T A`` of ``A``."""
    A = check_matrix(A, "A")
    Z, _ = bk_svd_basis(A, params, channel)
    return Z @ (Z.T @ A)


def stack_channels(stack):
    """Three ``3m x n`` matrices (r, g, b), rows ordered T-1, T0, T+1."""
    layers = stack.layers
    return tuple(np.concatenate([layers[k, :, :, ch] for k in range(3)], axis=0) for ch in range(3))


def unstack_channels(Dr, Dg, Db, pad):
    """Split channel matrices back into a LayerStack, clamping to the valid range."""
    mats = [np.asarray(D, dtype=np.float64) for D in (Dr, Dg, Db)]
    shape = mats[0].shape
    if any(M.shape != shape for M in mats) or len(shape) != 2:
        raise InputError("channel matrices must share one 2-D shape")
    if shape[0] % 3:
        raise InputError(f"row count {shape[0]} not divisible by 3")
    y = shape[0] // 3
    layers = np.empty((3, y, shape[1], 3))
    for ch, M in enumerate(mats):
        for k in range(3):
            layers[k, :, :, ch] = M[k * y:(k + 1) * y]
    return LayerStack(np.clip(layers, T_FLOOR, 1.0), pad)


def approximate_stack(stack, params):
    """Per-channel BK-SVD approximation of a LayerStack."""
    mats = stack_channels(stack)
    params.check_shape(mats[0].shape)
    approx = [bk_svd_lowrank(M, params, channel=ch) for ch, M in enumerate(mats)]
    return unstack_channels(*approx, pad=stack.pad)


class BlockKrylovSVD(TransformerMixin, BaseEstimator):
    """Block Krylov low-rank projector.

    ``fit`` learns the rank-k column basis ``components_`` (shape ``(rows, k)``)
    of a matrix; ``transform`` projects a matrix with the same row count onto it.
    """

    def __init__(self, n_components=8, epsilon=0.1, n_iter="auto", random_state=0, channel=0):
        self.n_components = n_components
        self.epsilon = epsilon
        self.n_iter = n_iter
        self.random_state = random_state
        self.channel = channel

    def _params(self):
        iters = 0 if self.n_iter == "auto" else int(self.n_iter)
        return BkSvdParams(int(self.n_components), float(self.epsilon), iters, int(self.random_state or 0))

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        self.components_, self.singular_values_ = bk_svd_basis(X, self._params(), self.channel)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_matrix(X, "X")
        if X.shape[0] != self.components_.shape[0]:
            raise InputError(f"X has {X.shape[0]} rows, basis expects {self.components_.shape[0]}")
        Z = self.components_
        return Z @ (Z.T @ X)
