"""Three-layer multiplicative light field model.

A view at offset ``(s, t)`` is the per-channel product of three transmittance
layers at disparities -1, 0 and +1, each sampled at ``(u + x*s, v + x*t)``.
Layers are stored padded by ``pad`` pixels on every side so that all views of
a subset index inside the arrays.
"""

import logging
import os
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import InputError
from .validation import check_coord, check_views

logger = logging.getLogger(__name__)

DISPARITIES = (-1, 0, 1)
T_FLOOR = 1e-4


@dataclass(frozen=True, eq=False)
class LayerStack:
    """``layers`` has shape (3, H + 2*pad, W + 2*pad, 3), ordered T-1, T0, T+1."""

    layers: np.ndarray
    pad: int

    def __post_init__(self):
        arr = np.array(self.layers, dtype=np.float64, copy=True)
        if arr.ndim != 4 or arr.shape[0] != 3 or arr.shape[3] != 3:
            raise InputError(f"layers must have shape (3, Hp, Wp, 3), got {arr.shape}")
        pad = int(self.pad)
        if pad < 0 or arr.shape[1] <= 2 * pad or arr.shape[2] <= 2 * pad:
            raise InputError(f"pad {pad} incompatible with layer shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("layers contain non-finite samples")
        np.clip(arr, T_FLOOR, 1.0, out=arr)
        arr.setflags(write=False)
        object.__setattr__(self, "layers", arr)
        object.__setattr__(self, "pad", pad)

    @property
    def view_shape(self):
        return self.layers.shape[1] - 2 * self.pad, self.layers.shape[2] - 2 * self.pad

    @property
    def disparities(self):
        return DISPARITIES


@dataclass(frozen=True)
class LayerOptOptions:
    max_iters: int = 2000
    step_size: float = 0.1
    rel_tol: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise InputError("max_iters must be >= 1")
        if not self.rel_tol > 0 or not self.step_size > 0:
            raise InputError("rel_tol and step_size must be positive")


def _window(layer, pad, x, s, t, h, w):
    r0 = pad + x * s
    c0 = pad + x * t
    return layer[r0:r0 + h, c0:c0 + w]


def _check_offset(coord, pad):
    s, t = check_coord(coord)
    if max(abs(s), abs(t)) > pad:
        raise InputError(f"view {(s, t)} exceeds the layer padding of {pad} pixels")
    return s, t


def render_view(stack, coord):
    """Render the view at ``coord`` as the product of the translated layers."""
    s, t = _check_offset(coord, stack.pad)
    h, w = stack.view_shape
    out = np.ones((h, w, 3))
    for layer, x in zip(stack.layers, DISPARITIES):
        out *= _window(layer, stack.pad, x, s, t, h, w)
    return out


def reconstruct_subset(stack, coords):
    return [render_view(stack, c) for c in coords]


def _log_forward(a, pad, offsets, h, w):
    center = a[1, pad:pad + h, pad:pad + w]
    z = np.empty((len(offsets), h, w, 3))
    for j, (s, t) in enumerate(offsets):
        np.add(_window(a[0], pad, -1, s, t, h, w), _window(a[2], pad, 1, s, t, h, w), out=z[j])
        z[j] += center
    return z


def _scatter(values, pad, offsets, h, w, shape):
    """Adjoint of the layer windowing: accumulate per-view maps onto the layers."""
    out = np.zeros(shape)
    out[1, pad:pad + h, pad:pad + w] = values.sum(axis=0)
    for j, (s, t) in enumerate(offsets):
        _window(out[0], pad, -1, s, t, h, w)[...] += values[j]
        _window(out[2], pad, 1, s, t, h, w)[...] += values[j]
    return out


def _initial_log_layers(target, pad, rng):
    mean = target.mean(axis=0)
    base = np.cbrt(np.clip(mean, T_FLOOR, 1.0))
    base = np.pad(base, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
    noise = rng.uniform(-0.01, 0.01, size=(3,) + base.shape)
    # mirror-symmetric noise keeps the optimizer equivariant under horizontal flips
    noise = 0.5 * (noise + noise[:, :, ::-1, :])
    init = np.clip(base[None] + noise, T_FLOOR, 1.0)
    return np.log(init)


def optimize_layers(subset_views, opts=None, return_history=False):
    """Fit three multiplicative layers to ``(coord, image)`` views.

    Minimises the summed squared error between the views and their layer
    renderings. The variables are the log-transmittances, updated by projected
    gradient steps (scaled by a diagonal Gauss-Newton curvature estimate) with
    backtracking; the objective never increases across accepted steps.
    """
    opts = opts or LayerOptOptions()
    coords, target = check_views(subset_views)
    offsets = [check_coord(c) for c in coords]
    pad = max(max(abs(s), abs(t)) for s, t in offsets)
    m, h, w, _ = target.shape
    rng = np.random.default_rng(opts.rng_seed)
    a = _initial_log_layers(target, pad, rng)
    lo = np.log(T_FLOOR)

    def evaluate(a):
        pred = np.exp(_log_forward(a, pad, offsets, h, w))
        err = pred - target
        return float(np.sum(err * err)), pred, err

    f, pred, err = evaluate(a)
    history = [f]
    step = opts.step_size
    for it in range(opts.max_iters):
        if f == 0.0:
            break
        # gradient and diagonal curvature share one scatter pass
        both = np.concatenate([2.0 * err * pred, 2.0 * pred * pred], axis=-1)
        acc = _scatter(both, pad, offsets, h, w, a.shape[:3] + (6,))
        direction = acc[..., :3] / (acc[..., 3:] + 1e-12)
        accepted = False
        while step > 1e-12:
            a_new = np.clip(a - step * direction, lo, 0.0)
            f_new, pred_new, err_new = evaluate(a_new)
            if f_new <= f:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        rel = (f - f_new) / f
        a, f, pred, err = a_new, f_new, pred_new, err_new
        history.append(f)
        step = min(step * 1.25, 1.0)
        if rel < opts.rel_tol:
            break
    logger.debug("layer optimisation: %d iterations, objective %.3e", len(history) - 1, f)
    stack = LayerStack(np.exp(a), pad)
    if return_history:
        return stack, history
    return stack


def dump_layers_png(stack, directory, prefix="layer"):
    """Write the three layers as 8-bit PNGs (debug aid)."""
    from PIL import Image

    from .lightfield import to_uint8

    os.makedirs(directory, exist_ok=True)
    paths = []
    for layer, x in zip(stack.layers, DISPARITIES):
        path = os.path.join(directory, f"{prefix}_{x:+d}.png")
        Image.fromarray(to_uint8(layer), mode="RGB").save(path)
        paths.append(path)
    return paths


class MultiplicativeLayers(BaseEstimator):
    """Estimator wrapper around :func:`optimize_layers`.

    ``fit(views, coords)`` learns ``stack_``; ``predict(coords)`` renders views.
    """

    def __init__(self, max_iters=2000, step_size=0.1, rel_tol=1e-6, random_state=0):
        self.max_iters = max_iters
        self.step_size = step_size
        self.rel_tol = rel_tol
        self.random_state = random_state

    def fit(self, X, coords):
        opts = LayerOptOptions(self.max_iters, self.step_size, self.rel_tol, int(self.random_state or 0))
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 4 or len(X) != len(coords):
            raise InputError("X must have shape (n_views, H, W, 3) matching coords")
        self.stack_, self.objective_history_ = optimize_layers(
            list(zip(coords, X)), opts, return_history=True
        )
        self.n_iter_ = len(self.objective_history_) - 1
        return self

    def predict(self, coords):
        check_is_fitted(self, "stack_")
        return np.stack(reconstruct_subset(self.stack_, coords))

    def fit_predict(self, X, coords):
        return self.fit(X, coords).predict(coords)
