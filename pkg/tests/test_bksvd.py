import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from lfhc.bksvd import (
    BkSvdParams,
    BlockKrylovSVD,
    approximate_stack,
    bk_svd_basis,
    bk_svd_lowrank,
    krylov_basis,
    stack_channels,
    unstack_channels,
)
from lfhc.errors import InputError
from lfhc.layers import T_FLOOR, LayerStack


def _stack(seed=0, h=8, w=10, pad=1):
    rng = np.random.default_rng(seed)
    return LayerStack(rng.uniform(0.1, 1.0, size=(3, h + 2 * pad, w + 2 * pad, 3)), pad)


def test_rank_one_is_exact():
    rng = np.random.default_rng(0)
    A = np.outer(rng.standard_normal(20), rng.standard_normal(15))
    D = bk_svd_lowrank(A, BkSvdParams(1))
    assert np.linalg.norm(A - D, 2) <= 1e-8 * np.linalg.norm(A, 2)


def test_diagonal_example():
    D = bk_svd_lowrank(np.diag([5.0, 3.0, 1.0]), BkSvdParams(2, epsilon=0.1))
    assert np.linalg.norm(np.diag([5.0, 3.0, 1.0]) - D, 2) <= 1.1


@pytest.mark.parametrize("k", [4, 8, 16])
def test_spectral_guarantee_small(k):
    failures = 0
    for seed in range(50):
        A = np.random.default_rng(seed).standard_normal((30, 20))
        sigma = np.linalg.svd(A, compute_uv=False)
        err = np.linalg.norm(A - bk_svd_lowrank(A, BkSvdParams(k, 0.1, 0, seed)), 2)
        failures += err > 1.1 * sigma[k]
    assert failures <= 1


def test_basis_orthonormal_and_capped():
    A = np.random.default_rng(1).standard_normal((40, 12))
    Q = krylov_basis(A, BkSvdParams(8))
    assert Q.shape[1] <= 12
    np.testing.assert_allclose(Q.T @ Q, np.eye(Q.shape[1]), atol=1e-10)


def test_rank_deficient_input_keeps_top_directions():
    # regression: once the Krylov space saturates, the basis must still contain the top singular vectors
    rng = np.random.default_rng(2)
    A = rng.uniform(0.5, 1.0, size=(90, 30))
    sigma = np.linalg.svd(A, compute_uv=False)
    D = bk_svd_lowrank(A, BkSvdParams(16))
    assert np.linalg.norm(A - D, 2) <= 1.1 * sigma[16]


def test_rank_bound_and_idempotent_projection():
    A = np.random.default_rng(3).standard_normal((25, 18))
    Z, sig = bk_svd_basis(A, BkSvdParams(5))
    D = Z @ (Z.T @ A)
    s = np.linalg.svd(D, compute_uv=False)
    assert np.all(s[5:] <= 1e-8 * s[0])
    np.testing.assert_allclose(Z @ (Z.T @ D), D, atol=1e-12)
    assert np.all(np.diff(sig) <= 1e-12)


def test_deterministic_per_seed():
    A = np.random.default_rng(4).standard_normal((20, 20))
    a = bk_svd_lowrank(A, BkSvdParams(4, rng_seed=9))
    b = bk_svd_lowrank(A, BkSvdParams(4, rng_seed=9))
    np.testing.assert_array_equal(a, b)


def test_parameter_errors():
    with pytest.raises(InputError):
        BkSvdParams(4, epsilon=0)
    with pytest.raises(InputError):
        bk_svd_lowrank(np.ones((5, 4)), BkSvdParams(5))
    with pytest.raises(InputError):
        bk_svd_lowrank(np.full((5, 4), np.inf), BkSvdParams(1))


def test_auto_iterations():
    assert BkSvdParams(4, epsilon=0.1).resolved_iterations(64) == 14
    assert BkSvdParams(4, epsilon=100).resolved_iterations(64) == 2
    assert BkSvdParams(4, epsilon=1e-4).resolved_iterations(10**6) == 32
    assert BkSvdParams(4, iterations=5).resolved_iterations(64) == 5


def test_stack_round_trip():
    stack = _stack()
    mats = stack_channels(stack)
    assert mats[0].shape == (3 * 10, 12)
    back = unstack_channels(*mats, pad=stack.pad)
    np.testing.assert_array_equal(back.layers, stack.layers)


def test_constant_layers_stack_in_thirds():
    layers = np.empty((3, 4, 5, 3))
    for k, c in enumerate((0.2, 0.5, 0.9)):
        layers[k] = c
    r = stack_channels(LayerStack(layers, 1))[0]
    np.testing.assert_array_equal(r[:4], 0.2)
    np.testing.assert_array_equal(r[4:8], 0.5)
    np.testing.assert_array_equal(r[8:], 0.9)


def test_unstack_clamps_and_validates():
    M = np.full((6, 4), 1.03)
    M[0, 0] = -0.2
    out = unstack_channels(M, M, M, pad=0)
    assert out.layers.max() == 1.0 and out.layers.min() == T_FLOOR
    with pytest.raises(InputError):
        unstack_channels(np.ones((5, 4)), np.ones((5, 4)), np.ones((5, 4)), pad=0)
    with pytest.raises(InputError):
        unstack_channels(np.ones((6, 4)), np.ones((6, 5)), np.ones((6, 4)), pad=0)


def test_full_rank_reproduces_stack():
    stack = _stack(5)
    full = min(stack_channels(stack)[0].shape)
    out = approximate_stack(stack, BkSvdParams(full))
    np.testing.assert_allclose(out.layers, stack.layers, atol=1e-6)


def test_error_non_increasing_in_rank():
    stack = _stack(6, h=20, w=24, pad=2)
    errors = [np.linalg.norm(approximate_stack(stack, BkSvdParams(k)).layers - stack.layers) for k in (1, 2, 4, 8, 16, 28)]
    assert all(b <= a + 1e-9 for a, b in zip(errors, errors[1:]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_projection_property(seed, k):
    A = np.random.default_rng(seed).standard_normal((12, 9))
    est = BlockKrylovSVD(n_components=k, random_state=seed).fit(A)
    D = est.transform(A)
    np.testing.assert_allclose(est.transform(D), D, atol=1e-10)
    assert np.linalg.norm(D) <= np.linalg.norm(A) + 1e-9


def test_estimator_api():
    est = BlockKrylovSVD(n_components=3, n_iter=4)
    assert clone(est).get_params() == est.get_params()
    A = np.random.default_rng(7).standard_normal((10, 8))
    est.fit(A)
    assert est.components_.shape == (10, 3)
    assert est.singular_values_.shape == (3,)
    with pytest.raises(InputError):
        est.transform(np.ones((9, 8)))
