import numpy as np
import pytest

from lfhc.errors import EmptyInput, InputError
from lfhc.fixtures import SyntheticSceneSpec, generate, generating_stack
from lfhc.layers import (
    T_FLOOR,
    LayerOptOptions,
    LayerStack,
    MultiplicativeLayers,
    dump_layers_png,
    optimize_layers,
    reconstruct_subset,
    render_view,
)
from lfhc.metrics import psnr


def _grid(n):
    h = n // 2
    return [(s, t) for s in range(-h, h + 1) for t in range(-h, h + 1)]


def _random_stack(seed=0, h=6, w=7, pad=2):
    rng = np.random.default_rng(seed)
    return LayerStack(rng.uniform(0.2, 1.0, size=(3, h + 2 * pad, w + 2 * pad, 3)), pad)


def test_stack_validation_and_clamp():
    stack = LayerStack(np.full((3, 6, 6, 3), 1e-9), 1)
    assert stack.layers.min() == T_FLOOR
    assert stack.view_shape == (4, 4)
    with pytest.raises(InputError):
        LayerStack(np.ones((2, 6, 6, 3)), 1)
    with pytest.raises(InputError):
        LayerStack(np.ones((3, 4, 4, 3)), 2)


def test_centre_view_is_plain_product():
    stack = _random_stack()
    p = stack.pad
    expected = np.prod(stack.layers[:, p:-p, p:-p], axis=0)
    np.testing.assert_allclose(render_view(stack, (0, 0)), expected)


def test_all_ones_layers_render_ones():
    stack = LayerStack(np.ones((3, 8, 8, 3)), 2)
    for c in _grid(5):
        np.testing.assert_array_equal(render_view(stack, c), 1.0)


@pytest.mark.parametrize("s,t", [(1, 2), (-2, 0), (2, -1), (0, 0)])
def test_dark_pixel_position(s, t):
    pad, h, w = 2, 6, 7
    layers = np.ones((3, h + 2 * pad, w + 2 * pad, 3))
    u0, v0 = 5, 6
    layers[0, u0, v0] = 0.5
    out = render_view(LayerStack(layers, pad), (s, t))
    dark = np.argwhere(out[..., 0] < 1)
    assert dark.tolist() == [[u0 - pad + s, v0 - pad + t]]


def test_offset_beyond_pad():
    with pytest.raises(InputError):
        render_view(_random_stack(pad=1), (2, 0))


def test_multiplicative_in_centre_layer():
    stack = _random_stack(1)
    scaled = stack.layers.copy()
    scaled[1] *= 0.5
    for c in [(0, 0), (1, -2)]:
        np.testing.assert_allclose(render_view(LayerStack(scaled, stack.pad), c), 0.5 * render_view(stack, c))


def test_translation_consistency():
    stack = _random_stack(2)
    s, t = 1, -2
    shifted = np.stack([np.roll(stack.layers[k], (-x * s, -x * t), axis=(0, 1)) for k, x in enumerate((-1, 0, 1))])
    np.testing.assert_allclose(render_view(LayerStack(shifted, stack.pad), (0, 0)), render_view(stack, (s, t)))


def test_reconstruct_subset_is_a_map():
    stack = _random_stack(3)
    coords = [(0, 1), (1, 1), (-1, 0), (2, 2)]
    assert reconstruct_subset(stack, []) == []
    for img, c in zip(reconstruct_subset(stack, coords), coords):
        np.testing.assert_array_equal(img, render_view(stack, c))


def test_constant_single_view():
    view = np.full((8, 8, 3), 0.37)
    stack = optimize_layers([((0, 0), view)])
    assert np.max(np.abs(render_view(stack, (0, 0)) - view)) <= 1e-6


def test_lambertian_plane():
    img = generate(SyntheticSceneSpec("textured-plane", {"d": 0}), 1, 1, 32, 32).views[0, 0]
    views = [(c, img) for c in _grid(3)]
    stack = optimize_layers(views)
    assert min(psnr(img, render_view(stack, c)) for c, _ in views) >= 40


def test_recovers_layer_generated_views():
    spec = SyntheticSceneSpec("from-layer-stack", rng_seed=5)
    lf = generate(spec, 3, 3, 24, 24)
    views = [(c, lf.view(c)) for c in lf.coords()]
    stack = optimize_layers(views, LayerOptOptions(max_iters=2000))
    assert min(psnr(v, render_view(stack, c)) for c, v in views) >= 35
    assert generating_stack(spec, 3, 3, 24, 24).pad == stack.pad


def test_objective_non_increasing_and_deterministic(small_two_plane):
    views = [(c, small_two_plane.view(c)) for c in small_two_plane.coords()[:9]]
    opts = LayerOptOptions(max_iters=60, rng_seed=3)
    a, hist = optimize_layers(views, opts, return_history=True)
    b = optimize_layers(views, opts)
    assert all(y <= x for x, y in zip(hist, hist[1:]))
    np.testing.assert_array_equal(a.layers, b.layers)


def test_mirror_symmetry(small_two_plane):
    coords = small_two_plane.coords()
    views = [(c, small_two_plane.view(c)) for c in coords]
    mirrored = [((s, -t), img[:, ::-1]) for (s, t), img in views]
    opts = LayerOptOptions(max_iters=80, rng_seed=11)
    a, ha = optimize_layers(views, opts, return_history=True)
    b, hb = optimize_layers(mirrored, opts, return_history=True)
    assert hb[-1] == pytest.approx(ha[-1], rel=1e-6)
    for s, t in coords:
        np.testing.assert_allclose(render_view(b, (s, -t)), render_view(a, (s, t))[:, ::-1], atol=1e-6)


def test_input_errors():
    with pytest.raises(EmptyInput):
        optimize_layers([])
    with pytest.raises(InputError):
        optimize_layers([((0, 0), np.full((4, 4, 3), np.nan))])
    with pytest.raises(InputError):
        optimize_layers([((0, 0), np.zeros((4, 4, 3))), ((0, 1), np.zeros((5, 4, 3)))])
    with pytest.raises(InputError):
        LayerOptOptions(max_iters=0)


def test_estimator_api(tmp_path):
    img = np.full((6, 6, 3), 0.5)
    coords = [(0, 0), (0, 1)]
    est = MultiplicativeLayers(max_iters=50)
    assert est.get_params()["max_iters"] == 50
    out = est.fit_predict(np.stack([img, img]), coords)
    assert out.shape == (2, 6, 6, 3)
    assert est.n_iter_ == len(est.objective_history_) - 1
    paths = dump_layers_png(est.stack_, tmp_path)
    assert len(paths) == 3
