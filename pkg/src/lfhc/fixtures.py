"""Synthetic light fields with known structure, used as test oracles."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .layers import LayerStack, render_view
from .lightfield import LightField

KINDS = ("constant", "textured-plane", "two-plane", "from-layer-stack")


@dataclass(frozen=True)
class SyntheticSceneSpec:
    """Scene description.

    ``params`` by kind: constant ``value``; textured-plane ``d``; two-plane
    ``d1`` (background), ``d2`` (foreground), ``alpha`` (peak opacity);
    from-layer-stack nothing. ``texture`` is ``"sinusoids"`` (band-limited sum
    of 8 random-phase sinusoids) or ``"fractal"`` (1/f spectrum, natural-image
    like).
    """

    kind: str
    params: dict = field(default_factory=dict)
    rng_seed: int = 0
    texture: str = "sinusoids"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown scene kind {self.kind!r}; expected one of {KINDS}")
        if self.texture not in ("sinusoids", "fractal"):
            raise InputError(f"unknown texture {self.texture!r}")

    @classmethod
    def parse(cls, text, rng_seed=0):
        """Parse ``kind[:key=value,...]``, e.g. ``two-plane:d1=0,d2=2``."""
        kind, _, rest = text.partition(":")
        params = {}
        texture = "sinusoids"
        for item in filter(None, rest.split(",")):
            key, sep, value = item.partition("=")
            if not sep:
                raise InputError(f"bad scene parameter {item!r}")
            key = key.strip()
            try:
                if key == "texture":
                    texture = value.strip()
                elif key == "seed":
                    rng_seed = int(value)
                else:
                    params[key] = float(value)
            except ValueError:
                raise InputError(f"bad value in scene parameter {item!r}") from None
        return cls(kind.strip(), params, rng_seed, texture)


def sinusoid_texture(h, w, rng, count=8, max_freq=None):
    """Sum of ``count`` sinusoids with integer frequencies, scaled to [0.1, 0.9]."""
    if max_freq is None:
        max_freq = max(2, min(h, w) // 8)
    yy, xx = np.mgrid[0:h, 0:w]
    img = np.zeros((h, w, 3))
    for _ in range(count):
        ky, kx = rng.integers(-max_freq, max_freq + 1, size=2)
        if ky == 0 and kx == 0:
            kx = 1
        phase = rng.uniform(0, 2 * np.pi, size=3)
        amp = rng.uniform(0.5, 1.0, size=3)
        arg = 2 * np.pi * (ky * yy / h + kx * xx / w)
        img += amp * np.cos(arg[..., None] + phase)
    return _normalize(img)


def fractal_texture(h, w, rng, exponent=1.0):
    """Periodic random texture with a 1/f^exponent amplitude spectrum."""
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = np.inf
    amp = radius ** (-exponent)
    img = np.empty((h, w, 3))
    base = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
    for c in range(3):
        jitter = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
        spec = (base + 0.35 * jitter) * amp
        img[..., c] = np.fft.ifft2(spec).real
    return _normalize(img)


def _normalize(img, lo=0.1, hi=0.9):
    img = img - img.min()
    peak = img.max()
    if peak > 0:
        img = img / peak
    return lo + (hi - lo) * img


def fourier_shift(img, dy, dx):
    """Sample a periodic image at ``p + (dy, dx)`` (exact for band-limited input)."""
    h, w = img.shape[:2]
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    phase = np.exp(2j * np.pi * (fy * dy + fx * dx))
    if img.ndim == 3:
        phase = phase[..., None]
    spec = np.fft.fft2(img, axes=(0, 1))
    return np.fft.ifft2(spec * phase, axes=(0, 1)).real


def _texture(spec, h, w, rng):
    if spec.texture == "fractal":
        return fractal_texture(h, w, rng)
    return sinusoid_texture(h, w, rng)


def _grid_offsets(S, T):
    cs, ct = (S - 1) // 2, (T - 1) // 2
    return [[(r - cs, c - ct) for c in range(T)] for r in range(S)]


def generate(spec, S, T, H, W):
    """Render a synthetic ``S x T`` light field of ``H x W`` views."""
    if min(S, T, H, W) < 1:
        raise InputError("light field dimensions must be positive")
    rng = np.random.default_rng(spec.rng_seed)
    offsets = _grid_offsets(S, T)
    views = np.empty((S, T, H, W, 3))
    p = spec.params
    reach = max((S - 1) // 2, (T - 1) // 2)

    if spec.kind == "constant":
        views[...] = float(p.get("value", 0.5))
    elif spec.kind == "textured-plane":
        d = float(p.get("d", 0.0))
        _check_disparity(d, reach, H, W)
        tex = _texture(spec, H, W, rng)
        for r in range(S):
            for c in range(T):
                s, t = offsets[r][c]
                views[r, c] = fourier_shift(tex, s * d, t * d)
    elif spec.kind == "two-plane":
        d1 = float(p.get("d1", 0.0))
        d2 = float(p.get("d2", 2.0))
        peak = float(p.get("alpha", 1.0))
        for d in (d1, d2):
            _check_disparity(d, reach, H, W)
        back = _texture(spec, H, W, rng)
        front = _texture(spec, H, W, rng)
        yy, xx = np.mgrid[0:H, 0:W]
        # smooth periodic opacity bump, opaque in the middle of the frame
        alpha = peak * (0.5 - 0.5 * np.cos(2 * np.pi * yy / H)) * (0.5 - 0.5 * np.cos(2 * np.pi * xx / W))
        for r in range(S):
            for c in range(T):
                s, t = offsets[r][c]
                b = fourier_shift(back, s * d1, t * d1)
                f = fourier_shift(front, s * d2, t * d2)
                a = np.clip(fourier_shift(alpha, s * d2, t * d2), 0.0, 1.0)[..., None]
                views[r, c] = a * f + (1.0 - a) * b
    else:
        stack = random_layer_stack(H, W, reach, rng)
        for r in range(S):
            for c in range(T):
                views[r, c] = render_view(stack, offsets[r][c])
    return LightField(np.clip(views, 0.0, 1.0))


def random_layer_stack(H, W, pad, rng):
    """Layers with smooth random texture in roughly [0.45, 1]."""
    layers = np.empty((3, H + 2 * pad, W + 2 * pad, 3))
    for k in range(3):
        tex = sinusoid_texture(H + 2 * pad, W + 2 * pad, rng)
        layers[k] = 0.45 + 0.55 * (tex - 0.1) / 0.8
    return LayerStack(layers, pad)


def _check_disparity(d, reach, H, W):
    if abs(d) * reach >= min(H, W):
        raise InputError(f"disparity {d} shifts views by more than the image size")


def generating_stack(spec, S, T, H, W):
    """The LayerStack a ``from-layer-stack`` scene is rendered from."""
    if spec.kind != "from-layer-stack":
        raise InputError("only from-layer-stack scenes have a generating stack")
    rng = np.random.default_rng(spec.rng_seed)
    return random_layer_stack(H, W, max((S - 1) // 2, (T - 1) // 2), rng)
