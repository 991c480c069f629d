"""Fourier Disparity Layers: calibration, per-frequency ridge fit, synthesis.

A view at angular position ``(u, v)`` has spectrum

    L_uv(f) = sum_k exp(2i*pi * d_k * (u*f_y + v*f_x)) * X_k(f)

i.e. layer ``k`` sampled at ``p + d_k * (u, v)``. The layer spectra ``X_k``
are found independently at every frequency by Tikhonov-regularised least
squares over the available views. Spectra are kept as real-FFT half planes
(the other half follows from Hermitian symmetry).
"""

import logging
import math
import struct
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import BitstreamError, InputError
from .lightfield import ViewCoord
from .validation import check_coord, check_views

logger = logging.getLogger(__name__)

_CHUNK = 256
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FdlFitParams:
    lam: Optional[float] = None  # None: default_lambda(m, n)
    n: int = 30
    d_min: float = -2.0
    d_max: float = 2.0
    calib_iters: int = 10
    window: int = 8  # border taper applied to the views during calibration
    band: float = 0.25  # calibration band as a fraction of Nyquist: DFT bins up to N/8
    position_damping: float = 10.0
    fit_window: int = 0  # border taper for the layer regression (0: none)

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise InputError("lam must be positive")
        if self.n < 1:
            raise InputError("n must be >= 1")
        if not self.d_min < self.d_max:
            raise InputError("d_min must be below d_max")
        if self.position_damping < 0:
            raise InputError("position_damping must be non-negative")
        if min(self.calib_iters, self.window, self.fit_window) < 0:
            raise InputError("calib_iters and window widths must be non-negative")

    def resolved_lam(self, m):
        return self.lam if self.lam is not None else default_lambda(m, self.n)


def default_lambda(m, n):
    """1e-4 times the squared Frobenius norm of A(f), which is m*n at every f."""
    return 1e-4 * m * n


# ---------------------------------------------------------------------------
# spectra and windowing


def border_window(h, w, width):
    """Separable raised-cosine taper over ``width`` pixels at each border."""
    if width <= 0:
        return np.ones((h, w))

    def ramp(n):
        r = np.ones(n)
        k = min(width, n // 2)
        edge = 0.5 - 0.5 * np.cos(np.pi * (np.arange(k) + 1) / (width + 1))
        r[:k] = edge
        r[n - k:] = np.minimum(r[n - k:], edge[::-1])
        return r

    return np.outer(ramp(h), ramp(w))


def frequency_grid(h, w):
    fy = np.fft.fftfreq(h)
    fx = np.fft.rfftfreq(w)
    return np.repeat(fy, fx.size), np.tile(fx, fy.size)


def view_spectra(images, window, offset=0.0):
    """rfft2 of windowed images: (m, H, W, 3) -> (m, H*(W//2+1), 3).

    ``offset`` (broadcast against the images) is subtracted before windowing;
    otherwise the window's own spectrum, which does not move between views,
    dominates the low frequencies.
    """
    images = np.asarray(images, dtype=np.float64)
    m, h, w, _ = images.shape
    win = border_window(h, w, window)
    spec = np.fft.rfft2((images - offset) * win[None, :, :, None], axes=(1, 2))
    return spec.reshape(m, -1, 3)


def _system(fy, fx, positions, disparities):
    """A[f, j, k] = exp(2i*pi*d_k*(u_j*fy + v_j*fx))."""
    phase = positions[None, :, 0] * fy[:, None] + positions[None, :, 1] * fx[:, None]
    return np.exp(2j * np.pi * phase[:, :, None] * disparities[None, None, :])


def _ridge(A, b, lam):
    """Solve (A^H A + lam I) x = A^H b for a batch of frequencies; b is (F, m, 3)."""
    Ah = np.conj(np.swapaxes(A, 1, 2))
    G = Ah @ A
    n = G.shape[-1]
    G[:, np.arange(n), np.arange(n)] += lam
    try:
        return np.linalg.solve(G, Ah @ b)
    except np.linalg.LinAlgError:
        raise InputError("singular per-frequency regression; increase lam") from None


def _solve_all(fy, fx, positions, disparities, b, lam):
    F = fy.size
    n = disparities.size
    x = np.empty((F, n, 3), dtype=np.complex128)
    for lo in range(0, F, _CHUNK):
        hi = min(F, lo + _CHUNK)
        A = _system(fy[lo:hi], fx[lo:hi], positions, disparities)
        x[lo:hi] = _ridge(A, np.swapaxes(b[:, lo:hi], 0, 1), lam)
    return x


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True, eq=False)
class FDLModel:
    """Fitted layer spectra plus the views (spectra and positions) used for the fit.

    ``coeffs`` has shape (n, H, W//2+1, 3). ``positions`` maps every calibrated
    view coordinate to its angular position ``(u, v)``.
    """

    disparities: np.ndarray
    coeffs: np.ndarray
    shape: tuple
    lam: float
    window: int
    positions: dict = field(default_factory=dict)
    fitted_coords: tuple = ()
    fitted_positions: np.ndarray = None
    fitted_spectra: np.ndarray = None
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    auto_lam: bool = False

    @property
    def n(self):
        return self.disparities.size

    @property
    def m(self):
        return len(self.fitted_coords)

    def position(self, coord):
        coord = ViewCoord(*check_coord(coord))
        if coord in self.positions:
            return self.positions[coord]
        return (float(coord.s), float(coord.t))

    def full_spectrum(self):
        """Layer spectra on the full (H, W) frequency grid, shape (n, H, W, 3)."""
        h, w = self.shape
        layers = np.fft.irfft2(self.coeffs, s=(h, w), axes=(1, 2))
        return np.fft.fft2(layers, axes=(1, 2))


def _check_disparities(d):
    d = np.asarray(d, dtype=np.float64).ravel()
    if d.size == 0 or not np.all(np.isfinite(d)):
        raise InputError("disparities must be a non-empty finite list")
    if np.any(np.diff(d) <= 1e-6):
        raise InputError("disparities must be strictly increasing")
    return d


def _positions_array(coords):
    arr = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise InputError("angular positions must be finite")
    return arr


def _fit_from_spectra(spectra, pos, disparities, lam, shape, window, coords, positions, offset, auto_lam):
    h, w = shape
    fy, fx = frequency_grid(h, w)
    x = _solve_all(fy, fx, pos, disparities, spectra, lam)
    if not np.all(np.isfinite(x)):
        raise InputError("layer regression produced non-finite spectra")
    coeffs = np.ascontiguousarray(np.moveaxis(x, 1, 0)).reshape(disparities.size, h, w // 2 + 1, 3)
    return FDLModel(
        disparities=disparities,
        coeffs=coeffs,
        shape=(h, w),
        lam=float(lam),
        window=int(window),
        positions=dict(positions),
        fitted_coords=tuple(coords),
        fitted_positions=pos,
        fitted_spectra=spectra,
        offset=offset,
        auto_lam=auto_lam,
    )


def fit_fdl(views, d_k, coords, lam=None, window=0, positions=None):
    """Fit layer spectra to ``(ViewCoord, image)`` views at angular positions ``coords``.

    ``positions`` optionally maps further view coordinates to angular
    positions, for later :func:`refine` calls.
    """
    vcoords, images = check_views(views, unit_range=False)
    d = _check_disparities(d_k)
    pos = _positions_array(coords)
    if pos.shape[0] != len(vcoords):
        raise InputError(f"{len(vcoords)} views but {pos.shape[0]} angular positions")
    if d.size > len(vcoords):
        logger.warning("fitting %d layers from only %d views", d.size, len(vcoords))
    auto_lam = lam is None
    lam = default_lambda(len(vcoords), d.size) if auto_lam else float(lam)
    if not lam > 0:
        raise InputError("lam must be positive")
    # windowed fits work on mean-free views; the mean is added back on synthesis
    offset = images.mean(axis=(0, 1, 2)) if window else np.zeros(3)
    spectra = view_spectra(images, window, offset)
    known = dict(positions or {})
    vcoords = [ViewCoord(*check_coord(c)) for c in vcoords]
    for c, p in zip(vcoords, pos):
        known.setdefault(c, (float(p[0]), float(p[1])))
    return _fit_from_spectra(spectra, pos, d, lam, images.shape[1:3], window, vcoords, known, offset, auto_lam)


def synthesize_view(model, coord, clip=True):
    """Render the view at angular position ``coord = (u, v)``."""
    u, v = (float(c) for c in coord)
    h, w = model.shape
    fy, fx = frequency_grid(h, w)
    phase = np.exp(
        2j * np.pi * (u * fy + v * fx)[None, :] * model.disparities[:, None]
    ).reshape(model.n, h, w // 2 + 1, 1)
    spec = np.sum(phase * model.coeffs, axis=0)
    img = np.fft.irfft2(spec, s=(h, w), axes=(0, 1))
    if model.window:
        img = img / border_window(h, w, model.window)[:, :, None] + model.offset
    if clip:
        img = np.clip(img, 0.0, 1.0)
    return img


def synthesize_coord(model, view_coord, clip=True):
    """Render a grid view using its calibrated angular position."""
    return synthesize_view(model, model.position(view_coord), clip=clip)


def refine(model, new_views, lam=None):
    """Refit over every view seen so far plus ``new_views``.

    With ``lam=None`` an automatically chosen weight is rescaled to the new
    view count and an explicit one is kept.
    """
    new_views = list(new_views)
    if not new_views:
        return model
    vcoords, images = check_views(new_views, unit_range=False)
    if images.shape[1:3] != tuple(model.shape):
        raise InputError(f"new views are {images.shape[1:3]}, model is {model.shape}")
    vcoords = [ViewCoord(*check_coord(c)) for c in vcoords]
    pos_new = np.array([model.position(c) for c in vcoords], dtype=np.float64)
    spectra = np.concatenate([model.fitted_spectra, view_spectra(images, model.window, model.offset)])
    pos = np.concatenate([model.fitted_positions, pos_new])
    coords = model.fitted_coords + tuple(vcoords)
    auto_lam = lam is None and model.auto_lam
    if auto_lam:
        lam = default_lambda(len(coords), model.n)
    elif lam is None:
        lam = model.lam
    lam = float(lam)
    if not lam > 0:
        raise InputError("lam must be positive")
    return _fit_from_spectra(
        spectra, pos, model.disparities, lam, model.shape, model.window, coords, model.positions, model.offset, auto_lam
    )


# ---------------------------------------------------------------------------
# calibration


class Calibration(NamedTuple):
    disparities: np.ndarray
    positions: np.ndarray  # (m, 2), same order as the input views
    identifiable: bool
    residuals: list  # band residual after each calibration iteration (index 0: initial)


def _band(h, w, fraction):
    fy, fx = frequency_grid(h, w)
    limit = 0.5 * fraction + 1e-12
    sel = (np.abs(fy) <= limit) & (np.abs(fx) <= limit) & ~((fy == 0) & (fx == 0))
    return np.nonzero(sel)[0], fy[sel], fx[sel]


def _band_residual(fy, fx, b, pos, d, lam):
    """Sum over band frequencies of the optimal ridge objective; b is (F, m, 3)."""
    A = _system(fy, fx, pos, d)
    x = _ridge(A, b, lam)
    r = A @ x - b
    return float(np.sum(np.abs(r) ** 2) + lam * np.sum(np.abs(x) ** 2)), x


def _gauge(pos, grid, d):
    """Pin the translation and scale of the positions to the view grid."""
    pos = pos - (pos - grid).mean(axis=0)
    denom = float(np.sum(grid * grid))
    if denom == 0.0:
        return pos, d
    alpha = float(np.sum(pos * grid)) / denom
    if not alpha > 0:
        return pos, d
    return pos / alpha, d * alpha


def _search_disparity(objective, lo, hi, current, f_current, tol=1e-3):
    """Coarse scan then golden-section refinement; never returns a worse point."""
    coarse = 9 if hi - lo > 1.0 else 5
    xs = np.linspace(lo, hi, coarse)
    vals = [objective(x) for x in xs]
    i = int(np.argmin(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, coarse - 1)]
    best_x, best_f = xs[i], vals[i]
    c = b - _GOLDEN * (b - a)
    e = a + _GOLDEN * (b - a)
    fc, fe = objective(c), objective(e)
    while b - a > tol:
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - _GOLDEN * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, e, fe
            e = a + _GOLDEN * (b - a)
            fe = objective(e)
    for x, f in ((c, fc), (e, fe)):
        if f < best_f:
            best_x, best_f = x, f
    if best_f <= f_current:
        return best_x, best_f
    return current, f_current


class _BandSystem:
    """Normal equations of the band regression, kept in sync with ``d``.

    Uses min_x |Ax - b|^2 + lam|x|^2 = |b|^2 - c^H G^-1 c with G = A^H A + lam I
    and c = A^H b. Only row/column ``k`` of G depends on d_k, so a Schur
    complement against the fixed block makes each trial value of d_k cost
    O(F n^2).
    """

    def __init__(self, fy, fx, b, pos, d, lam):
        self.phase = 2j * np.pi * (pos[None, :, 0] * fy[:, None] + pos[None, :, 1] * fx[:, None])
        self.b = b
        self.bb = float(np.sum(np.abs(b) ** 2))
        self.gamma = b.shape[1] + lam
        self.A = np.exp(self.phase[:, :, None] * d[None, None, :])  # (F, m, n)
        Ah = np.conj(np.swapaxes(self.A, 1, 2))
        self.G = Ah @ self.A
        self.G[:, np.arange(d.size), np.arange(d.size)] += lam
        self.c = Ah @ b

    def column(self, value):
        return np.exp(self.phase * value)[:, :, None]  # (F, m, 1)

    def objective_for(self, k):
        """Return f(value): the band objective with d_k replaced by ``value``."""
        n = self.G.shape[1]
        keep = [i for i in range(n) if i != k]
        b = self.b
        if not keep:
            def single(value):
                col = self.column(value)
                ck = (np.conj(np.swapaxes(col, 1, 2)) @ b)[:, 0, :]
                return self.bb - float(np.sum(np.abs(ck) ** 2)) / self.gamma
            return single
        Ah = np.conj(np.swapaxes(self.A[:, :, keep], 1, 2))
        M = np.linalg.inv(self.G[:, keep][:, :, keep])
        c = self.c[:, keep]
        y = M @ c
        yh = np.conj(np.swapaxes(y, 1, 2))
        base = self.bb - float(np.sum(np.real(np.conj(c) * y)))

        def f(value):
            col = self.column(value)
            ck = (np.conj(np.swapaxes(col, 1, 2)) @ b)[:, 0, :]
            g = Ah @ col  # (F, n-1, 1)
            schur = self.gamma - np.real(np.sum(np.conj(g) * (M @ g), axis=(1, 2)))
            # conj(y^H g) = g^H y since M is Hermitian
            num = ck - np.conj((yh @ g)[:, :, 0])
            return base - float(np.sum(np.abs(num) ** 2 / schur[:, None]))

        return f

    def set_column(self, k, value):
        col = self.column(value)
        self.A[:, :, k] = col[:, :, 0]
        row = (np.conj(np.swapaxes(col, 1, 2)) @ self.A)[:, 0, :]
        row[:, k] = self.gamma
        self.G[:, k, :] = row
        self.G[:, :, k] = np.conj(row)
        self.c[:, k, :] = (np.conj(np.swapaxes(col, 1, 2)) @ self.b)[:, 0, :]


def calibrate(views, params=None):
    """Estimate layer disparities and per-view angular positions.

    Block-coordinate descent on the low-band ridge residual: golden-section
    search on each disparity, then a damped Gauss-Newton step on the view
    positions. Positions start on the view grid; their mean offset and scale
    are pinned to it. The residual is non-increasing over iterations.
    """
    params = params or FdlFitParams()
    coords, images = check_views(views, min_count=2, unit_range=False)
    coords = [check_coord(c) for c in coords]
    m, h, w, _ = images.shape
    grid = np.array(coords, dtype=np.float64)
    d = np.linspace(params.d_min, params.d_max, params.n) if params.n > 1 else np.array(
        [0.5 * (params.d_min + params.d_max)]
    )
    pos = grid.copy()
    if np.max(np.abs(images - images[:1])) < 1e-12:
        if params.n > 1:
            logger.warning("all views identical: disparities are unidentifiable")
            return Calibration(d, pos, False, [])
        # zero parallax
        return Calibration(np.clip([0.0], params.d_min, params.d_max), pos, True, [])
    lam = params.resolved_lam(m)
    idx, fy, fx = _band(h, w, params.band)
    means = images.mean(axis=(1, 2), keepdims=True)
    b = np.swapaxes(view_spectra(images, params.window, means)[:, idx], 0, 1)
    # scale-free residuals: normalise by the band energy
    scale = float(np.sum(np.abs(b) ** 2)) or 1.0
    b = b / math.sqrt(scale)
    lam_n = lam

    f_cur, x = _band_residual(fy, fx, b, pos, d, lam_n)
    history = [f_cur]
    margin = 1e-3 * (params.d_max - params.d_min)
    for _ in range(params.calib_iters):
        f_start = f_cur
        system = _BandSystem(fy, fx, b, pos, d, lam_n)
        for k in range(d.size):
            lo = params.d_min if k == 0 else d[k - 1] + margin
            hi = params.d_max if k == d.size - 1 else d[k + 1] - margin
            if hi <= lo:
                continue
            new, f_new = _search_disparity(system.objective_for(k), lo, hi, d[k], f_cur)
            if new != d[k]:
                d[k] = new
                system.set_column(k, new)
            f_cur = f_new
        f_cur, x = _band_residual(fy, fx, b, pos, d, lam_n)
        pos, d, f_cur = _position_step(fy, fx, b, pos, grid, d, x, lam_n, f_cur, params)
        history.append(f_cur)
        if f_start - f_cur <= 1e-6 * max(f_start, 1e-300):
            break
    return Calibration(d, pos, True, history)


def _position_step(fy, fx, b, pos, grid, d, x, lam, f_cur, params):
    A = _system(fy, fx, pos, d)  # (F, m, n)
    r = np.einsum("fjk,fkc->fjc", A, x) - b  # (F, m, 3)
    dA = 2j * np.pi * A * d[None, None, :]
    base = np.einsum("fjk,fkc->fjc", dA, x)
    Ju = base * fy[:, None, None]
    Jv = base * fx[:, None, None]
    huu = np.sum(np.abs(Ju) ** 2, axis=(0, 2))
    hvv = np.sum(np.abs(Jv) ** 2, axis=(0, 2))
    huv = np.sum(np.real(np.conj(Ju) * Jv), axis=(0, 2))
    gu = np.sum(np.real(np.conj(Ju) * r), axis=(0, 2))
    gv = np.sum(np.real(np.conj(Jv) * r), axis=(0, 2))
    # Levenberg damping doubles as a prior pulling positions towards the grid
    damp = params.position_damping * float(np.mean(huu + hvv)) + 1e-30
    gu = gu + damp * (pos[:, 0] - grid[:, 0])
    gv = gv + damp * (pos[:, 1] - grid[:, 1])
    det = (huu + damp) * (hvv + damp) - huv * huv
    det = np.where(np.abs(det) < 1e-300, 1e-300, det)
    du = -((hvv + damp) * gu - huv * gv) / det
    dv = -((huu + damp) * gv - huv * gu) / det
    step = np.stack([du, dv], axis=1)
    if not np.all(np.isfinite(step)):
        return pos, d, f_cur
    # remove the gauge directions (common translation, common scaling)
    step = step - step.mean(axis=0)
    norm = float(np.sum(pos * pos))
    if norm > 0:
        step = step - pos * (float(np.sum(step * pos)) / norm)
    t = 1.0
    for _ in range(12):
        trial_pos, trial_d = _gauge(pos + t * step, grid, d)
        if np.all(np.diff(trial_d) > 0) and trial_d[0] >= params.d_min - 1e-9 and trial_d[-1] <= params.d_max + 1e-9:
            f_new = _band_residual(fy, fx, b, trial_pos, trial_d, lam)[0]
            if f_new <= f_cur:
                return trial_pos, trial_d, f_new
        t *= 0.5
    return pos, d, f_cur


# ---------------------------------------------------------------------------
# metadata


_U32 = struct.Struct("<I")
_F64 = struct.Struct("<d")
MAX_LAYERS = 4096
MAX_VIEWS = 65535


def serialize_metadata(disparities, positions, lam, window):
    """n, d_k (f64), m, (u_j, v_j) (f64), then lam (f64, 0 = automatic) and window (u16)."""
    d = np.asarray(disparities, dtype="<f8")
    pos = np.asarray(positions, dtype="<f8").reshape(-1, 2)
    return b"".join(
        [
            _U32.pack(d.size),
            d.tobytes(),
            _U32.pack(pos.shape[0]),
            pos.tobytes(),
            _F64.pack(float(lam)),
            struct.pack("<H", int(window)),
        ]
    )


def parse_metadata(data, base_offset=0):
    data = bytes(data)

    def need(pos, size, what):
        if pos + size > len(data):
            raise BitstreamError(f"truncated FDL metadata ({what})", offset=base_offset + pos)

    need(0, 4, "layer count")
    (n,) = _U32.unpack_from(data, 0)
    if not 1 <= n <= MAX_LAYERS:
        raise BitstreamError(f"bad FDL layer count {n}", offset=base_offset)
    need(4, 8 * n + 4, "disparities")
    d = np.frombuffer(data, dtype="<f8", count=n, offset=4).astype(np.float64)
    pos = 4 + 8 * n
    (m,) = _U32.unpack_from(data, pos)
    if m > MAX_VIEWS:
        raise BitstreamError(f"bad FDL view count {m}", offset=base_offset + pos)
    pos += 4
    need(pos, 16 * m + 10, "positions")
    coords = np.frombuffer(data, dtype="<f8", count=2 * m, offset=pos).astype(np.float64).reshape(m, 2)
    pos += 16 * m
    (lam,) = _F64.unpack_from(data, pos)
    (window,) = struct.unpack_from("<H", data, pos + 8)
    pos += 10
    if pos != len(data):
        raise BitstreamError("trailing bytes after FDL metadata", offset=base_offset + pos)
    if not np.all(np.isfinite(d)) or np.any(np.abs(d) > 1e4) or np.any(np.diff(d) <= 0):
        raise BitstreamError("invalid FDL disparities", offset=base_offset + 4)
    if not np.all(np.isfinite(coords)) or np.any(np.abs(coords) > 1e4):
        raise BitstreamError("invalid FDL view positions", offset=base_offset + 8 + 8 * n)
    if not (math.isfinite(lam) and (lam == 0.0 or 1e-12 <= lam <= 1e12)):
        raise BitstreamError("invalid FDL regularisation weight", offset=base_offset + pos - 10)
    if window > 1024:
        raise BitstreamError("invalid FDL window width", offset=base_offset + pos - 2)
    return d, coords, lam, int(window)


# ---------------------------------------------------------------------------
# estimator


class FourierDisparityLayers(BaseEstimator):
    """Estimator facade: ``fit`` calibrates and fits, ``predict`` synthesises
    grid views, ``partial_fit`` refines with more views."""

    def __init__(self, n_layers=30, lam=None, d_min=-2.0, d_max=2.0, calib_iters=10, window=8, fit_window=0):
        self.n_layers = n_layers
        self.lam = lam
        self.d_min = d_min
        self.d_max = d_max
        self.calib_iters = calib_iters
        self.window = window
        self.fit_window = fit_window

    def _params(self):
        return FdlFitParams(
            lam=self.lam,
            n=self.n_layers,
            d_min=self.d_min,
            d_max=self.d_max,
            calib_iters=self.calib_iters,
            window=self.window,
            fit_window=self.fit_window,
        )

    def fit(self, X, coords):
        views = list(zip(coords, X))
        params = self._params()
        cal = calibrate(views, params)
        self.disparities_ = cal.disparities
        self.positions_ = cal.positions
        self.identifiable_ = cal.identifiable
        grid = {ViewCoord(*check_coord(c)): tuple(p) for c, p in zip(coords, cal.positions)}
        self.model_ = fit_fdl(views, cal.disparities, cal.positions, self.lam, self.fit_window, positions=grid)
        return self

    def partial_fit(self, X, coords):
        check_is_fitted(self, "model_")
        self.model_ = refine(self.model_, list(zip(coords, X)))
        return self

    def predict(self, coords):
        check_is_fitted(self, "model_")
        return np.stack([synthesize_coord(self.model_, c) for c in coords])
