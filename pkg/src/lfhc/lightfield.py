"""4D light field container, view-directory I/O and colour conversion."""

import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DimensionMismatch, InputError, LightFieldError, MissingView, UnreadableImage


class ViewCoord(NamedTuple):
    """Signed view offset from the centre view; ``s`` is the angular row."""

    s: int
    t: int


@dataclass(frozen=True, eq=False)
class LightField:
    """Dense grid of RGB views, ``views[row, col]`` of shape (H, W, 3) in [0, 1].

    Views are addressed either by zero-based grid index or by centred
    :class:`ViewCoord`, where the centre view is ``(0, 0)``.
    """

    views: np.ndarray

    def __post_init__(self):
        arr = np.array(self.views, dtype=np.float64, copy=True)
        if arr.ndim != 5 or arr.shape[4] != 3:
            raise InputError(f"light field must have shape (S, T, H, W, 3), got {arr.shape}")
        if 0 in arr.shape:
            raise InputError("light field has zero size")
        if not np.all(np.isfinite(arr)):
            raise InputError("light field contains non-finite samples")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InputError("light field samples must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "views", arr)

    @property
    def S(self):
        return self.views.shape[0]

    @property
    def T(self):
        return self.views.shape[1]

    @property
    def H(self):
        return self.views.shape[2]

    @property
    def W(self):
        return self.views.shape[3]

    @property
    def shape(self):
        return self.views.shape

    @property
    def center(self):
        return (self.S - 1) // 2, (self.T - 1) // 2

    def index(self, coord):
        """Grid index (row, col) of a centred coordinate."""
        cs, ct = self.center
        row, col = coord[0] + cs, coord[1] + ct
        if not (0 <= row < self.S and 0 <= col < self.T):
            raise InputError(f"view {tuple(coord)} outside the {self.S}x{self.T} grid")
        return row, col

    def view(self, coord):
        row, col = self.index(coord)
        return self.views[row, col]

    def coords(self):
        """All centred coordinates in row-major order."""
        cs, ct = self.center
        return [ViewCoord(r - cs, c - ct) for r in range(self.S) for c in range(self.T)]

    @classmethod
    def from_views(cls, mapping, rows, cols):
        """Build from a ``{ViewCoord: image}`` mapping covering the whole grid."""
        cs, ct = (rows - 1) // 2, (cols - 1) // 2
        first = next(iter(mapping.values()))
        arr = np.empty((rows, cols) + np.shape(first), dtype=np.float64)
        for r in range(rows):
            for c in range(cols):
                key = ViewCoord(r - cs, c - ct)
                if key not in mapping:
                    raise MissingView(r, c)
                arr[r, c] = mapping[key]
        return cls(arr)


def view_filename(row, col):
    return f"view_{row:02d}_{col:02d}.png"


def load_lightfield(directory, rows, cols):
    """Read ``rows * cols`` 8-bit RGB files named ``view_{ss}_{tt}.png``."""
    if rows < 1 or cols < 1:
        raise LightFieldError("rows and cols must be positive")
    views = None
    ref_path = None
    for r in range(rows):
        for c in range(cols):
            path = os.path.join(directory, view_filename(r, c))
            if not os.path.isfile(path):
                raise MissingView(r, c, path)
            try:
                with Image.open(path) as im:
                    im.load()
                    if im.mode not in ("RGB", "RGBA", "L", "P"):
                        raise UnreadableImage(path, f"unsupported mode {im.mode}")
                    data = np.asarray(im.convert("RGB"), dtype=np.uint8)
            except (UnidentifiedImageError, OSError) as exc:
                raise UnreadableImage(path, str(exc)) from exc
            if views is None:
                views = np.empty((rows, cols) + data.shape, dtype=np.float64)
                ref_path = path
            elif data.shape != views.shape[2:]:
                raise DimensionMismatch(
                    f"view is {data.shape[1]}x{data.shape[0]}, expected "
                    f"{views.shape[3]}x{views.shape[2]} (as {ref_path})",
                    path,
                )
            views[r, c] = data / 255.0
    return LightField(views)


def to_uint8(img):
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def save_lightfield(lf, directory):
    os.makedirs(directory, exist_ok=True)
    for r in range(lf.S):
        for c in range(lf.T):
            Image.fromarray(to_uint8(lf.views[r, c]), mode="RGB").save(
                os.path.join(directory, view_filename(r, c))
            )


def crop_inner_grid(lf, inner):
    """Centred ``inner x inner`` sub-grid of an odd-sized grid."""
    if inner < 1 or inner % 2 == 0:
        raise LightFieldError(f"inner grid size must be odd and positive, got {inner}")
    if lf.S % 2 == 0 or lf.T % 2 == 0:
        raise LightFieldError(f"grid {lf.S}x{lf.T} has no shared centre view")
    if inner > min(lf.S, lf.T):
        raise LightFieldError(f"inner grid {inner} larger than {lf.S}x{lf.T}")
    r0 = (lf.S - inner) // 2
    c0 = (lf.T - inner) // 2
    return LightField(lf.views[r0:r0 + inner, c0:c0 + inner])


# BT.601 full range (JFIF); chroma centred at 0.5.
_RGB2YUV = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168735891647856, -0.331264108352144, 0.5],
        [0.5, -0.418687589158345, -0.081312410841655],
    ]
)
_YUV2RGB = np.linalg.inv(_RGB2YUV)
_OFFSET = np.array([0.0, 0.5, 0.5])


def rgb_to_yuv(img):
    return np.asarray(img, dtype=np.float64) @ _RGB2YUV.T + _OFFSET


def yuv_to_rgb(img):
    return (np.asarray(img, dtype=np.float64) - _OFFSET) @ _YUV2RGB.T
