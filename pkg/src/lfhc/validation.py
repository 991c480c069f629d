"""Input validation helpers shared by the estimators and functional API."""

import numpy as np

from .errors import EmptyInput, InputError


def check_image(img, name="image", unit_range=True):
    """Return ``img`` as a float64 (H, W, 3) array, validating shape and values."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InputError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise EmptyInput(f"{name} has zero size")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite samples")
    if unit_range and (arr.min() < 0.0 or arr.max() > 1.0):
        raise InputError(f"{name} samples must lie in [0, 1]")
    return arr


def check_coord(coord):
    try:
        s, t = coord
    except (TypeError, ValueError):
        raise InputError(f"view coordinate must be a pair, got {coord!r}") from None
    if int(s) != s or int(t) != t:
        raise InputError(f"view coordinate must be integral, got {coord!r}")
    return int(s), int(t)


def check_views(views, min_count=1, unit_range=True):
    """Validate a list of ``(coord, image)`` pairs.

    Returns ``(coords, stack)`` where ``stack`` has shape (m, H, W, 3).
    """
    views = list(views)
    if len(views) < min_count:
        if not views:
            raise EmptyInput("no views given")
        raise InputError(f"need at least {min_count} views, got {len(views)}")
    coords = []
    images = []
    for i, item in enumerate(views):
        try:
            coord, img = item
        except (TypeError, ValueError):
            raise InputError(f"view {i} is not a (coord, image) pair") from None
        coords.append(coord)
        images.append(check_image(img, name=f"view {i}", unit_range=unit_range))
    shape = images[0].shape
    for i, img in enumerate(images):
        if img.shape != shape:
            raise InputError(f"view {i} has shape {img.shape}, expected {shape}")
    return coords, np.stack(images)


def check_matrix(A, name="matrix"):
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 2 or 0 in arr.shape:
        raise InputError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def check_random_state_int(seed):
    if seed is None:
        return 0
    return int(seed)
