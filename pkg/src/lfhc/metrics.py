"""PSNR, YUV-PSNR and Bjontegaard rate difference."""

import csv
from typing import NamedTuple

import numpy as np

from .errors import InputError
from .lightfield import rgb_to_yuv

PSNR_CAP = 99.0
DEFAULT_YUV_WEIGHTS = (6.0, 1.0, 1.0)


class RDPoint(NamedTuple):
    rate: float
    quality: float


def psnr(ref, test, peak=1.0):
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise InputError(f"shape mismatch: {ref.shape} vs {test.shape}")
    mse = np.mean((ref - test) ** 2)
    if mse == 0.0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse)))


def plane_psnrs(ref, test):
    """PSNR of the Y, U and V planes over arrays of shape (..., 3) in RGB."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise InputError(f"shape mismatch: {ref.shape} vs {test.shape}")
    yr, yt = rgb_to_yuv(ref), rgb_to_yuv(test)
    return tuple(psnr(yr[..., i], yt[..., i]) for i in range(3))


def combine_yuv(py, pu, pv, weights=DEFAULT_YUV_WEIGHTS):
    wy, wu, wv = weights
    return (wy * py + wu * pu + wv * pv) / (wy + wu + wv)


def yuv_psnr(ref, test, weights=DEFAULT_YUV_WEIGHTS):
    """Weighted YUV-PSNR over all views; ``ref``/``test`` are LightFields or arrays."""
    ref_arr = getattr(ref, "views", ref)
    test_arr = getattr(test, "views", test)
    return combine_yuv(*plane_psnrs(ref_arr, test_arr), weights=weights)


def _check_curve(points, name):
    pts = np.asarray([tuple(p) for p in points], dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError(f"{name} must be a list of (rate, quality) points")
    if len(pts) < 4:
        raise InputError(f"{name} needs at least 4 points for a cubic fit, got {len(pts)}")
    if not np.all(np.isfinite(pts)) or np.any(pts[:, 0] <= 0):
        raise InputError(f"{name} rates must be positive and qualities finite")
    if np.unique(pts[:, 1]).size < 4:
        raise InputError(f"{name} needs 4 distinct quality values")
    return pts[:, 0], pts[:, 1]


def bd_rate(anchor, test):
    """Average rate difference of ``test`` against ``anchor``, in percent.

    Log-rate is fitted as a least-squares cubic in quality for each curve and
    the fits are integrated over the shared quality interval. Negative values
    mean ``test`` needs fewer bits for the same quality.
    """
    ra, qa = _check_curve(anchor, "anchor")
    rt, qt = _check_curve(test, "test")
    lo = max(qa.min(), qt.min())
    hi = min(qa.max(), qt.max())
    if not hi > lo:
        raise InputError("curves have no overlapping quality range")
    pa = np.polyfit(qa, np.log(ra), 3)
    pt = np.polyfit(qt, np.log(rt), 3)
    ia, it = np.polyint(pa), np.polyint(pt)
    area_a = np.polyval(ia, hi) - np.polyval(ia, lo)
    area_t = np.polyval(it, hi) - np.polyval(it, lo)
    mean_diff = (area_t - area_a) / (hi - lo)
    return float(100.0 * np.expm1(mean_diff))


REPORT_COLUMNS = ("rank", "qp", "subset", "bytes", "psnr_y", "psnr_u", "psnr_v", "psnr_yuv")


def write_report_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in REPORT_COLUMNS})


def read_report_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                {
                    "rank": int(rec["rank"]),
                    "qp": int(rec["qp"]),
                    "subset": rec["subset"],
                    "bytes": int(rec["bytes"]),
                    "psnr_y": float(rec["psnr_y"]),
                    "psnr_u": float(rec["psnr_u"]),
                    "psnr_v": float(rec["psnr_v"]),
                    "psnr_yuv": float(rec["psnr_yuv"]),
                }
            )
    return rows


def rd_curve(rows, rank, subset="all"):
    """RD points (bytes, YUV-PSNR) of one rank from report rows, sorted by rate."""
    pts = [
        RDPoint(r["bytes"], r["psnr_yuv"])
        for r in rows
        if r["rank"] == rank and str(r["subset"]) == str(subset)
    ]
    return sorted(pts)
