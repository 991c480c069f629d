"""Encoder, decoder and container format.

Stage I approximates every scan subset with three multiplicative layers,
reduces them to rank ``k`` with BK-SVD and passes them through the codec; the
decoded layers render the approximated light field ``L'``. Stage II codes
``L'`` hierarchically: the first subset directly, every later subset as the
residual against a Fourier Disparity Layer prediction that is refined after
each subset. The decoder replays Stage II from the container alone.

Container layout (little-endian)::

    b"LFHC" | u16 version | u8 scan order | u16 rank | u8 qp
    | u16 S | u16 T | u16 H | u16 W | u8 flags
    | u32 metadata length | metadata
    | u32 payload count | (u32 length, payload bytes) per payload
"""

import logging
import struct
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .bksvd import BkSvdParams, approximate_stack
from .codec import CodecConfig, CodedPayload, decode_frames, encode_frames_with_recon
from .errors import BitstreamError, ConfigError, DecodeError, LfhcError, PayloadCountMismatch
from .fdl import (
    FdlFitParams,
    calibrate,
    fit_fdl,
    parse_metadata,
    refine,
    serialize_metadata,
    synthesize_coord,
)
from .layers import LayerOptOptions, LayerStack, optimize_layers, reconstruct_subset
from .lightfield import LightField, ViewCoord
from .metrics import combine_yuv, plane_psnrs, psnr
from .scan import ScanKind, partition_views

logger = logging.getLogger(__name__)

MAGIC = b"LFHC"
VERSION = 1
FLAG_STAGE1 = 0x01
_HEADER = struct.Struct("<4sHBHBHHHHB")
_U32 = struct.Struct("<I")
MAX_GRID = 255
MAX_PIXELS = 1 << 14


@dataclass(frozen=True)
class EncodeConfig:
    scan_order: ScanKind = ScanKind.C2
    rank: int = 16
    qp: int = 26
    layer_opts: LayerOptOptions = field(default_factory=LayerOptOptions)
    bk_params: Optional[BkSvdParams] = None  # rank and seed come from this config
    fdl_params: FdlFitParams = field(default_factory=FdlFitParams)
    codec: CodecConfig = field(default_factory=CodecConfig)
    emit_stage1: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scan_order", ScanKind.parse(self.scan_order))
        if not isinstance(self.rank, (int, np.integer)) or not 1 <= self.rank <= 0xFFFF:
            raise ConfigError(f"rank must be a positive integer, got {self.rank!r}")
        if not isinstance(self.qp, (int, np.integer)) or not 0 <= self.qp <= 51:
            raise ConfigError(f"qp must be an integer in [0, 51], got {self.qp!r}")

    @property
    def codec_config(self):
        return self.codec.with_qp(int(self.qp))

    def bk(self):
        base = self.bk_params or BkSvdParams(rank=self.rank)
        return replace(base, rank=int(self.rank), rng_seed=int(self.seed))

    def layer_options(self):
        return replace(self.layer_opts, rng_seed=int(self.seed))


@dataclass(frozen=True, eq=False)
class Bitstream:
    scan_order: ScanKind
    rank: int
    qp: int
    shape: tuple  # (S, T, H, W)
    flags: int
    metadata: bytes
    payloads: tuple  # of CodedPayload

    @property
    def emit_stage1(self):
        return bool(self.flags & FLAG_STAGE1)

    def stage2_payloads(self, subset_count):
        return self.payloads[:subset_count]

    def stage1_payloads(self, subset_count):
        return self.payloads[subset_count:]

    def to_bytes(self):
        S, T, H, W = self.shape
        parts = [
            _HEADER.pack(MAGIC, VERSION, int(self.scan_order), self.rank, self.qp, S, T, H, W, self.flags),
            _U32.pack(len(self.metadata)),
            self.metadata,
            _U32.pack(len(self.payloads)),
        ]
        for p in self.payloads:
            data = p.to_bytes()
            parts += [_U32.pack(len(data)), data]
        return b"".join(parts)

    def __len__(self):
        return len(self.to_bytes())

    @classmethod
    def from_bytes(cls, data):
        """Parse and validate a container; every failure is a :class:`BitstreamError`."""
        data = bytes(data)
        if len(data) < _HEADER.size:
            raise BitstreamError("container shorter than its header", offset=len(data))
        magic, version, order, rank, qp, S, T, H, W, flags = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise BitstreamError("bad container magic", offset=0)
        if version != VERSION:
            raise BitstreamError(f"unsupported container version {version}", offset=4)
        if order > max(ScanKind):
            raise BitstreamError(f"unknown scan order id {order}", offset=6)
        if rank == 0:
            raise BitstreamError("rank must be positive", offset=7)
        if qp > 51:
            raise BitstreamError(f"qp {qp} out of range", offset=9)
        if S != T or S < 3 or S % 2 == 0 or S > MAX_GRID:
            raise BitstreamError(f"unsupported {S}x{T} view grid", offset=10)
        if not (1 <= H <= MAX_PIXELS and 1 <= W <= MAX_PIXELS):
            raise BitstreamError(f"implausible view size {H}x{W}", offset=14)
        if flags & ~FLAG_STAGE1:
            raise BitstreamError(f"unknown flag bits 0x{flags:02x}", offset=18)
        pos = _HEADER.size
        meta, pos = _read_block(data, pos, "metadata")
        if pos + 4 > len(data):
            raise BitstreamError("truncated payload count", offset=pos)
        (count,) = _U32.unpack_from(data, pos)
        pos += 4
        subsets = partition_views(S, ScanKind(order)).subsets
        expected = len(subsets) * (4 if flags & FLAG_STAGE1 else 1)
        if count != expected:
            raise PayloadCountMismatch(expected, count)
        payloads = []
        for i in range(count):
            start = pos + 4
            raw, pos = _read_block(data, pos, f"payload {i}")
            try:
                payloads.append(CodedPayload.from_bytes(raw))
            except DecodeError as exc:
                inner = exc.offset if exc.offset is not None else 0
                raise BitstreamError(f"payload {i}: {exc}", offset=start + inner) from None
        if pos != len(data):
            raise BitstreamError("trailing bytes after the last payload", offset=pos)
        bs = cls(ScanKind(order), rank, qp, (S, T, H, W), flags, meta, tuple(payloads))
        bs._check_payloads()
        return bs

    def _check_payloads(self):
        S, T, H, W = self.shape
        subsets = partition_views(S, self.scan_order).subsets
        for i, p in enumerate(self.stage2_payloads(len(subsets))):
            frames = len(subsets[i])
            if (p.frame_count, p.width, p.height) != (frames, W, H):
                raise BitstreamError(
                    f"payload {i} holds {p.frame_count} frames of {p.width}x{p.height}, "
                    f"expected {frames} of {W}x{H}"
                )
            if p.is_residual != (i > 0):
                raise BitstreamError(f"payload {i} has the wrong residual flag")
            if p.qp != self.qp:
                raise BitstreamError(f"payload {i} qp {p.qp} differs from the container qp {self.qp}")
        for j, p in enumerate(self.stage1_payloads(len(subsets))):
            pad = max(max(abs(s), abs(t)) for s, t in subsets[j // 3])
            if (p.frame_count, p.width, p.height) != (1, W + 2 * pad, H + 2 * pad) or p.is_residual:
                raise BitstreamError(f"stage-1 payload {j} does not match its subset's layer size")


def _read_block(data, pos, what):
    if pos + 4 > len(data):
        raise BitstreamError(f"truncated {what} length", offset=pos)
    (length,) = _U32.unpack_from(data, pos)
    start = pos + 4
    if start + length > len(data):
        raise BitstreamError(f"{what} of {length} bytes runs past the end", offset=pos)
    return data[start:start + length], start + length


@dataclass(eq=False)
class EncodeReport:
    approximated: LightField  # L', the Stage-I output
    reconstruction: LightField  # the decoder's output, computed in-loop
    subset_bytes: list  # Stage-II payload sizes, one per subset
    stage1_bytes: list  # coded layer bytes, one per subset
    view_psnr: dict  # ViewCoord -> PSNR (RGB) against the original
    container_bytes: int = 0

    @property
    def total_bytes(self):
        return sum(self.subset_bytes)


# ---------------------------------------------------------------------------
# Stage I


def _subset_pad(subset):
    return max(max(abs(s), abs(t)) for s, t in subset)


def check_rank(rank, H, W, subsets):
    for subset in subsets:
        pad = _subset_pad(subset)
        limit = min(3 * (H + 2 * pad), W + 2 * pad)
        if rank > limit:
            raise ConfigError(f"rank {rank} exceeds {limit}, the largest for {H}x{W} views")


def stage1_layers(lf, subsets, opts, cache=None):
    """Fit (or fetch from ``cache``) the layer stack of every subset."""
    stacks = []
    for i, subset in enumerate(subsets):
        key = (i, tuple(subset), opts)
        if cache is not None and key in cache:
            stacks.append(cache[key])
            continue
        stack = optimize_layers([(c, lf.view(c)) for c in subset], opts)
        if cache is not None:
            cache[key] = stack
        stacks.append(stack)
    return stacks


def stage1(lf, cfg, subsets, cache=None):
    """Return ``(L' views by coordinate, stage-1 payloads)``."""
    approx = {}
    payloads = []
    codec = cfg.codec_config
    bk = cfg.bk()
    for subset, stack in zip(subsets, stage1_layers(lf, subsets, cfg.layer_options(), cache)):
        low = approximate_stack(stack, bk)
        decoded = np.empty_like(low.layers)
        for k in range(3):
            payload, recon = encode_frames_with_recon([low.layers[k]], codec)
            payloads.append(payload)
            decoded[k] = recon[0]
        coded_stack = LayerStack(decoded, stack.pad)
        for c, view in zip(subset, reconstruct_subset(coded_stack, subset)):
            approx[c] = np.clip(view, 0.0, 1.0)
    return approx, payloads


# ---------------------------------------------------------------------------
# Stage II


def _stage2_loop(model, subsets, first_views, residual_source, fdl):
    """Shared encoder/decoder loop over subsets 2..N.

    ``residual_source(i, predictions)`` returns the decoded residual frames of
    subset ``i``. Returns the reconstructed views by coordinate.
    """
    recon = dict(zip(subsets[0], first_views))
    for i in range(1, len(subsets)):
        subset = subsets[i]
        preds = [synthesize_coord(model, c) for c in subset]
        residuals = residual_source(i, preds)
        views = [np.clip(p + r, 0.0, 1.0) for p, r in zip(preds, residuals)]
        recon.update(zip(subset, views))
        if i + 1 < len(subsets):
            model = refine(model, list(zip(subset, views)), fdl.lam)
    return recon


def _fit_first(decoded_first, subset, disparities, positions_by_coord, fdl):
    pos = [positions_by_coord[c] for c in subset]
    return fit_fdl(
        list(zip(subset, decoded_first)),
        disparities,
        pos,
        lam=fdl.lam,
        window=fdl.fit_window,
        positions=positions_by_coord,
    )


def encode(lf, cfg, layer_cache=None):
    """Encode a light field; returns ``(Bitstream, EncodeReport)``.

    ``layer_cache`` (a dict) lets sweeps reuse the Stage-I layer fits, which
    depend only on the light field, the scan order and the optimiser options.
    """
    if not isinstance(lf, LightField):
        lf = LightField(lf)
    if lf.S != lf.T:
        raise ConfigError(f"the scan orders need a square view grid, got {lf.S}x{lf.T}")
    order = partition_views(lf.S, cfg.scan_order)
    subsets = [list(s) for s in order.subsets]
    check_rank(cfg.rank, lf.H, lf.W, subsets)
    codec = cfg.codec_config
    fdl = cfg.fdl_params

    approx, stage1_payloads = stage1(lf, cfg, subsets, layer_cache)
    coords = lf.coords()
    cal = calibrate([(c, approx[c]) for c in coords], fdl)
    positions = {c: (float(p[0]), float(p[1])) for c, p in zip(coords, cal.positions)}
    metadata = serialize_metadata(cal.disparities, cal.positions, fdl.lam or 0.0, fdl.fit_window)

    first = subsets[0]
    p1, decoded_first = encode_frames_with_recon([approx[c] for c in first], codec)
    model = _fit_first(decoded_first, first, cal.disparities, positions, fdl)
    payloads = [p1]

    def residual_source(i, preds):
        targets = [approx[c] for c in subsets[i]]
        res = [np.clip(t - p, -1.0, 1.0) for t, p in zip(targets, preds)]
        payload, decoded = encode_frames_with_recon(res, codec, is_residual=True)
        payloads.append(payload)
        return decoded

    recon = _stage2_loop(model, subsets, decoded_first, residual_source, fdl)
    flags = FLAG_STAGE1 if cfg.emit_stage1 else 0
    all_payloads = tuple(payloads) + (tuple(stage1_payloads) if cfg.emit_stage1 else ())
    bs = Bitstream(order.kind, int(cfg.rank), int(cfg.qp), (lf.S, lf.T, lf.H, lf.W), flags, metadata, all_payloads)
    recon_lf = LightField.from_views(recon, lf.S, lf.T)
    report = EncodeReport(
        approximated=LightField.from_views(approx, lf.S, lf.T),
        reconstruction=recon_lf,
        subset_bytes=[len(p) for p in payloads],
        stage1_bytes=[sum(len(p) for p in stage1_payloads[3 * i:3 * i + 3]) for i in range(len(subsets))],
        view_psnr={c: psnr(lf.view(c), recon_lf.view(c)) for c in coords},
        container_bytes=len(bs.to_bytes()),
    )
    return bs, report


def decode(bs, codec=None, fdl_params=None):
    """Reconstruct the light field from a :class:`Bitstream` or its bytes.

    ``codec`` is only needed for external-backend payloads. ``fdl_params``
    must match the encoder's if it used an explicit regularisation weight
    other than the one carried in the metadata (normally not needed).
    """
    if not isinstance(bs, Bitstream):
        bs = Bitstream.from_bytes(bs)
    S, T, H, W = bs.shape
    subsets = [list(s) for s in partition_views(S, bs.scan_order).subsets]
    if len(bs.payloads) != len(subsets) * (4 if bs.emit_stage1 else 1):
        raise PayloadCountMismatch(len(subsets) * (4 if bs.emit_stage1 else 1), len(bs.payloads))
    d, pos, lam, window = parse_metadata(bs.metadata)
    if pos.shape[0] != S * T:
        raise BitstreamError(f"metadata carries {pos.shape[0]} view positions for {S * T} views")
    coords = [ViewCoord(r - (S - 1) // 2, c - (T - 1) // 2) for r in range(S) for c in range(T)]
    positions = {c: (float(p[0]), float(p[1])) for c, p in zip(coords, pos)}
    fdl = fdl_params or FdlFitParams()
    fdl = replace(fdl, lam=lam if lam > 0 else None, fit_window=window, n=d.size)

    payloads = bs.stage2_payloads(len(subsets))
    first = decode_frames(payloads[0], codec)
    _check_frames(first, len(subsets[0]), H, W, 0)
    try:
        model = _fit_first(first, subsets[0], d, positions, fdl)
    except LfhcError as exc:
        raise BitstreamError(f"cannot rebuild the prediction model: {exc}") from None

    def residual_source(i, preds):
        frames = decode_frames(payloads[i], codec)
        _check_frames(frames, len(subsets[i]), H, W, i)
        return frames

    recon = _stage2_loop(model, subsets, first, residual_source, fdl)
    return LightField.from_views(recon, S, T)


def _check_frames(frames, count, H, W, index):
    if len(frames) != count or any(f.shape != (H, W, 3) for f in frames):
        raise BitstreamError(f"payload {index} decoded to the wrong number or size of frames")


# ---------------------------------------------------------------------------
# rate-distortion sweep


def report_rows(lf, recon, bs, subsets, rank, qp, subset_bytes):
    """CSV rows: one per subset plus an ``all`` row, PSNRs against ``lf``."""
    rows = []
    for i, subset in enumerate(subsets):
        ref = np.stack([lf.view(c) for c in subset])
        test = np.stack([recon.view(c) for c in subset])
        py, pu, pv = plane_psnrs(ref, test)
        rows.append(_row(rank, qp, i + 1, subset_bytes[i], py, pu, pv))
    py, pu, pv = plane_psnrs(lf.views, recon.views)
    rows.append(_row(rank, qp, "all", len(bs.to_bytes()), py, pu, pv))
    return rows


def _row(rank, qp, subset, nbytes, py, pu, pv):
    return {
        "rank": int(rank),
        "qp": int(qp),
        "subset": subset,
        "bytes": int(nbytes),
        "psnr_y": py,
        "psnr_u": pu,
        "psnr_v": pv,
        "psnr_yuv": combine_yuv(py, pu, pv),
    }


def rd_sweep(lf, ranks, qps, order, base=None):
    """Encode and decode at every (rank, qp); returns report rows.

    Stage-I layer fits are shared between points. ``base`` supplies every
    other encoder setting.
    """
    ranks = list(ranks)
    qps = list(qps)
    if not ranks or not qps:
        raise ConfigError("rank and qp lists must be non-empty")
    if not isinstance(lf, LightField):
        lf = LightField(lf)
    base = base or EncodeConfig()
    cache = {}
    rows = []
    for rank in ranks:
        for qp in qps:
            cfg = replace(base, scan_order=ScanKind.parse(order), rank=int(rank), qp=int(qp))
            bs, report = encode(lf, cfg, layer_cache=cache)
            recon = decode(Bitstream.from_bytes(bs.to_bytes()), cfg.codec_config)
            subsets = partition_views(lf.S, cfg.scan_order).subsets
            rows += report_rows(lf, recon, bs, subsets, rank, qp, report.subset_bytes)
            logger.info("rank %d qp %d: %d bytes", rank, qp, report.container_bytes)
    return rows
