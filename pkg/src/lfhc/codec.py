"""Intra-only image codec used for layers and prediction residuals.

The baseline backend is an 8x8 block DCT coder: uniform quantisation with an
HEVC-like step ``2 ** ((qp - 4) / 6)`` in 8-bit units, zig-zag scan, zero
run-lengths and a frozen canonical prefix code. ``qp == 0`` switches to a
lossless integer path (left-neighbour DPCM, no transform). The external
backend pipes 8-bit planar YUV 4:4:4 through user-supplied commands.

Payload layout (little-endian)::

    b"LFC1" | u8 backend | u8 qp | u16 frame_count | u16 width | u16 height
    | u8 is_residual | chunks: (u32 length, bytes) per frame

External payloads carry a single chunk holding all frames.
"""

import heapq
import shlex
import struct
import subprocess
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import fft

from .errors import CodecError, ConfigError, DecodeError, EmptyInput, ExternalCodecError, InputError
from .lightfield import rgb_to_yuv, yuv_to_rgb

MAGIC = b"LFC1"
BACKENDS = ("baseline", "external")
_HEADER = struct.Struct("<4sBBHHHB")
_CHUNK = struct.Struct("<I")
BLOCK = 8


@dataclass(frozen=True)
class CodecConfig:
    backend: str = "baseline"
    qp: int = 26
    external_cmd: Optional[str] = None
    external_decode_cmd: Optional[str] = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown codec backend {self.backend!r}")
        if not isinstance(self.qp, (int, np.integer)) or not 0 <= self.qp <= 51:
            raise ConfigError(f"qp must be an integer in [0, 51], got {self.qp!r}")
        external = self.backend == "external"
        if external != (self.external_cmd is not None):
            raise ConfigError("external_cmd is required for, and only for, the external backend")
        if external and self.external_decode_cmd is None:
            raise ConfigError("the external backend needs a decode command as well")

    def with_qp(self, qp):
        return CodecConfig(self.backend, qp, self.external_cmd, self.external_decode_cmd)


@dataclass(frozen=True)
class CodedPayload:
    data: bytes
    frame_count: int
    width: int
    height: int
    is_residual: bool
    backend: str = "baseline"
    qp: int = 0

    def to_bytes(self):
        return self.data

    def __len__(self):
        return len(self.data)

    @classmethod
    def from_bytes(cls, data):
        """Parse and validate the header; chunk contents are checked on decode."""
        data = bytes(data)
        if len(data) < _HEADER.size:
            raise DecodeError("payload shorter than its header", offset=len(data))
        magic, backend, qp, n, w, h, resid = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise DecodeError("bad payload magic", offset=0)
        if backend >= len(BACKENDS):
            raise DecodeError(f"unknown backend id {backend}", offset=4)
        if qp > 51:
            raise DecodeError(f"qp {qp} out of range", offset=5)
        if n == 0 or w == 0 or h == 0:
            raise DecodeError("payload declares an empty frame set", offset=6)
        if resid > 1:
            raise DecodeError(f"bad residual flag {resid}", offset=12)
        chunks = _split_chunks(data, _HEADER.size)
        expected = 1 if backend == 1 else n
        if len(chunks) != expected:
            raise DecodeError(f"expected {expected} frame chunks, found {len(chunks)}", offset=_HEADER.size)
        return cls(data, n, w, h, bool(resid), BACKENDS[backend], qp)

    def chunks(self):
        return _split_chunks(self.data, _HEADER.size)


def _split_chunks(data, pos):
    chunks = []
    while pos < len(data):
        if pos + _CHUNK.size > len(data):
            raise DecodeError("truncated chunk length", offset=pos)
        (length,) = _CHUNK.unpack_from(data, pos)
        start = pos + _CHUNK.size
        if start + length > len(data):
            raise DecodeError(f"chunk of {length} bytes runs past the payload end", offset=pos)
        chunks.append((start, data[start:start + length]))
        pos = start + length
    return chunks


# ---------------------------------------------------------------------------
# frozen prefix code tables


def _huffman_lengths(freqs):
    heap = [(f, i, (i,)) for i, f in enumerate(freqs)]
    heapq.heapify(heap)
    lengths = [0] * len(freqs)
    tie = len(freqs)
    while len(heap) > 1:
        f1, _, s1 = heapq.heappop(heap)
        f2, _, s2 = heapq.heappop(heap)
        for sym in s1 + s2:
            lengths[sym] += 1
        heapq.heappush(heap, (f1 + f2, tie, s1 + s2))
        tie += 1
    return lengths


def _canonical(lengths):
    order = sorted(range(len(lengths)), key=lambda i: (lengths[i], i))
    codes = [0] * len(lengths)
    code = 0
    prev = lengths[order[0]]
    for i in order:
        code <<= lengths[i] - prev
        prev = lengths[i]
        codes[i] = code
        code += 1
    return codes


class PrefixTable:
    def __init__(self, freqs):
        self.lengths = np.array(_huffman_lengths(freqs), dtype=np.int64)
        self.codes = np.array(_canonical(list(self.lengths)), dtype=np.int64)
        self.max_len = int(self.lengths.max())
        if self.max_len > 16:
            raise CodecError("prefix table exceeds 16-bit codes")
        # peek table: next max_len bits -> (symbol, length)
        size = 1 << self.max_len
        sym_of = [-1] * size
        len_of = [0] * size
        for sym, (code, ln) in enumerate(zip(self.codes.tolist(), self.lengths.tolist())):
            lo = code << (self.max_len - ln)
            hi = (code + 1) << (self.max_len - ln)
            sym_of[lo:hi] = [sym] * (hi - lo)
            len_of[lo:hi] = [ln] * (hi - lo)
        self.peek_symbol = sym_of
        self.peek_length = len_of


MAX_SIZE = 16
EOB = 256
ZRL = 257


def _dc_freqs():
    return [1 << max(2, 12 - 2 * abs(s - 4)) for s in range(MAX_SIZE + 1)]


def _ac_freqs():
    freqs = []
    for run in range(16):
        for size in range(1, MAX_SIZE + 1):
            freqs.append(1 << max(4, 18 - run - 2 * abs(size - 2)))
    freqs.append(1 << 18)  # EOB
    freqs.append(1 << 8)  # ZRL
    return freqs


DC_TABLE = PrefixTable(_dc_freqs())
AC_TABLE = PrefixTable(_ac_freqs())


def _zigzag_order(n=BLOCK):
    idx = sorted(
        ((r, c) for r in range(n) for c in range(n)),
        key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else rc[1]),
    )
    return np.array([r * n + c for r, c in idx])


ZIGZAG = _zigzag_order()
UNZIGZAG = np.argsort(ZIGZAG)


# ---------------------------------------------------------------------------
# block entropy coding


def _size_category(v):
    # frexp exponent of an integer magnitude is its bit length (0 for 0)
    return np.frexp(np.abs(v).astype(np.float64))[1].astype(np.int64)


def _extra_bits(v, size):
    # JPEG style: negative values stored as v - 1 in `size` bits (ones' complement)
    v = v.astype(np.int64)
    return np.where(v >= 0, v, v + (1 << size) - 1)


def encode_blocks(coeffs):
    """Entropy-code an (nblocks, 64) integer array in zig-zag order to a bit array."""
    nb = coeffs.shape[0]
    coeffs = coeffs.astype(np.int64)
    if nb == 0:
        return np.zeros(0, dtype=np.uint8)
    if np.abs(coeffs).max() >= 1 << MAX_SIZE:
        raise CodecError("coefficient magnitude exceeds the code range")
    dc = coeffs[:, 0]
    dc_diff = np.diff(dc, prepend=0)
    if np.abs(dc_diff).max() >= 1 << MAX_SIZE:
        raise CodecError("DC difference exceeds the code range")
    dc_size = _size_category(dc_diff)
    dc_val = (DC_TABLE.codes[dc_size] << dc_size) | _extra_bits(dc_diff, dc_size)
    dc_len = DC_TABLE.lengths[dc_size] + dc_size

    ac = coeffs[:, 1:]
    bi, pi = np.nonzero(ac)
    pos = pi + 1
    new_block = np.ones(len(bi), dtype=bool)
    new_block[1:] = bi[1:] != bi[:-1]
    prev = np.where(new_block, 0, np.concatenate([[0], pos[:-1]]))
    run = pos - prev - 1
    zrl = run // 16
    run = run % 16
    vals = ac[bi, pi]
    size = _size_category(vals)
    sym = run * MAX_SIZE + (size - 1)
    ac_val = (AC_TABLE.codes[sym] << size) | _extra_bits(vals, size)
    ac_len = AC_TABLE.lengths[sym] + size

    # event keys: (block, position, sub) with ZRLs before their coefficient
    keys = [bi * 1000 + pos * 10 + 4]
    values = [ac_val]
    lengths = [ac_len]
    for j in range(int(zrl.max(initial=0))):
        sel = zrl > j
        keys.append(bi[sel] * 1000 + pos[sel] * 10 + j)
        values.append(np.full(sel.sum(), AC_TABLE.codes[ZRL]))
        lengths.append(np.full(sel.sum(), AC_TABLE.lengths[ZRL]))
    blocks = np.arange(nb)
    keys += [blocks * 1000, blocks * 1000 + 999]
    values += [dc_val, np.full(nb, AC_TABLE.codes[EOB])]
    lengths += [dc_len, np.full(nb, AC_TABLE.lengths[EOB])]
    keys = np.concatenate(keys)
    order = np.argsort(keys, kind="stable")
    values = np.concatenate(values)[order].astype(np.uint64)
    lengths = np.concatenate(lengths)[order]
    return _pack_bits(values, lengths)


def _pack_bits(values, lengths, width=32):
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bits = ((values[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    mask = np.arange(width)[None, :] >= (width - lengths)[:, None]
    return bits[mask]


class _BitReader:
    def __init__(self, data, base_offset=0):
        self.bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8)).tobytes().translate(
            bytes.maketrans(b"\x00\x01", b"01")
        ).decode("ascii")
        self.pos = 0
        self.nbits = len(self.bits)
        self.base = base_offset

    def error(self, message):
        return DecodeError(message, offset=self.base + self.pos // 8)

    def symbol(self, table):
        peek = self.bits[self.pos:self.pos + table.max_len]
        if len(peek) < table.max_len:
            peek = peek.ljust(table.max_len, "0")
        idx = int(peek, 2)
        ln = table.peek_length[idx]
        if ln == 0 or self.pos + ln > self.nbits:
            raise self.error("truncated or invalid prefix code")
        self.pos += ln
        return table.peek_symbol[idx]

    def value(self, size):
        if size == 0:
            return 0
        if self.pos + size > self.nbits:
            raise self.error("truncated value bits")
        raw = int(self.bits[self.pos:self.pos + size], 2)
        self.pos += size
        if raw < 1 << (size - 1):
            raw -= (1 << size) - 1
        return raw


def decode_blocks(reader, nblocks):
    out = np.zeros((nblocks, 64), dtype=np.int64)
    dc = 0
    for b in range(nblocks):
        size = reader.symbol(DC_TABLE)
        dc += reader.value(size)
        out[b, 0] = dc
        k = 1
        row = out[b]
        while True:
            sym = reader.symbol(AC_TABLE)
            if sym == EOB:
                break
            if sym == ZRL:
                k += 16
                if k > 63:
                    raise reader.error("zero run past the end of a block")
                continue
            run, size = divmod(sym, MAX_SIZE)
            k += run
            if k > 63:
                raise reader.error("coefficient index past the end of a block")
            row[k] = reader.value(size + 1)
            k += 1
    return out


# ---------------------------------------------------------------------------
# baseline transform path


def quant_step(qp):
    return 2.0 ** ((qp - 4) / 6.0)


def _to_blocks(plane):
    h, w = plane.shape
    return plane.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2).reshape(-1, BLOCK * BLOCK)


def _from_blocks(blocks, h, w):
    return blocks.reshape(h // BLOCK, w // BLOCK, BLOCK, BLOCK).swapaxes(1, 2).reshape(h, w)


def _padded_shape(h, w):
    return -(-h // BLOCK) * BLOCK, -(-w // BLOCK) * BLOCK


def _dpcm_forward(plane):
    p = plane.astype(np.int64)
    pred = np.empty_like(p)
    pred[:, 1:] = p[:, :-1]
    pred[1:, 0] = p[:-1, 0]
    pred[0, 0] = 128
    return p - pred


def _dpcm_inverse(resid):
    first = np.cumsum(resid[:, 0]) + 128
    out = np.cumsum(resid, axis=1)
    out += (first - resid[:, 0])[:, None]
    return out


def _quantise_plane(plane, qp):
    """Integer symbols (zig-zag ordered blocks) for one padded 8-bit plane."""
    if qp == 0:
        sym = _to_blocks(_dpcm_forward(plane))
    else:
        blocks = _to_blocks(plane.astype(np.float64) - 128.0).reshape(-1, BLOCK, BLOCK)
        coef = fft.dctn(blocks, type=2, axes=(1, 2), norm="ortho").reshape(-1, 64)
        sym = np.rint(coef / quant_step(qp)).astype(np.int64)
    return sym[:, ZIGZAG]


def _reconstruct_plane(sym, qp, hp, wp):
    sym = sym[:, UNZIGZAG]
    if qp == 0:
        return np.clip(_dpcm_inverse(_from_blocks(sym, hp, wp)), 0, 255).astype(np.uint8)
    coef = (sym * quant_step(qp)).reshape(-1, BLOCK, BLOCK)
    pix = fft.idctn(coef, type=2, axes=(1, 2), norm="ortho").reshape(-1, 64) + 128.0
    return np.clip(np.rint(_from_blocks(pix, hp, wp)), 0, 255).astype(np.uint8)


def _frame_to_u8(frame, is_residual):
    f = np.asarray(frame, dtype=np.float64)
    if is_residual:
        f = (np.clip(f, -1.0, 1.0) + 1.0) / 2.0
    return np.clip(np.rint(f * 255.0), 0, 255).astype(np.uint8)


def _u8_to_frame(u8, is_residual):
    f = u8.astype(np.float64) / 255.0
    if is_residual:
        return 2.0 * f - 1.0
    return f


def _encode_baseline_frame(u8, qp):
    h, w, _ = u8.shape
    hp, wp = _padded_shape(h, w)
    padded = np.pad(u8, ((0, hp - h), (0, wp - w), (0, 0)), mode="edge")
    bits = []
    recon = np.empty((hp, wp, 3), dtype=np.uint8)
    for ch in range(3):
        sym = _quantise_plane(padded[:, :, ch], qp)
        bits.append(encode_blocks(sym))
        recon[:, :, ch] = _reconstruct_plane(sym, qp, hp, wp)
    return np.packbits(np.concatenate(bits)).tobytes(), recon[:h, :w]


def _decode_baseline_frame(chunk, offset, qp, h, w):
    hp, wp = _padded_shape(h, w)
    nblocks = (hp // BLOCK) * (wp // BLOCK)
    # every block needs at least a DC code and an EOB code
    if 2 * 3 * nblocks > 8 * len(chunk):
        raise DecodeError(f"frame chunk too short for {w}x{h}", offset=offset)
    reader = _BitReader(chunk, offset)
    out = np.empty((h, w, 3), dtype=np.uint8)
    for ch in range(3):
        sym = decode_blocks(reader, nblocks)
        if qp == 0 and np.abs(sym).max(initial=0) > 510:
            raise reader.error("lossless residual out of range")
        if qp > 0 and np.abs(sym).max(initial=0) * quant_step(qp) > 1e5:
            raise reader.error("coefficient out of range")
        out[:, :, ch] = _reconstruct_plane(sym, qp, hp, wp)[:h, :w]
    return out


# ---------------------------------------------------------------------------
# external bridge


def _run(cmd_template, cfg, w, h, n, data):
    cmd = cmd_template.format(w=w, h=h, n=n, qp=cfg.qp)
    try:
        proc = subprocess.run(shlex.split(cmd), input=data, capture_output=True, check=False)
    except OSError as exc:
        raise ExternalCodecError(f"cannot run {cmd!r}: {exc}") from exc
    if proc.returncode != 0:
        raise ExternalCodecError(
            f"{cmd!r} exited with status {proc.returncode}: {proc.stderr[-500:].decode(errors='replace')}"
        )
    return proc.stdout


def _planar_yuv(u8_frames):
    raw = []
    for f in u8_frames:
        yuv = np.clip(np.rint(rgb_to_yuv(f / 255.0) * 255.0), 0, 255).astype(np.uint8)
        raw.append(np.ascontiguousarray(yuv.transpose(2, 0, 1)).tobytes())
    return b"".join(raw)


def _from_planar_yuv(raw, n, w, h):
    planes = np.frombuffer(raw, dtype=np.uint8).reshape(n, 3, h, w).transpose(0, 2, 3, 1)
    rgb = yuv_to_rgb(planes / 255.0)
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# public API


def _check_frames(frames):
    frames = list(frames)
    if not frames:
        raise EmptyInput("no frames to encode")
    arrs = [np.asarray(f, dtype=np.float64) for f in frames]
    shape = arrs[0].shape
    if len(shape) != 3 or shape[2] != 3:
        raise InputError(f"frames must have shape (H, W, 3), got {shape}")
    for a in arrs:
        if a.shape != shape:
            raise InputError("frames must share one size")
        if not np.all(np.isfinite(a)):
            raise InputError("frames contain non-finite samples")
    if shape[0] > 0xFFFF or shape[1] > 0xFFFF or len(arrs) > 0xFFFF:
        raise InputError("frame size or count exceeds the payload format")
    return arrs


def encode_frames_with_recon(frames, cfg, is_residual=False):
    """Encode and also return the decoder's reconstruction (encoder-side loop)."""
    arrs = _check_frames(frames)
    h, w = arrs[0].shape[:2]
    u8 = [_frame_to_u8(f, is_residual) for f in arrs]
    header = _HEADER.pack(MAGIC, BACKENDS.index(cfg.backend), cfg.qp, len(u8), w, h, int(is_residual))
    parts = [header]
    if cfg.backend == "baseline":
        recon = []
        for f in u8:
            chunk, rec = _encode_baseline_frame(f, cfg.qp)
            parts += [_CHUNK.pack(len(chunk)), chunk]
            recon.append(_u8_to_frame(rec, is_residual))
        payload = CodedPayload(b"".join(parts), len(u8), w, h, is_residual, cfg.backend, cfg.qp)
        return payload, recon
    coded = _run(cfg.external_cmd, cfg, w, h, len(u8), _planar_yuv(u8))
    parts += [_CHUNK.pack(len(coded)), coded]
    payload = CodedPayload(b"".join(parts), len(u8), w, h, is_residual, cfg.backend, cfg.qp)
    return payload, decode_frames(payload, cfg)


def encode_frames(frames, cfg, is_residual=False):
    """Encode RGB frames (or residuals in [-1, 1] when ``is_residual``)."""
    return encode_frames_with_recon(frames, cfg, is_residual)[0]


def decode_frames(payload, cfg=None):
    """Decode a payload into a list of frames.

    Image payloads decode to [0, 1]; residual payloads to [-1, 1].
    """
    if not isinstance(payload, CodedPayload):
        payload = CodedPayload.from_bytes(payload)
    else:
        payload = CodedPayload.from_bytes(payload.data)
    n, w, h = payload.frame_count, payload.width, payload.height
    chunks = payload.chunks()
    if payload.backend == "baseline":
        frames = []
        for offset, chunk in chunks:
            frames.append(_u8_to_frame(_decode_baseline_frame(chunk, offset, payload.qp, h, w), payload.is_residual))
        return frames
    if cfg is None or cfg.backend != "external":
        raise CodecError("external payload needs an external codec configuration to decode")
    offset, chunk = chunks[0]
    raw = _run(cfg.external_decode_cmd, cfg.with_qp(payload.qp), w, h, n, chunk)
    if len(raw) != n * 3 * w * h:
        raise DecodeError(f"external decoder returned {len(raw)} bytes, expected {n * 3 * w * h}", offset=offset)
    return [_u8_to_frame(f, payload.is_residual) for f in _from_planar_yuv(raw, n, w, h)]
