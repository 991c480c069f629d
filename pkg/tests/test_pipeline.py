import shlex
import sys
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfhc.codec import CodecConfig, decode_frames
from lfhc.errors import BitstreamError, ConfigError, LfhcError, PayloadCountMismatch
from lfhc.fdl import FdlFitParams, parse_metadata
from lfhc.fixtures import SyntheticSceneSpec, generate
from lfhc.layers import LayerOptOptions, LayerStack, reconstruct_subset
from lfhc.lightfield import LightField
from lfhc.metrics import REPORT_COLUMNS
from lfhc.pipeline import Bitstream, EncodeConfig, decode, encode, rd_sweep
from lfhc.scan import ScanKind, partition_views

FAST = dict(layer_opts=LayerOptOptions(max_iters=60), fdl_params=FdlFitParams(n=4, calib_iters=2))


def _cfg(order="c2", rank=8, qp=20, **kw):
    return EncodeConfig(order, rank=rank, qp=qp, **{**FAST, **kw})


@pytest.fixture(scope="module")
def encoded(small_two_plane_mod):
    return encode(small_two_plane_mod, _cfg(emit_stage1=True))


@pytest.fixture(scope="module")
def small_two_plane_mod():
    return generate(SyntheticSceneSpec("two-plane", {"d1": 0, "d2": 1}, texture="fractal"), 5, 5, 16, 16)


@pytest.fixture(scope="module")
def grid9():
    return generate(SyntheticSceneSpec("two-plane", {"d1": 0, "d2": 1}, texture="fractal"), 9, 9, 8, 8)


@pytest.mark.parametrize("order", ["c2", "c4", "h2", "h4"])
def test_parity_all_orders(grid9, order):
    bs, report = encode(grid9, _cfg(order, rank=8))
    out = decode(bs.to_bytes())
    np.testing.assert_array_equal(out.views, report.reconstruction.views)


def test_parity_with_stage1(encoded):
    bs, report = encoded
    assert bs.emit_stage1
    np.testing.assert_array_equal(decode(bs.to_bytes()).views, report.reconstruction.views)


def test_c2_groups_on_9x9(grid9):
    bs, report = encode(grid9, _cfg("c2", rank=8))
    assert [p.frame_count for p in bs.payloads] == [24, 57]
    assert [p.is_residual for p in bs.payloads] == [False, True]
    np.testing.assert_array_equal(decode(bs.to_bytes()).views, report.reconstruction.views)


def test_h4_groups_on_9x9(grid9):
    bs, _ = encode(grid9, _cfg("h4", rank=8))
    assert [p.frame_count for p in bs.payloads] == [4, 5, 16, 56]
    subsets = partition_views(9, "h4").subsets
    assert [len(s) for s in subsets] == [4, 5, 16, 56]


def test_qp0_full_rank_is_near_lossless():
    lf = generate(SyntheticSceneSpec("from-layer-stack", {}), 5, 5, 16, 16)
    # full rank for 16x16 views padded by 2 on each side: min(3*20, 20)
    cfg = EncodeConfig("c2", rank=20, qp=0, layer_opts=LayerOptOptions(max_iters=200),
                       fdl_params=FdlFitParams(n=4, calib_iters=3))
    bs, report = encode(lf, cfg)
    out = decode(bs.to_bytes())
    for c in lf.coords():
        err = np.mean((out.view(c) - lf.view(c)) ** 2)
        assert 10 * np.log10(1 / err) >= 50.0


def test_byte_accounting(encoded):
    bs, report = encoded
    subsets = partition_views(5, "c2").subsets
    assert all(b > 0 for b in report.subset_bytes)
    assert report.subset_bytes == [len(p) for p in bs.payloads[: len(subsets)]]
    assert report.total_bytes == sum(report.subset_bytes)
    assert len(report.stage1_bytes) == len(subsets)
    assert sum(report.stage1_bytes) == sum(len(p) for p in bs.payloads[len(subsets):])
    overhead = 19 + 4 + len(bs.metadata) + 4 + 4 * len(bs.payloads)
    assert report.container_bytes == overhead + sum(len(p) for p in bs.payloads)
    assert report.container_bytes == len(bs.to_bytes())


def test_report_contents(encoded, small_two_plane_mod):
    _, report = encoded
    assert set(report.view_psnr) == set(small_two_plane_mod.coords())
    assert report.approximated.shape == small_two_plane_mod.shape
    assert np.all(report.reconstruction.views >= 0) and np.all(report.reconstruction.views <= 1)


def test_stage2_uses_decoded_layers(encoded):
    bs, report = encoded
    subsets = partition_views(5, "c2").subsets
    stage1 = bs.stage1_payloads(len(subsets))
    for i, subset in enumerate(subsets):
        layers = np.stack([decode_frames(p)[0] for p in stage1[3 * i:3 * i + 3]])
        pad = max(max(abs(s), abs(t)) for s, t in subset)
        views = reconstruct_subset(LayerStack(layers, pad), subset)
        for c, v in zip(subset, views):
            np.testing.assert_array_equal(np.clip(v, 0, 1), report.approximated.view(c))


def test_metadata_covers_all_views(encoded):
    bs, _ = encoded
    d, pos, lam, window = parse_metadata(bs.metadata)
    assert d.size == 4
    assert pos.shape == (25, 2)
    assert lam == 0.0


def test_bitstream_round_trip(encoded):
    bs, _ = encoded
    again = Bitstream.from_bytes(bs.to_bytes())
    assert again.to_bytes() == bs.to_bytes()
    assert (again.scan_order, again.rank, again.qp, again.shape) == (ScanKind.C2, 8, 20, (5, 5, 16, 16))


def test_missing_payload(encoded):
    bs, _ = encoded
    short = replace(bs, payloads=bs.payloads[:-1])
    with pytest.raises(PayloadCountMismatch):
        Bitstream.from_bytes(short.to_bytes())
    with pytest.raises(PayloadCountMismatch):
        decode(short)


def test_wrong_payload_order(encoded):
    bs, _ = encoded
    swapped = replace(bs, payloads=(bs.payloads[1], bs.payloads[0]) + bs.payloads[2:])
    with pytest.raises(BitstreamError):
        Bitstream.from_bytes(swapped.to_bytes())


def test_truncated_container(encoded):
    data = encoded[0].to_bytes()
    for cut in (0, 5, 19, 30, len(data) // 2, len(data) - 1):
        with pytest.raises(BitstreamError) as info:
            Bitstream.from_bytes(data[:cut])
        assert info.value.offset is None or 0 <= info.value.offset <= len(data)
    with pytest.raises(BitstreamError):
        Bitstream.from_bytes(data + b"\0")


@given(st.integers(0, 10**6), st.integers(0, 255))
@settings(max_examples=150, deadline=None)
def test_corrupt_container_is_a_structured_error(encoded, pos, value):
    data = bytearray(encoded[0].to_bytes())
    data[pos % len(data)] = value
    try:
        out = decode(bytes(data))
    except LfhcError:
        return
    assert out.shape == (5, 5, 16, 16, 3)
    assert np.all(np.isfinite(out.views))


@pytest.mark.parametrize("rank", [0, 21])
def test_rank_validation(small_two_plane_mod, rank):
    with pytest.raises(ConfigError):
        encode(small_two_plane_mod, _cfg(rank=rank))


def test_config_validation():
    with pytest.raises(ConfigError):
        EncodeConfig(qp=60)
    with pytest.raises(LfhcError):
        EncodeConfig(scan_order="x9")
    assert EncodeConfig(scan_order="h4").scan_order is ScanKind.H4


def test_non_square_grid():
    lf = LightField(np.full((3, 5, 8, 8, 3), 0.5))
    with pytest.raises(ConfigError):
        encode(lf, _cfg())


def test_deterministic(small_two_plane_mod):
    a, _ = encode(small_two_plane_mod, _cfg("h2"))
    b, _ = encode(small_two_plane_mod, _cfg("h2"))
    assert a.to_bytes() == b.to_bytes()


def test_external_codec(small_two_plane_mod):
    copy = f"{shlex.quote(sys.executable)} -c " + shlex.quote(
        "import sys; sys.stdout.buffer.write(sys.stdin.buffer.read())"
    )
    codec = CodecConfig("external", 20, copy, copy)
    bs, report = encode(small_two_plane_mod, _cfg(codec=codec))
    assert all(p.backend == "external" for p in bs.payloads)
    np.testing.assert_array_equal(decode(bs.to_bytes(), codec).views, report.reconstruction.views)


def test_rd_sweep_single_point(small_two_plane_mod):
    rows = rd_sweep(small_two_plane_mod, [8], [20], "c2", base=_cfg())
    assert [r["subset"] for r in rows] == [1, 2, "all"]
    assert all(set(r) == set(REPORT_COLUMNS) for r in rows)
    bs, report = encode(small_two_plane_mod, _cfg())
    assert rows[-1]["bytes"] == len(bs.to_bytes())
    assert [r["bytes"] for r in rows[:2]] == report.subset_bytes


def test_rd_sweep_rate_trend(small_two_plane_mod):
    rows = rd_sweep(small_two_plane_mod, [4, 16], [2, 14, 38], "c2", base=_cfg())
    total = {(r["rank"], r["qp"]): r for r in rows if r["subset"] == "all"}
    for rank in (4, 16):
        sizes = [total[(rank, q)]["bytes"] for q in (2, 14, 38)]
        assert sizes == sorted(sizes, reverse=True)
    assert total[(16, 2)]["psnr_yuv"] >= total[(4, 38)]["psnr_yuv"]


def test_rd_sweep_needs_axes(small_two_plane_mod):
    with pytest.raises(ConfigError):
        rd_sweep(small_two_plane_mod, [], [2], "c2")
