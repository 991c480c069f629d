"""Command-line interface: ``lfhc encode | decode | sweep | metrics | gen``."""

import argparse
import logging
import os
import re
import sys
from dataclasses import replace

from .codec import CodecConfig
from .errors import LfhcError
from .fixtures import SyntheticSceneSpec, generate
from .layers import LayerOptOptions
from .lightfield import crop_inner_grid, load_lightfield, save_lightfield
from .metrics import combine_yuv, plane_psnrs, write_report_csv
from .pipeline import Bitstream, EncodeConfig, decode, encode, rd_sweep

_VIEW_RE = re.compile(r"^view_(\d+)_(\d+)\.png$")


def _grid_shape(directory):
    rows = cols = 0
    try:
        names = os.listdir(directory)
    except OSError as exc:
        raise LfhcError(f"cannot list {directory}: {exc}") from None
    for name in names:
        m = _VIEW_RE.match(name)
        if m:
            rows = max(rows, int(m.group(1)) + 1)
            cols = max(cols, int(m.group(2)) + 1)
    if not rows:
        raise LfhcError(f"no view_RR_CC.png files in {directory}")
    return rows, cols


def _load(directory, grid=None):
    lf = load_lightfield(directory, *_grid_shape(directory))
    if grid and (lf.S != grid or lf.T != grid):
        lf = crop_inner_grid(lf, grid)
    return lf


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _codec(args):
    if args.codec == "external":
        if not args.codec_cmd or not args.codec_decode_cmd:
            raise LfhcError("--codec external needs --codec-cmd and --codec-decode-cmd")
        return CodecConfig("external", 26, args.codec_cmd, args.codec_decode_cmd)
    return CodecConfig()


def _add_codec_args(p):
    p.add_argument("--codec", choices=("baseline", "external"), default="baseline")
    p.add_argument("--codec-cmd", help="encode command template ({w} {h} {n} {qp})")
    p.add_argument("--codec-decode-cmd", help="decode command template ({w} {h} {n} {qp})")


def _add_encoder_args(p):
    p.add_argument("--in", dest="src", required=True, help="directory of view_RR_CC.png files")
    p.add_argument("--order", default="c2", choices=("c2", "c4", "h2", "h4"))
    p.add_argument("--grid", type=int, default=None, help="crop to the centred N x N views")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layer-iters", type=int, default=2000, help="layer optimiser iteration cap")
    _add_codec_args(p)


def _config(args, rank, qp):
    return EncodeConfig(
        scan_order=args.order,
        rank=rank,
        qp=qp,
        layer_opts=LayerOptOptions(max_iters=args.layer_iters),
        codec=_codec(args),
        emit_stage1=getattr(args, "emit_stage1", False),
        seed=args.seed,
    )


def cmd_encode(args):
    lf = _load(args.src, args.grid)
    bs, report = encode(lf, _config(args, args.rank, args.qp))
    data = bs.to_bytes()
    with open(args.out, "wb") as fh:
        fh.write(data)
    py, pu, pv = plane_psnrs(lf.views, report.reconstruction.views)
    print(f"wrote {len(data)} bytes to {args.out}")
    print("subset bytes: " + " ".join(str(b) for b in report.subset_bytes))
    print(f"YUV-PSNR {combine_yuv(py, pu, pv):.3f} dB (Y {py:.3f}, U {pu:.3f}, V {pv:.3f})")
    return 0


def cmd_decode(args):
    with open(args.src, "rb") as fh:
        data = fh.read()
    lf = decode(Bitstream.from_bytes(data), _codec(args) if args.codec == "external" else None)
    save_lightfield(lf, args.out)
    print(f"decoded {lf.S}x{lf.T} views of {lf.W}x{lf.H} into {args.out}")
    return 0


def cmd_sweep(args):
    lf = _load(args.src, args.grid)
    base = _config(args, 1, 0)
    rows = rd_sweep(lf, args.ranks, args.qps, args.order, base=replace(base))
    if args.csv:
        write_report_csv(rows, args.csv)
    for row in rows:
        if row["subset"] == "all":
            print(f"rank {row['rank']:3d} qp {row['qp']:2d}: {row['bytes']:8d} bytes  {row['psnr_yuv']:.3f} dB")
    return 0


def cmd_metrics(args):
    ref = _load(args.ref)
    test = _load(args.test)
    if ref.shape != test.shape:
        raise LfhcError(f"light fields differ in shape: {ref.shape} vs {test.shape}")
    py, pu, pv = plane_psnrs(ref.views, test.views)
    print(f"PSNR Y {py:.3f} U {pu:.3f} V {pv:.3f} dB")
    print(f"YUV-PSNR {combine_yuv(py, pu, pv):.3f} dB")
    return 0


def cmd_gen(args):
    spec = SyntheticSceneSpec.parse(args.spec, rng_seed=args.seed)
    lf = generate(spec, args.rows, args.cols, args.height, args.width)
    save_lightfield(lf, args.out)
    print(f"wrote {args.rows}x{args.cols} views to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lfhc", description="Hierarchical light field coder")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a view directory into a container")
    _add_encoder_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--rank", type=int, default=16)
    p.add_argument("--qp", type=int, default=26)
    p.add_argument("--emit-stage1", action="store_true", help="also store the coded layers")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a container into a view directory")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", required=True)
    _add_codec_args(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="rate-distortion sweep over ranks and qps")
    _add_encoder_args(p)
    p.add_argument("--ranks", type=_int_list, default=[4, 8, 16, 28, 44, 52, 60])
    p.add_argument("--qps", type=_int_list, default=[2, 6, 10, 14, 20, 26, 38])
    p.add_argument("--csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="PSNR between two view directories")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("gen", help="write a synthetic light field")
    p.add_argument("--spec", required=True, help="e.g. two-plane:d1=0,d2=2,texture=fractal")
    p.add_argument("--out", required=True)
    p.add_argument("--rows", type=int, default=9)
    p.add_argument("--cols", type=int, default=9)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except LfhcError as exc:
        print(f"lfhc: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"lfhc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
