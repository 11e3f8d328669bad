"""Command-line front end: flowloss <encode|decode|stabilize|viz-norm|loss|gradcheck>."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import (
    FeatureMap,
    FlowField,
    LossParams,
    SaliencyMap,
    decode_tiff,
    dequantize,
    encode_tiff,
    finite_diff_check,
    flow_loss,
    flow_loss_grad,
    flow_norm_map,
    pack,
    quantize,
    read_flo,
    read_tensor,
    stabilize,
    unpack,
    write_flo,
)
from .errors import DimMismatch, FlowlossError
from .quantization import DEFAULT_SCALE


def _threads_cap() -> int:
    """FLOWLOSS_THREADS caps internal parallelism; evaluation is sequential
    either way, so results are identical for any value."""
    raw = os.environ.get("FLOWLOSS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _fmt(x: float) -> str:
    """Serialize a real with 17 significant digits (round-trips float64)."""
    s = format(float(x), ".17g")
    return s


def _report_json(report, params: LossParams) -> str:
    lines = ['{']
    lines.append(f'  "total": {_fmt(report.total)},')
    lines.append('  "patches": [')
    entries = []
    for p in range(len(report.per_patch)):
        r, c = report.windows[p]
        entries.append(
            '    {'
            f'"index": {p}, "origin": [{r}, {c}], '
            f'"weight": {_fmt(report.weights[p])}, '
            f'"loss": {_fmt(report.per_patch[p])}, '
            f'"salient_index": {int(report.salient[p])}'
            '}'
        )
    lines.append(",\n".join(entries))
    lines.append('  ],')
    lines.append(
        '  "params": {'
        f'"k": {params.patch_size}, "stride": {params.stride}, '
        f'"tau": {_fmt(params.tau)}, "sigma": {_fmt(params.sigma)}, '
        f'"eps": {_fmt(params.eps)}'
        '}'
    )
    lines.append('}')
    return "\n".join(lines) + "\n"


def _load_flow(path: str) -> FlowField:
    return read_flo(Path(path).read_bytes())


def _params_from(args) -> LossParams:
    return LossParams(patch_size=args.k, stride=args.stride, tau=args.tau,
                      sigma=args.sigma, eps=args.eps)


def cmd_encode(args) -> int:
    raw = Path(args.flo).read_bytes()
    flow = read_flo(raw)
    tiff = encode_tiff(pack(quantize(flow, args.scale)), args.scale)
    Path(args.tiff).write_bytes(tiff)
    ratio = len(raw) / len(tiff)
    print(f"original {len(raw)} bytes")
    print(f"compressed {len(tiff)} bytes")
    print(f"ratio {ratio:.2f}")
    return 0


def cmd_decode(args) -> int:
    packed, scale = decode_tiff(Path(args.tiff).read_bytes())
    flow = dequantize(unpack(packed, scale))
    Path(args.flo).write_bytes(write_flo(flow))
    return 0


def cmd_stabilize(args) -> int:
    flow = _load_flow(args.input)
    Path(args.output).write_bytes(write_flo(stabilize(flow, args.eps)))
    return 0


def cmd_viz_norm(args) -> int:
    flow = _load_flow(args.input)
    if args.stabilized:
        flow = stabilize(flow, args.eps)
    norms = flow_norm_map(flow).values
    peak = norms.max()
    if peak < args.eps:
        img = np.zeros(norms.shape, dtype=np.uint8)
    else:
        img = np.round(255.0 * norms / peak).astype(np.uint8)
    header = f"P5\n{norms.shape[1]} {norms.shape[0]}\n255\n".encode("ascii")
    Path(args.output).write_bytes(header + img.tobytes())
    return 0


def _load_inputs(args):
    feat = FeatureMap(read_tensor(Path(args.features).read_bytes()))
    flow = stabilize(_load_flow(args.flow), args.eps)
    saliency = None
    if args.saliency:
        saliency = SaliencyMap(read_tensor(Path(args.saliency).read_bytes()))
    return feat, flow, saliency


def cmd_loss(args) -> int:
    feat, flow, saliency = _load_inputs(args)
    report = flow_loss(feat, flow, saliency, _params_from(args))
    text = _report_json(report, _params_from(args))
    if args.json:
        Path(args.json).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gradcheck(args) -> int:
    feat, flow, saliency = _load_inputs(args)
    params = _params_from(args)
    grad = None
    if os.environ.get("FLOWLOSS_CORRUPT_GRAD"):
        # test hook: perturb the analytic gradient so the detector must trip
        _, grad = flow_loss_grad(feat, flow, saliency, params)
        grad = grad + 1.0
    rng = np.random.default_rng(args.seed)
    report = finite_diff_check(feat, flow, saliency, params, step=args.step,
                               samples=args.samples, rng=rng, analytic_grad=grad)
    print(f"checked {report['checked']}")
    print(f"max_rel_error {_fmt(report['max_rel_error'])}")
    print(f"mean_rel_error {_fmt(report['mean_rel_error'])}")
    return 0 if report["max_rel_error"] < 1e-5 else 1


def _add_loss_flags(p):
    p.add_argument("--k", type=int, default=3, help="patch size (default 3)")
    p.add_argument("--stride", type=int, default=3, help="window stride (default 3)")
    p.add_argument("--tau", type=float, default=0.1, help="softmax temperature (default 0.1)")
    p.add_argument("--sigma", type=float, default=0.7, help="RBF radius (default 0.7)")
    p.add_argument("--eps", type=float, default=1e-12, help="degeneracy guard")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowloss",
                                     description="Motion-guided objectness loss toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress a .flo file into a packed-flow TIFF")
    p.add_argument("flo")
    p.add_argument("tiff")
    p.add_argument("--scale", type=int, default=DEFAULT_SCALE,
                   help="quantization steps per pixel-unit (default 64)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="expand a packed-flow TIFF back to .flo")
    p.add_argument("tiff")
    p.add_argument("flo")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("stabilize", help="remove background motion and normalize to [-1, 1]")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--eps", type=float, default=1e-12)
    p.set_defaults(func=cmd_stabilize)

    p = sub.add_parser("viz-norm", help="write the flow-norm map as a P5 PGM")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--stabilized", action="store_true",
                   help="apply background motion removal first")
    p.add_argument("--eps", type=float, default=1e-12)
    p.set_defaults(func=cmd_viz_norm)

    p = sub.add_parser("loss", help="compute the motion-guided loss report")
    p.add_argument("--features", required=True, help="feature tensor file (C, H, W)")
    p.add_argument("--flow", required=True, help=".flo flow file")
    p.add_argument("--saliency", help="optional saliency tensor file (H, W)")
    p.add_argument("--json", help="write the report here instead of stdout")
    _add_loss_flags(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytic gradient")
    p.add_argument("--features", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--saliency")
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--samples", type=int, default=None,
                   help="check a random coordinate subset instead of all")
    p.add_argument("--seed", type=int, default=0)
    _add_loss_flags(p)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    _threads_cap()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FlowlossError, OSError) as e:
        print(f"flowloss: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
