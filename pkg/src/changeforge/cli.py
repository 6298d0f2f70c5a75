"""Command-line surface: generate / encode / decode / eval / distance /
inspect / loss.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import metrics, synthgen, tensorio
from .codec import CodecConfig, TargetMaps, decode_maps, encode_targets
from .imageops import BoundsError, EmptyChangeError, ParameterError
from .losses import LossConfig, total_loss
from .metrics import EvaluationError
from .shapes import RasterizationError, SamplingError
from .synthgen import GenerationError, ManifestError
from .tensorio import TensorFormatError

log = logging.getLogger(__name__)

DATA_ERRORS = (
    GenerationError,
    ManifestError,
    EvaluationError,
    TensorFormatError,
    SamplingError,
    RasterizationError,
    BoundsError,
    EmptyChangeError,
    ParameterError,
    ValueError,
    OSError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="changeforge", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("generate", help="generate a dataset from a strategy config")
    g.add_argument("--config", required=True, help="GenerationConfig JSON file")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--seed", type=int, default=None, help="seed override")
    g.add_argument("--count", type=int, default=None, help="pair-count override")
    g.add_argument("--source-pool", default=None, help="background/crop image dir override")
    g.add_argument("--instance-pool", default=None, help="RGBA cutout dir override")

    e = sub.add_parser("encode", help="encode manifest boxes into target-map files")
    e.add_argument("--manifest", required=True)
    e.add_argument("--out", required=True, help="directory for tensor files")
    e.add_argument("--stride", type=int, default=4)

    d = sub.add_parser("decode", help="decode map files into a detections JSON")
    d.add_argument("--maps", required=True, help="directory of <pair_id>_{hm,wh,offset}.t32")
    d.add_argument("--out", required=True, help="detections JSON path")
    d.add_argument("--threshold", type=float, default=0.3)
    d.add_argument("--stride", type=int, default=4)
    d.add_argument("--max-detections", type=int, default=100)

    ev = sub.add_parser("eval", help="score detections against a manifest")
    ev.add_argument("--detections", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--iou", type=float, default=0.5)
    ev.add_argument("--out", default=None, help="write the result JSON here (default stdout)")

    di = sub.add_parser("distance", help="generalization distances from a results CSV")
    di.add_argument("--matrix", required=True)
    di.add_argument("--out", default=None)

    ins = sub.add_parser("inspect", help="render a pair side by side with its boxes")
    ins.add_argument("--manifest", required=True)
    ins.add_argument("--pair-id", required=True)
    ins.add_argument("--out", required=True, help="output PNG path")

    lo = sub.add_parser("loss", help="loss report for prediction vs target map files")
    lo.add_argument("--pred", required=True, help="prediction tensor-file prefix")
    lo.add_argument("--target", required=True, help="target tensor-file prefix")
    lo.add_argument("--out", default=None)
    return p


def _emit(doc: dict, out_path) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_generate(args) -> None:
    with open(args.config) as f:
        raw = json.load(f)
    if args.seed is not None:
        raw["seed"] = args.seed
    elif "seed" not in raw and os.environ.get("CHANGEFORGE_SEED"):
        raw["seed"] = int(os.environ["CHANGEFORGE_SEED"])
    if args.count is not None:
        raw["count"] = args.count
    if args.source_pool is not None:
        raw["source_pool_dir"] = args.source_pool
    if args.instance_pool is not None:
        raw["instance_pool_dir"] = args.instance_pool
    cfg = synthgen.GenerationConfig.from_dict(raw)
    manifest = synthgen.generate_dataset(cfg, args.out)
    log.info("wrote %d pairs to %s", len(manifest.records), args.out)


def _codec_for_records(records, manifest_path, stride: int) -> CodecConfig:
    first = Path(manifest_path).parent / records[0].reference_path
    with Image.open(first) as im:
        w, h = im.size
    if w != h or w % stride != 0:
        raise ManifestError(
            f"images must be square with size divisible by {stride}, got {w}x{h}"
        )
    return CodecConfig(input_resolution=w, map_resolution=w // stride, stride=stride)


def _cmd_encode(args) -> None:
    records = synthgen.load_dataset(args.manifest)
    if not records:
        raise ManifestError("manifest has no records")
    cfg = _codec_for_records(records, args.manifest, args.stride)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r in records:
        maps = encode_targets(r.boxes, cfg)
        tensorio.write_maps(maps, out / r.pair_id)
    log.info("encoded %d records at %dx%d cells", len(records), cfg.map_resolution, cfg.map_resolution)


def _cmd_decode(args) -> None:
    maps_dir = Path(args.maps)
    prefixes = sorted(
        str(p)[: -len("_hm.t32")] for p in maps_dir.glob("*_hm.t32")
    )
    if not prefixes:
        raise TensorFormatError(f"no *_hm.t32 files in {maps_dir}")
    detections = {}
    for prefix in prefixes:
        maps = tensorio.read_maps(prefix)
        res = maps.hm.shape[0]
        cfg = CodecConfig(
            input_resolution=res * args.stride,
            map_resolution=res,
            stride=args.stride,
            peak_threshold=args.threshold,
            max_detections=args.max_detections,
        )
        pair_id = Path(prefix).name
        detections[pair_id] = decode_maps(maps, cfg)
    metrics.write_detections_json(detections, args.out)


def _cmd_eval(args) -> None:
    records = synthgen.load_dataset(args.manifest)
    detections = metrics.read_detections_json(args.detections)
    gts = {r.pair_id: r.boxes for r in records}
    result = metrics.average_precision(detections, gts, iou_threshold=args.iou)
    _emit(
        {
            "ap50": result.ap50,
            "true_positives": result.true_positives,
            "false_positives": result.false_positives,
            "false_negatives": result.false_negatives,
        },
        args.out,
    )


def _cmd_distance(args) -> None:
    matrix = metrics.read_results_csv(args.matrix)
    _emit(metrics.generalization_distance(matrix), args.out)


def _cmd_inspect(args) -> None:
    records = synthgen.load_dataset(args.manifest)
    match = [r for r in records if r.pair_id == args.pair_id]
    if not match:
        raise ManifestError(f"pair_id {args.pair_id!r} not found in manifest")
    record = match[0]
    base = Path(args.manifest).parent
    ref = Image.open(base / record.reference_path).convert("RGB")
    test = Image.open(base / record.test_path).convert("RGB")
    for im in (ref, test):
        draw = ImageDraw.Draw(im)
        for b in record.boxes:
            x0, y0, x1, y1 = b.corners()
            draw.rectangle([x0, y0, x1, y1], outline=(0, 255, 0), width=2)
    canvas = Image.new("RGB", (ref.width + test.width, max(ref.height, test.height)))
    canvas.paste(ref, (0, 0))
    canvas.paste(test, (ref.width, 0))
    canvas.save(args.out, format="PNG")


def _cmd_loss(args) -> None:
    pred = tensorio.read_maps(args.pred)
    target = tensorio.read_maps(args.target)
    report = total_loss(pred, target, LossConfig())
    _emit(
        {
            "l_hm": report.l_hm,
            "l_wh": report.l_wh,
            "l_offset": report.l_offset,
            "total": report.total,
            "n_peaks": report.n_peaks,
        },
        args.out,
    )


_COMMANDS = {
    "generate": _cmd_generate,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "eval": _cmd_eval,
    "distance": _cmd_distance,
    "inspect": _cmd_inspect,
    "loss": _cmd_loss,
}


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        sys.stderr.write(f"error: {e}\n")
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        _COMMANDS[args.subcommand](args)
    except DATA_ERRORS as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
