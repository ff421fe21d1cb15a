"""Command-line interface chaining the pipeline stages.

Subcommands: flow, mos, volume, synth, train, predict, fuse, eval, viz.
Every stage is deterministic given --seed; exit status is 0 on success,
1 on pipeline errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import formats, net, pipeline, synth
from .fusion import (
    PredictParams,
    VideoPrediction,
    argmax_class,
    confusion_heat_image,
    evaluate,
    fuse,
    predict_from_pairs,
)
from .mos import MosParams, mos_images, xy_images
from .raster import RescaleBounds, make_rng
from .tvl1 import Tvl1Params, video_flows
from .volume import StackSpec, stack_volume


def _add_tvl1_flags(p):
    p.add_argument("--flow-lambda", type=float, default=0.15, help="data attachment weight")
    p.add_argument("--tv-theta", type=float, default=0.3)
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--pyramid-scale", type=float, default=0.5)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--warps", type=int, default=5)
    p.add_argument("--inner-iterations", type=int, default=10)
    p.add_argument("--stop-epsilon", type=float, default=0.01)


def _tvl1_params(args):
    return Tvl1Params(
        lam=args.flow_lambda,
        tv_theta=args.tv_theta,
        tau=args.tau,
        pyramid_scale=args.pyramid_scale,
        levels=args.levels,
        warps_per_level=args.warps,
        inner_iterations=args.inner_iterations,
        stop_epsilon=args.stop_epsilon,
    )


def _add_mos_flags(p):
    p.add_argument("--mag-low", type=float, default=-15.0)
    p.add_argument("--mag-high", type=float, default=15.0)
    p.add_argument("--ori-low", type=float, default=-180.0)
    p.add_argument("--ori-high", type=float, default=180.0)
    p.add_argument("--mag-threshold", type=int, default=128)


def _mos_params(args):
    return MosParams(
        mag_bounds=RescaleBounds(args.mag_low, args.mag_high),
        ori_bounds=RescaleBounds(args.ori_low, args.ori_high),
        mag_threshold=args.mag_threshold,
    )


def _clip_dirs(args):
    """(relative_id, input_dir) pairs: one clip, or all manifest clips."""
    src = Path(args.input)
    if args.manifest:
        entries = formats.read_manifest(args.manifest)
        return [(e.path, src / e.path) for e in entries]
    return [("", src)]


def cmd_flow(args):
    params = _tvl1_params(args)
    out_root = Path(args.output)
    for rel, clip_dir in _clip_dirs(args):
        frames = pipeline.read_clip_frames(clip_dir)
        flows = video_flows(frames, params)
        dest = out_root / rel
        dest.mkdir(parents=True, exist_ok=True)
        for t, flow in enumerate(flows):
            formats.write_flo(dest / f"flow_{t:04d}.flo", flow)
    return 0


def cmd_mos(args):
    params = _mos_params(args)
    out_root = Path(args.output)
    names = ("mag", "ori") if args.mode == "mos" else ("x", "y")
    for rel, clip_dir in _clip_dirs(args):
        flo_paths = sorted(Path(clip_dir).glob("*.flo"))
        if not flo_paths:
            raise ValueError(f"no .flo files in {clip_dir}")
        dest = out_root / rel
        dest.mkdir(parents=True, exist_ok=True)
        for t, path in enumerate(flo_paths):
            flow = formats.read_flo(path)
            if args.mode == "mos":
                pair = mos_images(flow, params)
            else:
                pair = xy_images(flow, params.mag_bounds)
            formats.write_pgm(dest / f"{names[0]}_{t:04d}.pgm", pair[0])
            formats.write_pgm(dest / f"{names[1]}_{t:04d}.pgm", pair[1])
    return 0


def _read_pair_sequence(clip_dir):
    clip_dir = Path(clip_dir)
    for first, second in (("mag", "ori"), ("x", "y")):
        firsts = sorted(clip_dir.glob(f"{first}_*.pgm"))
        seconds = sorted(clip_dir.glob(f"{second}_*.pgm"))
        if firsts:
            if len(firsts) != len(seconds):
                raise ValueError(f"{clip_dir}: {len(firsts)} {first} images but {len(seconds)} {second}")
            return [(formats.read_pgm(a), formats.read_pgm(b)) for a, b in zip(firsts, seconds)]
    raise ValueError(f"no mag_/ori_ or x_/y_ PGM pairs in {clip_dir}")


def cmd_volume(args):
    spec = StackSpec(args.stack_length)
    out_root = Path(args.output)
    for rel, clip_dir in _clip_dirs(args):
        pairs = _read_pair_sequence(clip_dir)
        if len(pairs) < spec.stack_length:
            raise ValueError(
                f"{clip_dir}: need {spec.stack_length} pairs for one stack, have {len(pairs)}"
            )
        dest = out_root / rel
        dest.mkdir(parents=True, exist_ok=True)
        for start in range(len(pairs) - spec.stack_length + 1):
            vol = stack_volume(pairs, start, spec)
            formats.write_tensor(dest / f"volume_{start:04d}.mosv", vol)
    return 0


def cmd_synth(args):
    spec = synth.SyntheticSpec(
        frame_size=(args.frame_size, args.frame_size),
        frames_per_clip=args.frames_per_clip,
        clips_per_class=args.clips_per_class,
        speeds=tuple(float(s) for s in args.speeds.split(",")),
        directions=tuple(args.directions.split(",")),
        motions=tuple(args.motions.split(",")),
        train_fraction=args.train_fraction,
        stack_length=args.stack_length,
    )
    entries = synth.gen_synthetic(spec, make_rng(args.seed), args.output)
    labels = formats.manifest_classes(entries)
    print(f"wrote {len(entries)} clips across {len(labels)} classes to {args.output}")
    return 0


def _load_manifest_dataset(args, mode="mos", split=None):
    manifest_path = Path(args.manifest)
    all_entries = formats.read_manifest(manifest_path)
    classes = formats.manifest_classes(all_entries)
    entries = all_entries
    if split:
        entries = [e for e in all_entries if e.split == split]
        if not entries:
            raise ValueError(f"manifest has no {split!r} entries")
    start = time.perf_counter()

    def progress(done, total):
        if args.verbose and (done % 50 == 0 or done == total):
            rate = done / (time.perf_counter() - start)
            print(f"  pairs for {done}/{total} clips ({rate:.1f} clips/s)", flush=True)

    dataset = pipeline.load_dataset(
        entries, manifest_path.parent, _tvl1_params(args), _mos_params(args), mode, progress
    )
    return classes, dataset


def cmd_train(args):
    classes, dataset = _load_manifest_dataset(args, mode=args.mode)
    config = net.desk_net_config(
        input_shape=(2 * args.stack_length, args.input_side, args.input_side),
        num_classes=len(classes),
        fc_width=args.fc_width,
        dropout=args.dropout,
    )
    model = net.TinyNet(config, make_rng(args.seed))
    cfg = net.TrainConfig(
        base_lr=args.base_lr,
        lr_step=args.lr_step,
        lr_factor=args.lr_factor,
        max_iter=args.iterations,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    train_pipe = pipeline.TrainPipeline(stack=StackSpec(args.stack_length), out_side=args.input_side)

    def progress(it, lr, loss):
        if args.verbose and (it % 50 == 0 or it == cfg.max_iter - 1):
            print(f"  iter {it}: lr {lr:g} loss {loss:.4f}", flush=True)

    curve = net.train(model, dataset.train_by_class, train_pipe.make_volume, cfg, progress)
    net.save_checkpoint(model, args.output, iterations=cfg.max_iter)
    if args.loss_csv:
        formats.write_loss_csv(args.loss_csv, curve)
    print(f"trained {cfg.max_iter} iterations, final loss {curve[-1][2]:.4f}" if curve else "trained 0 iterations")
    return 0


def cmd_predict(args):
    model, _ = net.load_checkpoint(args.checkpoint)
    classes, dataset = _load_manifest_dataset(args, mode=args.mode, split=args.split)
    clips = dataset.test_clips if args.split == "test" else [
        c for group in dataset.train_by_class for c in group
    ]
    params = PredictParams(
        tvl1=_tvl1_params(args),
        mos=_mos_params(args),
        stack=StackSpec(args.stack_length),
        k_samples=args.samples,
        out_side=model.config.input_shape[1],
        mode=args.mode,
    )
    ids = []
    rows = []
    for clip in clips:
        pred = predict_from_pairs(model, clip.pairs, params, clip.video_id)
        ids.append(pred.video_id)
        rows.append(pred.scores)
        if args.verbose:
            print(f"  {pred.video_id}: class {pred.predicted}", flush=True)
    formats.write_scores_csv(args.output, ids, np.asarray(rows))
    print(f"wrote scores for {len(ids)} videos to {args.output}")
    return 0


def cmd_fuse(args):
    tables = [formats.read_scores_csv(p) for p in args.scores]
    base_ids = tables[0][0]
    weights = [float(w) for w in args.weights.split(",")] if args.weights else [1.0] * len(tables)
    if len(weights) != len(tables):
        raise ValueError(f"{len(tables)} score files but {len(weights)} weights")
    by_id = []
    for ids, scores in tables:
        if sorted(ids) != sorted(base_ids):
            raise ValueError("score files cover different video sets")
        by_id.append(dict(zip(ids, scores)))
    fused = [fuse([table[vid] for table in by_id], weights) for vid in base_ids]
    formats.write_scores_csv(args.output, base_ids, np.asarray(fused))
    print(f"fused {len(tables)} streams over {len(base_ids)} videos")
    return 0


def cmd_eval(args):
    ids, scores = formats.read_scores_csv(args.scores)
    entries = formats.read_manifest(args.manifest)
    labels = {e.path: e.class_index for e in entries}
    class_names = formats.manifest_classes(entries)
    predictions = [
        VideoPrediction(vid, row, argmax_class(row)) for vid, row in zip(ids, scores)
    ]
    report = evaluate(predictions, labels, len(class_names))
    print(f"accuracy: {report.accuracy * 100:.2f}%")
    print(f"class-mean accuracy: {report.class_mean * 100:.2f}%")
    for name, acc in zip(class_names, report.per_class):
        shown = "n/a" if np.isnan(acc) else f"{acc * 100:.2f}%"
        print(f"  {name}: {shown}")
    if args.confusion_csv:
        formats.write_confusion_csv(args.confusion_csv, report.confusion)
    if args.confusion_pgm:
        formats.write_pgm(args.confusion_pgm, confusion_heat_image(report.confusion))
    return 0


def _flow_color(flow, max_mag=None):
    mag = np.hypot(flow.u, flow.v)
    angle = np.degrees(np.arctan2(flow.v, flow.u))
    peak = max_mag if max_mag else max(mag.max(), 1e-9)
    hue = (angle + 180.0) / 360.0
    val = np.clip(mag / peak, 0.0, 1.0)
    # HSV -> RGB with saturation 1
    i = np.floor(hue * 6.0).astype(int) % 6
    f = hue * 6.0 - np.floor(hue * 6.0)
    p = np.zeros_like(val)
    q = val * (1.0 - f)
    t = val * f
    lut = [(val, t, p), (q, val, p), (p, val, t), (p, q, val), (t, p, val), (val, p, q)]
    rgb = np.zeros(flow.shape + (3,))
    for idx, (r, g, b) in enumerate(lut):
        mask = i == idx
        rgb[mask, 0] = r[mask]
        rgb[mask, 1] = g[mask]
        rgb[mask, 2] = b[mask]
    return np.floor(rgb * 255.0 + 0.5).astype(np.uint8)


def cmd_viz(args):
    flow = formats.read_flo(args.input)
    formats.write_ppm(args.output, _flow_color(flow, args.max_mag))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="mostream", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", help="frames dir -> .flo files")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--manifest", help="process every clip listed in this manifest")
    _add_tvl1_flags(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("mos", help=".flo files -> byte-image PGM pairs")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--manifest")
    p.add_argument("--mode", choices=("mos", "xy"), default="mos")
    _add_mos_flags(p)
    p.set_defaults(func=cmd_mos)

    p = sub.add_parser("volume", help="PGM pairs -> stacked tensor files")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--manifest")
    p.add_argument("--stack-length", type=int, default=10)
    p.set_defaults(func=cmd_volume)

    p = sub.add_parser("synth", help="generate a synthetic moving-texture dataset")
    p.add_argument("output")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frame-size", type=int, default=64)
    p.add_argument("--frames-per-clip", type=int, default=12)
    p.add_argument("--clips-per-class", type=int, default=20)
    p.add_argument("--speeds", default="1,3")
    p.add_argument("--directions", default="right,left,up,down")
    p.add_argument("--motions", default="translate")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--stack-length", type=int, default=10)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="manifest -> checkpoint + loss CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True, help="checkpoint path")
    p.add_argument("--loss-csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, default=600)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--base-lr", type=float, default=0.005)
    p.add_argument("--lr-step", type=int, default=5000)
    p.add_argument("--lr-factor", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=0.0005)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--fc-width", type=int, default=64)
    p.add_argument("--stack-length", type=int, default=10)
    p.add_argument("--input-side", type=int, default=56)
    p.add_argument("--mode", choices=("mos", "xy"), default="mos")
    p.add_argument("--verbose", action="store_true")
    _add_tvl1_flags(p)
    _add_mos_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="checkpoint + manifest -> scores CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0, help="accepted for chain uniformity; prediction is deterministic")
    p.add_argument("--samples", type=int, default=25)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--stack-length", type=int, default=10)
    p.add_argument("--mode", choices=("mos", "xy"), default="mos")
    p.add_argument("--verbose", action="store_true")
    _add_tvl1_flags(p)
    _add_mos_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("fuse", help="combine score CSVs by weighted sum")
    p.add_argument("scores", nargs="+")
    p.add_argument("--weights", help="comma list, e.g. 2,1; default equal weights")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="scores + manifest -> accuracy and confusion matrix")
    p.add_argument("--scores", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--confusion-csv")
    p.add_argument("--confusion-pgm")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viz", help=".flo -> HSV-style color PPM for debugging")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--max-mag", type=float, default=None)
    p.set_defaults(func=cmd_viz)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
