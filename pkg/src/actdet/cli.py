"""Command-line entry point.

    actdet stats   --ann data.jsonl [--labels names.json]
    actdet filter  --ann data.jsonl --min-clips 10 --out filtered.jsonl
    actdet split   --ann data.jsonl --ratio 7:3 --out-dir split/
    actdet anchors --ann data.jsonl --k 5 | --k-min 2 --k-max 9
    actdet weights --ann data.jsonl --alpha 2 --beta 0.7 [--invert-enf]
    actdet eval    --ann gt.jsonl --det dets.jsonl [--iou 0.5] [--report table3]
    actdet decode  --grid out.bin --anchors anchors.json --image-w W --image-h H

Exit codes: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from actdet import anchors as anchors_mod
from actdet import annot, decode, evaluation, imbalance
from actdet.errors import InputError

log = logging.getLogger("actdet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def read_config(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; values may be quoted.
    Keys use flag names with dashes or underscores."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read config {path}: {e.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise InputError(f"{path}: expected key = value", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        out[key.replace("-", "_")] = value
    return out


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_labels(path: str | None) -> dict[int, str]:
    if not path:
        return {}
    try:
        raw = json.loads(_read_bytes(path))
        return {int(k): str(v) for k, v in raw.items()}
    except (ValueError, AttributeError) as e:
        raise InputError(f"bad labels file {path}: {e}") from None


# -- commands ----------------------------------------------------------------

def cmd_stats(args) -> None:
    _, clips = annot.parse_annotations(_read_bytes(args.ann))
    labels = _load_labels(args.labels)
    stats = annot.dataset_stats(clips)
    rows = ["action_index,label,clips,frames"]
    for r in stats.rows:
        label = labels.get(r.class_id, f"class_{r.class_id}").replace('"', '""')
        rows.append(f'{r.class_id + 1},"{label}",{r.clip_count},{r.frame_count}')
    _write(args.out, "\n".join(rows) + "\n")
    log.info("%d classes, %d clips, %d frames", len(stats.rows), stats.total_clips, stats.total_frames)


def cmd_filter(args) -> None:
    frames, clips = annot.parse_annotations(_read_bytes(args.ann))
    _, remap = annot.filter_top_classes(clips, args.min_clips)
    _write(args.out, annot.serialize_annotations(annot.remap_frames(frames, remap)))
    if args.remap_out:
        _write(args.remap_out, json.dumps({str(k): v for k, v in remap.items()}, indent=2) + "\n")
    log.info("kept %d classes", len(remap))


def cmd_split(args) -> None:
    _, clips = annot.parse_annotations(_read_bytes(args.ann))
    res = annot.stratified_split(clips, args.ratio, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "train_clips.jsonl").write_text(annot.serialize_clips(sorted(res.train)), encoding="utf-8")
    (out / "test_clips.jsonl").write_text(annot.serialize_clips(sorted(res.test)), encoding="utf-8")
    manifest = {
        "seed": res.seed,
        "ratio": f"{res.ratio.numerator}/{res.ratio.denominator}",
        "train_clips": len(res.train),
        "test_clips": len(res.test),
        "source": args.ann,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    log.info("train %d clips, test %d clips", len(res.train), len(res.test))


def cmd_anchors(args) -> None:
    frames = annot.parse_frames(_read_bytes(args.ann))
    X = anchors_mod.shapes_from_frames(frames, args.image_w, args.image_h)
    opts = dict(tol=args.tol, max_iter=args.max_iter, metric=args.metric, restarts=args.restarts)
    if args.k is not None:
        result = anchors_mod.kmeans_anchors(X, args.k, args.seed, **opts)
    else:
        sel = anchors_mod.select_k(X, args.k_min, args.k_max, args.seed, **opts)
        result = sel.runs[sel.k]
        if args.profile_out:
            _write(args.profile_out, sel.profile_csv())
        log.info("elbow at k=%d", sel.k)
    _write(args.out, result.to_json())


def cmd_weights(args) -> None:
    _, clips = annot.parse_annotations(_read_bytes(args.ann))
    params = imbalance.ImbalanceParams(args.alpha, args.beta)
    w = imbalance.weights_from_stats(annot.dataset_stats(clips), params, inverted=args.invert_enf)
    _write(args.out, w.to_csv())


def cmd_eval(args) -> None:
    frames = annot.parse_frames(_read_bytes(args.ann))
    names = args.name or []
    if names and len(names) != len(args.det):
        raise InputError("give one --name per --det")
    if len(args.det) > 1 and args.report != "table3":
        raise InputError("several --det files require --report table3")
    reports = {}
    for i, path in enumerate(args.det):
        dets = evaluation.parse_detections(_read_bytes(path))
        rep = evaluation.evaluate(frames, dets, args.iou, args.conf_floor, args.num_classes, args.workers)
        reports[names[i] if names else Path(path).stem] = rep
        print(f"{path}: {rep.summary()}", file=sys.stderr)
    if args.report == "table3":
        _write(args.out, evaluation.table3(reports))
    else:
        _write(args.out, next(iter(reports.values())).to_csv())


def cmd_decode(args) -> None:
    grid = decode.GridOutput.from_bytes(_read_bytes(args.grid))
    anchor_wh = anchors_mod.load_anchors(_read_bytes(args.anchors).decode("utf-8"))
    dets = decode.decode_grid(grid, anchor_wh, args.image_w, args.image_h, args.conf_floor,
                              args.video_id, args.frame)
    if args.nms > 0:
        dets = decode.nms(dets, args.nms)
    _write(args.out, evaluation.serialize_detections(dets))


# -- parser ------------------------------------------------------------------

def _unit(s: str) -> float:
    v = float(s)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{s} is not in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="seed for all randomness (default 42)")
    common.add_argument("--config", help="key = value file; explicit flags take precedence")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="actdet", description="Action-detection evaluation and dataset tooling.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stats", parents=[common], help="per-class clip and frame counts")
    s.add_argument("--ann", required=True)
    s.add_argument("--labels", help="JSON object mapping class id to name")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("filter", parents=[common], help="keep classes with enough clips, re-index")
    s.add_argument("--ann", required=True)
    s.add_argument("--min-clips", type=int, default=10)
    s.add_argument("--out")
    s.add_argument("--remap-out")
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("split", parents=[common], help="class-stratified train/test split")
    s.add_argument("--ann", required=True)
    s.add_argument("--ratio", default="7:3", help="train share, e.g. 0.7 or 7:3")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("anchors", parents=[common], help="k-means anchor priors")
    s.add_argument("--ann", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--k-min", type=int, default=2)
    s.add_argument("--k-max", type=int, default=9)
    s.add_argument("--image-w", type=float)
    s.add_argument("--image-h", type=float)
    s.add_argument("--metric", choices=anchors_mod.METRICS, default="euclidean")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-iter", type=int, default=100)
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--profile-out")
    s.set_defaults(func=cmd_anchors)

    s = sub.add_parser("weights", parents=[common], help="effective-number class weights")
    s.add_argument("--ann", required=True)
    s.add_argument("--alpha", type=float, default=imbalance.DEFAULT_ALPHA)
    s.add_argument("--beta", type=float, default=imbalance.DEFAULT_BETA)
    s.add_argument("--invert-enf", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_weights)

    s = sub.add_parser("eval", parents=[common], help="frame-mAP evaluation")
    s.add_argument("--ann", required=True)
    s.add_argument("--det", required=True, action="append")
    s.add_argument("--name", action="append")
    s.add_argument("--iou", type=float, default=evaluation.DEFAULT_IOU)
    s.add_argument("--conf-floor", type=_unit, default=0.0)
    s.add_argument("--num-classes", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--report", choices=("csv", "table3"), default="csv")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("decode", parents=[common], help="grid output to detections JSONL")
    s.add_argument("--grid", required=True)
    s.add_argument("--anchors", required=True)
    s.add_argument("--image-w", type=float, required=True)
    s.add_argument("--image-h", type=float, required=True)
    s.add_argument("--conf-floor", type=_unit, default=0.0)
    s.add_argument("--nms", type=float, default=decode.DEFAULT_NMS_IOU, help="NMS IoU; 0 disables")
    s.add_argument("--video-id", default="")
    s.add_argument("--frame", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_decode)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if not a.startswith("-")), None)
    subparsers = parser._subparsers._group_actions[0].choices
    if not known.config or command not in subparsers:
        return
    cfg = read_config(known.config)
    sub = subparsers[command]
    actions = {a.dest: a for a in sub._actions}
    unknown = sorted(set(cfg) - set(actions) - {"config", "help"})
    if unknown:
        raise InputError(f"unknown config keys for {command}: {', '.join(unknown)}")
    defaults = {}
    for key, value in cfg.items():
        action = actions.get(key)
        if action is None:
            continue
        if action.nargs == 0:
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise InputError(f"config key {key} expects a boolean, got {value!r}")
            value = value.lower() in ("true", "1", "yes")
        elif isinstance(action, argparse._AppendAction):
            value = [action.type(value) if action.type else value]
        # plain string defaults are converted by argparse via action.type
        defaults[key] = value
        action.required = False
    sub.set_defaults(**defaults)


def _parse(argv):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_config(parser, argv)
    return parser.parse_args(argv)


def run(argv=None) -> int:
    try:
        args = _parse(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except InputError as e:
        print(f"actdet: error: {e}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (InputError, FileNotFoundError, UnicodeDecodeError) as e:
        print(f"actdet: error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        log.exception("internal error: %s", e)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
