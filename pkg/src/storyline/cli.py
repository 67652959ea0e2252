"""Operator surface: generate synthetic data, train the three-level stack,
predict SVO triplets, evaluate, or run the whole pipeline in one go.

Exit codes: 0 success, 1 usage or data error, 2 internal invariant violation.
Every command is deterministic given its flags and seed; --threads only
changes wall time, never an emitted byte.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import SLOTS
from .dataset_io import (DataError, Dataset, load_annotations, load_dataset,
                         load_taxonomy, validate_annotations)
from .evaluation import evaluate, render_table, report_to_json
from .linear_svm import TrainConfig
from .parallel import parallel_map
from .story_hierarchy import (StoryConfig, TrainSet, load_story_model,
                              predict_svo, save_story_model, train_story)
from .synthgen import SCENARIOS, generate, preset, write_dataset

log = logging.getLogger("storyline")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract reserves 2 for bugs
    def error(self, message):
        self.print_usage(sys.stderr)
        raise DataError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _default_threads() -> int:
    return int(os.environ.get("STORYLINE_THREADS", "1"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="storyline",
                     description="Train and run the visual-story SVO pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_train_flags(p):
        p.add_argument("--k", type=int, default=60, help="top features to keep (default 60)")
        p.add_argument("--q", type=int, default=50, help="top frames to keep (default 50)")
        p.add_argument("--c", type=int, default=5, help="top level-2 responses per slot (default 5)")
        p.add_argument("--temporal", action="store_true",
                       help="use the three overlapping temporal parts at level 3")
        p.add_argument("--svm-c", type=float, default=1.0, dest="svm_c")
        p.add_argument("--tol", type=float, default=1e-4)
        p.add_argument("--max-iter", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--grid-k", type=_int_list, default=None)
        p.add_argument("--grid-q", type=_int_list, default=None)
        p.add_argument("--grid-c", type=_int_list, default=None)

    def add_io_flags(p, data=True, out=True):
        if data:
            p.add_argument("--data", required=True, help="dataset directory")
        if out:
            p.add_argument("--out", required=True, help="output path")
        p.add_argument("--threads", type=int, default=_default_threads())
        p.add_argument("--allow-negative", action="store_true",
                       help="accept negative feature values")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--scenario", choices=SCENARIOS, default="fg_basic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--n-videos", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--annotators", type=int, default=None)
    p.add_argument("--annotator-noise", type=float, default=None)
    p.add_argument("--train-fraction", type=float, default=None)

    p = sub.add_parser("train", help="train the L1/L2/L3 stack")
    add_io_flags(p)
    add_common_train_flags(p)

    p = sub.add_parser("predict", help="predict SVO triplets for the test split")
    p.add_argument("--model", required=True, help="trained model directory")
    p.add_argument("--level", choices=("l1", "l2", "l3"), default="l3")
    add_io_flags(p)

    p = sub.add_parser("evaluate", help="score a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--data", required=True, help="dataset directory (annotations + taxonomy)")
    p.add_argument("--label", default="pred", help="row label in the rendered table")
    p.add_argument("--json", nargs="?", const="-", default=None, metavar="PATH",
                   help="emit the machine-readable report (to PATH, or stdout)")

    p = sub.add_parser("pipeline", help="synth + train + predict + evaluate")
    p.add_argument("--scenario", choices=SCENARIOS, default="fg_basic")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--level", choices=("l1", "l2", "l3"), default="l3")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--allow-negative", action="store_true")
    p.add_argument("--json", nargs="?", const="-", default=None, metavar="PATH")
    add_common_train_flags(p)
    return parser


def _story_config(args, effective: dict | None = None) -> StoryConfig:
    vals = dict(k=args.k, q=args.q, c=args.c)
    if effective:
        vals.update(effective)
    return StoryConfig(
        k=vals["k"], q=vals["q"], c=vals["c"], temporal=args.temporal,
        svm=TrainConfig(C=args.svm_c, tol=args.tol, max_iter=args.max_iter,
                        seed=args.seed),
    )


def _train_set(dataset: Dataset, split: str, args) -> TrainSet:
    if dataset.vocabs is None:
        raise DataError(f"{dataset.root}: no vocabularies and no annotated train split")
    sequences = dataset.load_split(split, allow_negative=args.allow_negative,
                                   threads=args.threads)
    if not sequences:
        raise DataError(f"{dataset.root}: empty {split} split")
    missing = [s.video_id for s in sequences if s.video_id not in dataset.annotations]
    if missing:
        raise DataError(f"videos without annotations: {missing[:5]}")
    validate_annotations(
        {s.video_id: dataset.annotations[s.video_id] for s in sequences},
        dataset.vocabs)
    return TrainSet(sequences=tuple(sequences),
                    annotations=dataset.annotations, vocabs=dataset.vocabs)


def _grid_search(train_set: TrainSet, args, log_lines: list[str]) -> dict:
    """Hold out 20% of the train split by seeded shuffle and score every
    (k, q, c) combination; best mean binary-most accuracy at L3 wins."""
    ks = args.grid_k or [args.k]
    qs = args.grid_q or [args.q]
    cs = args.grid_c or [args.c]
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(train_set.sequences))
    n_fit = max(1, int(round(0.8 * len(order))))
    if n_fit == len(order):
        n_fit = len(order) - 1
    fit_idx, held_idx = order[:n_fit], order[n_fit:]
    fit = TrainSet(sequences=tuple(train_set.sequences[i] for i in fit_idx),
                   annotations=train_set.annotations, vocabs=train_set.vocabs)
    held = [train_set.sequences[i] for i in held_idx]

    best = None
    for k, q, c in itertools.product(ks, qs, cs):
        cfg = _story_config(args, dict(k=k, q=q, c=c))
        model, _ = train_story(fit, cfg, threads=args.threads)
        hits = 0
        for seq in held:
            pred = predict_svo(model, seq, "l3")
            hits += _triplet_hits(pred, train_set, seq.video_id)
        score = hits / (3 * len(held))
        line = f"grid k={k} q={q} c={c} held-out binary_most={score:.4f}"
        log_lines.append(line)
        log.info("%s", line)
        if best is None or score > best[0]:
            best = (score, dict(k=k, q=q, c=c))
    log_lines.append(f"grid selected k={best[1]['k']} q={best[1]['q']} c={best[1]['c']} "
                     f"(score {best[0]:.4f})")
    return best[1]


def _triplet_hits(pred, train_set: TrainSet, video_id: str) -> int:
    from .dataset_io import most_common_word
    ann = train_set.annotations[video_id]
    return sum(pred[col] == most_common_word(ann, slot)
               for col, slot in enumerate(SLOTS))


def cmd_train(args) -> int:
    dataset = load_dataset(args.data, allow_negative=args.allow_negative)
    train_set = _train_set(dataset, "train", args)
    log_lines: list[str] = []
    effective = None
    if args.grid_k or args.grid_q or args.grid_c:
        effective = _grid_search(train_set, args, log_lines)
    cfg = _story_config(args, effective)
    model, accuracies = train_story(train_set, cfg, threads=args.threads)
    out = Path(args.out)
    save_story_model(model, out)
    for level in ("l1", "l2", "l3"):
        parts = " ".join(f"{slot}={accuracies[level][slot]:.4f}" for slot in SLOTS)
        log_lines.append(f"train accuracy {level}: {parts}")
    with open(out / "train_log.txt", "w") as fh:
        fh.write("\n".join(log_lines) + "\n")
    print(f"model written to {out}")
    return 0


def cmd_predict(args) -> int:
    model = load_story_model(args.model)
    dataset = load_dataset(args.data, allow_negative=args.allow_negative)
    sequences = dataset.load_split("test", allow_negative=args.allow_negative,
                                  threads=args.threads)
    triplets = parallel_map(lambda s: predict_svo(model, s, args.level),
                            sequences, threads=args.threads)
    out = Path(args.out)
    with open(out, "w") as fh:
        for seq, (s, v, o) in zip(sequences, triplets):
            fh.write(json.dumps({"video_id": seq.video_id, "subject": s,
                                 "verb": v, "object": o}) + "\n")
    print(f"{len(sequences)} predictions written to {out}")
    return 0


def _load_predictions(path) -> dict[str, tuple[str, str, str]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"predictions file not found: {path}")
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out[obj["video_id"]] = (obj["subject"], obj["verb"], obj["object"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{path}:{lineno}: bad prediction line ({exc})") from None
    return out


def _emit_report(report, args, config_echo: dict, label: str) -> None:
    payload = report_to_json(report, config=config_echo)
    if args.json == "-":
        print(payload)
    else:
        print(render_table([(label, report)]))
        print(f"evaluated={report.evaluated} skipped={report.skipped}")
        if args.json:
            Path(args.json).write_text(payload + "\n")


def cmd_evaluate(args) -> int:
    predictions = _load_predictions(args.predictions)
    root = Path(args.data)
    annotations = load_annotations(root / "annotations.jsonl")
    taxonomy = load_taxonomy(root / "taxonomy.txt")
    report = evaluate(predictions, annotations, taxonomy)
    config_echo = {"predictions": str(args.predictions), "data": str(args.data)}
    _emit_report(report, args, config_echo, args.label)
    return 0


def cmd_synth(args) -> int:
    overrides = {}
    if args.n_videos is not None:
        overrides["n_videos"] = args.n_videos
    if args.d is not None:
        overrides["d"] = args.d
    if args.annotators is not None:
        overrides["n_annotators"] = args.annotators
    if args.annotator_noise is not None:
        overrides["annotator_noise"] = args.annotator_noise
    if args.train_fraction is not None:
        overrides["train_fraction"] = args.train_fraction
    cfg = preset(args.scenario, seed=args.seed, **overrides)
    ds = generate(cfg)
    write_dataset(ds, args.out)
    print(f"{cfg.n_videos} videos written to {args.out}")
    return 0


def cmd_pipeline(args) -> int:
    out = Path(args.out)
    data_dir = out / "data"
    model_dir = out / "model"
    cfg = preset(args.scenario, seed=args.seed)
    write_dataset(generate(cfg), data_dir)

    train_args = argparse.Namespace(**{**vars(args), "data": str(data_dir),
                                       "out": str(model_dir)})
    cmd_train(train_args)

    model = load_story_model(model_dir)
    dataset = load_dataset(data_dir, allow_negative=args.allow_negative)
    sequences = dataset.load_split("test", threads=args.threads)
    levels = ("l1", "l2", "l3")
    labels = {"l1": "L1 - FG", "l2": "L2 - FG-BG",
              "l3": "L3 - Temp." if args.temporal else "L3 - FG-BG"}
    rows = []
    taxonomy = dataset.taxonomy
    report_for_level = {}
    for level in levels:
        triplets = parallel_map(lambda s: predict_svo(model, s, level),
                                sequences, threads=args.threads)
        preds = {seq.video_id: t for seq, t in zip(sequences, triplets)}
        with open(out / f"predictions_{level}.jsonl", "w") as fh:
            for seq in sequences:
                s, v, o = preds[seq.video_id]
                fh.write(json.dumps({"video_id": seq.video_id, "subject": s,
                                     "verb": v, "object": o}) + "\n")
        report_for_level[level] = evaluate(preds, dataset.annotations, taxonomy)
        rows.append((labels[level], report_for_level[level]))

    config_echo = {"scenario": args.scenario, "seed": args.seed, "k": args.k,
                   "q": args.q, "c": args.c, "temporal": args.temporal,
                   "level": args.level}
    payload = report_to_json(report_for_level[args.level], config=config_echo)
    (out / "report.json").write_text(payload + "\n")
    if args.json == "-":
        print(payload)
    else:
        print(render_table(rows))
        if args.json:
            Path(args.json).write_text(payload + "\n")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (DataError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - invariant violations map to exit 2
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
