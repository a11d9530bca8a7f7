"""Command-line interface: augment / evaluate / overlay / replay.

Exit codes are stable and documented: 0 success, 2 partial failure,
64 usage error, 65 data error.  The master seed defaults to a fixed
constant (42) so every run is reproducible unless the caller opts out.
No subcommand ever mutates its input directories.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, metrics, pipeline
from .plan import DEFAULT_MASTER_SEED, default_paper_plan, load_plan
from .raster import BinaryMask, load_png, load_prob_png, save_png

EXIT_OK = 0
EXIT_PARTIAL = 2
EXIT_USAGE = 64
EXIT_DATA = 65

log = logging.getLogger("vesselaug")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _default_threads() -> int:
    env = os.environ.get("VESSELAUG_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vesselaug", description=__doc__)
    parser.add_argument("--version", action="version", version=f"vesselaug {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_aug = sub.add_parser("augment", help="expand a dataset per an augmentation plan")
    p_aug.add_argument("--in", dest="input", required=True, help="source directory (images/, masks/[, fov/])")
    p_aug.add_argument("--out", required=True, help="output directory")
    p_aug.add_argument("--plan", default=None, help="plan JSON file (default: built-in paper-default plan)")
    p_aug.add_argument("--seed", type=int, default=None,
                       help=f"master seed (default: plan seed, or {DEFAULT_MASTER_SEED})")
    p_aug.add_argument("--threads", type=int, default=None, help="worker count (wall time only, never bytes)")
    p_aug.add_argument("-v", "--verbose", action="count", default=0)

    p_eval = sub.add_parser("evaluate", help="score predictions against ground truth")
    p_eval.add_argument("--pred", required=True, help="directory of probability-map PNGs")
    p_eval.add_argument("--truth", required=True, help="directory of ground-truth masks")
    p_eval.add_argument("--fov", default=None, help="directory of FOV masks (default: all-ones)")
    p_eval.add_argument("--threshold", type=float, default=metrics.DEFAULT_THRESHOLD)
    p_eval.add_argument("--out", default=None, help="directory for report.jsonl / report.txt")
    p_eval.add_argument("--report-best-threshold", action="store_true",
                        help="also report the threshold maximizing mean accuracy")
    p_eval.add_argument("-v", "--verbose", action="count", default=0)

    p_ovl = sub.add_parser("overlay", help="render prediction/truth overlays")
    p_ovl.add_argument("--pred", required=True, help="binary prediction PNG or directory")
    p_ovl.add_argument("--truth", required=True, help="ground truth PNG or directory")
    p_ovl.add_argument("--out", required=True, help="output directory")
    p_ovl.add_argument("--threshold", type=float, default=metrics.DEFAULT_THRESHOLD,
                       help="binarization threshold for probability-map predictions")
    p_ovl.add_argument("-v", "--verbose", action="count", default=0)

    p_rep = sub.add_parser("replay", help="regenerate outputs from a manifest and verify checksums")
    p_rep.add_argument("--manifest", required=True)
    p_rep.add_argument("--source", required=True, help="original source directory")
    p_rep.add_argument("--stem", default=None, help="single output stem (default: all records)")
    p_rep.add_argument("--out", default=None, help="optionally write regenerated samples here")
    p_rep.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _cmd_augment(args) -> int:
    if args.plan is not None:
        plan_path = Path(args.plan)
        if not plan_path.is_file():
            print(f"vesselaug: error: plan file not found: {plan_path}", file=sys.stderr)
            return EXIT_USAGE
        plan = load_plan(plan_path)
    else:
        plan = default_paper_plan()
    if not Path(args.input).is_dir():
        print(f"vesselaug: error: input directory not found: {args.input}", file=sys.stderr)
        return EXIT_USAGE
    seed = args.seed if args.seed is not None else plan.master_seed
    threads = args.threads if args.threads is not None else _default_threads()
    try:
        result = pipeline.expand_dataset(args.input, plan, args.out, threads=threads, master_seed=seed)
    except (FileNotFoundError, ValueError) as exc:
        print(f"vesselaug: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(result.manifest_path)
    if result.failures:
        for stem, message in result.failures:
            print(f"FAILED {stem}: {message}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    try:
        report = metrics.evaluate_dataset(args.pred, args.truth, args.fov, threshold=args.threshold)
    except (FileNotFoundError, ValueError) as exc:
        print(f"vesselaug: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.jsonl").write_text(report.to_jsonl(), encoding="utf-8")
        (out / "report.txt").write_text(report.to_table(), encoding="utf-8")
    if args.report_best_threshold:
        best_t, best_acc = metrics.best_accuracy_threshold(args.pred, args.truth, args.fov)
        print(f"best_threshold={best_t:.4f} best_mean_acc={best_acc:.4f}")
    print(report.summary_line())
    return EXIT_OK


def _binarize_prediction(path, threshold: float) -> BinaryMask:
    pmap = load_prob_png(path)
    return BinaryMask((pmap.data >= threshold).astype(np.uint8))


def _cmd_overlay(args) -> int:
    pred, truth, out = Path(args.pred), Path(args.truth), Path(args.out)
    pairs = []
    if pred.is_dir() and truth.is_dir():
        stems = sorted({p.stem for p in pred.glob("*.png")} & {p.stem for p in truth.glob("*.png")})
        if not stems:
            print("vesselaug: error: no matching stems between prediction and truth directories",
                  file=sys.stderr)
            return EXIT_DATA
        pairs = [(pred / f"{s}.png", truth / f"{s}.png", s) for s in stems]
    elif pred.is_file() and truth.is_file():
        pairs = [(pred, truth, pred.stem)]
    else:
        print("vesselaug: error: --pred and --truth must both be files or both be directories",
              file=sys.stderr)
        return EXIT_USAGE
    out.mkdir(parents=True, exist_ok=True)
    for pred_path, truth_path, stem in pairs:
        pred_mask = _binarize_prediction(pred_path, args.threshold)
        truth_mask = load_png(truth_path, kind="mask")
        try:
            overlay = metrics.render_overlay(pred_mask, truth_mask)
        except ValueError as exc:
            print(f"vesselaug: error: {stem}: {exc}", file=sys.stderr)
            return EXIT_DATA
        save_png(overlay, out / f"{stem}_overlay.png")
    return EXIT_OK


def _cmd_replay(args) -> int:
    try:
        manifest = pipeline.Manifest.load(args.manifest)
    except (FileNotFoundError, ValueError) as exc:
        print(f"vesselaug: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    records = list(manifest.records)
    if args.stem is not None:
        try:
            records = [manifest.find(args.stem)]
        except KeyError as exc:
            print(f"vesselaug: error: {exc}", file=sys.stderr)
            return EXIT_DATA
    mismatches = 0
    for record in records:
        try:
            outcome = pipeline.verify_record(manifest, record, args.source)
        except (FileNotFoundError, ValueError) as exc:
            print(f"vesselaug: error: {record['stem']}: {exc}", file=sys.stderr)
            return EXIT_DATA
        ok = all(outcome.values())
        if not ok:
            mismatches += 1
            bad = ", ".join(k for k, v in outcome.items() if not v)
            print(f"MISMATCH {record['stem']}: checksum differs for {bad}")
        elif args.verbose:
            print(f"ok {record['stem']}")
        if args.out:
            sample = pipeline.replay(manifest, record, args.source)
            out = Path(args.out)
            (out / "images").mkdir(parents=True, exist_ok=True)
            (out / "masks").mkdir(parents=True, exist_ok=True)
            save_png(sample.image, out / "images" / f"{record['stem']}.png")
            save_png(sample.vessels, out / "masks" / f"{record['stem']}.png")
            if sample.fov is not None:
                (out / "fov").mkdir(parents=True, exist_ok=True)
                save_png(sample.fov, out / "fov" / f"{record['stem']}.png")
    print(f"verified {len(records)} records, {mismatches} mismatched")
    return EXIT_PARTIAL if mismatches else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    handlers = {"augment": _cmd_augment, "evaluate": _cmd_evaluate,
                "overlay": _cmd_overlay, "replay": _cmd_replay}
    return handlers[args.command](args)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
