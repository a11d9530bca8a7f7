"""Segmentation evaluation: accuracy, exact ROC-AUC, dice, overlay rendering.

All metrics are restricted to the field of view: pixels where the FOV
mask is 0 never enter any count or ranking.  When a dataset ships no FOV
files an all-ones mask is assumed, and the report records which policy
was in effect so numbers are self-describing.

AUC is the exact Mann-Whitney rank statistic (fraction of correctly
ordered positive/negative score pairs, ties at half weight), computed by
sorting in O(n log n) rather than over a threshold grid, so there is no
discretization knob.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import BinaryMask, ImagePlane, ProbabilityMap, load_png, load_prob_png

__all__ = [
    "ConfusionCounts",
    "ImageEval",
    "EvalReport",
    "DegenerateTruthError",
    "confusion",
    "accuracy",
    "dice",
    "roc_auc",
    "render_overlay",
    "evaluate_dataset",
    "best_accuracy_threshold",
]

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5


class DegenerateTruthError(ValueError):
    """Raised when the FOV holds only one class, leaving AUC undefined."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _check_dims(a, b, what: str) -> None:
    if a.data.shape[:2] != b.data.shape[:2]:
        raise ValueError(f"dimension mismatch between {what}: {a.data.shape[:2]} vs {b.data.shape[:2]}")


def _fov_array(fov: BinaryMask | None, shape) -> np.ndarray:
    if fov is None:
        return np.ones(shape, dtype=bool)
    return fov.data.astype(bool)


def confusion(pred: ProbabilityMap, truth: BinaryMask, fov: BinaryMask | None,
              threshold: float = DEFAULT_THRESHOLD) -> ConfusionCounts:
    """Binarize scores at ``threshold`` (>= is positive) and count inside the FOV."""
    _check_dims(pred, truth, "prediction and truth")
    if fov is not None:
        _check_dims(pred, fov, "prediction and fov")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    inside = _fov_array(fov, pred.data.shape)
    pos = pred.data >= threshold
    t = truth.data.astype(bool)
    tp = int(np.count_nonzero(pos & t & inside))
    fp = int(np.count_nonzero(pos & ~t & inside))
    fn = int(np.count_nonzero(~pos & t & inside))
    tn = int(np.count_nonzero(~pos & ~t & inside))
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def accuracy(counts: ConfusionCounts) -> float:
    if counts.total == 0:
        raise ValueError("accuracy undefined over an empty FOV")
    return (counts.tp + counts.tn) / counts.total


def dice(pred_binary: BinaryMask, truth: BinaryMask, fov: BinaryMask | None = None) -> float:
    """2|P & T| / (|P| + |T|) over FOV pixels; 1.0 when both sets are empty."""
    _check_dims(pred_binary, truth, "prediction and truth")
    inside = _fov_array(fov, pred_binary.data.shape)
    p = pred_binary.data.astype(bool) & inside
    t = truth.data.astype(bool) & inside
    denom = int(np.count_nonzero(p)) + int(np.count_nonzero(t))
    if denom == 0:
        return 1.0
    return 2.0 * np.count_nonzero(p & t) / denom


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean rank of their group."""
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)  # rank of the last member of each tie group
    group_rank = upper - (counts - 1) / 2.0
    return group_rank[inverse]


def roc_auc(pred: ProbabilityMap, truth: BinaryMask, fov: BinaryMask | None = None) -> float:
    """Exact Mann-Whitney AUC over FOV pixels via average ranks."""
    _check_dims(pred, truth, "prediction and truth")
    inside = _fov_array(fov, pred.data.shape)
    scores = pred.data[inside]
    labels = truth.data[inside].astype(bool)
    n_pos = int(np.count_nonzero(labels))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTruthError("AUC needs at least one positive and one negative pixel inside the FOV")
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[labels].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def render_overlay(pred_binary: BinaryMask, truth: BinaryMask) -> ImagePlane:
    """Fig-style overlay: black background, missed truth white, predictions red.

    Red is drawn over white where both hold, so any visible white marks
    vessels the prediction missed.
    """
    _check_dims(pred_binary, truth, "prediction and truth")
    h, w = truth.data.shape
    out = np.zeros((h, w, 3), dtype=np.float64)
    t = truth.data.astype(bool)
    p = pred_binary.data.astype(bool)
    out[t] = 1.0  # white ground truth first
    out[p] = (1.0, 0.0, 0.0)  # predictions paint over
    return ImagePlane(out)


@dataclass(frozen=True)
class ImageEval:
    stem: str
    accuracy: float | None
    auc: float | None
    dice: float | None
    counts: ConfusionCounts | None
    skipped: bool = False
    note: str = ""


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[ImageEval, ...]
    threshold: float
    fov_policy: str  # "files" or "all-ones"

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([r.accuracy for r in self.rows if not r.skipped]))

    @property
    def mean_auc(self) -> float:
        return float(np.mean([r.auc for r in self.rows if not r.skipped]))

    @property
    def mean_dice(self) -> float:
        return float(np.mean([r.dice for r in self.rows if not r.skipped]))

    def summary_line(self) -> str:
        return f"mean_auc={self.mean_auc:.4f} mean_acc={self.mean_accuracy:.4f} mean_dice={self.mean_dice:.4f}"

    def to_jsonl(self) -> str:
        header = {"kind": "header", "threshold": self.threshold, "fov_policy": self.fov_policy,
                  "images": len(self.rows)}
        lines = [json.dumps(header, sort_keys=True)]
        for r in self.rows:
            rec = {"kind": "image", "stem": r.stem, "skipped": r.skipped}
            if r.skipped:
                rec["note"] = r.note
            else:
                rec.update(accuracy=r.accuracy, auc=r.auc, dice=r.dice,
                           tp=r.counts.tp, fp=r.counts.fp, tn=r.counts.tn, fn=r.counts.fn)
            lines.append(json.dumps(rec, sort_keys=True))
        evaluated = [r for r in self.rows if not r.skipped]
        if evaluated:
            lines.append(json.dumps({"kind": "aggregate", "mean_accuracy": self.mean_accuracy,
                                     "mean_auc": self.mean_auc, "mean_dice": self.mean_dice},
                                    sort_keys=True))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        head = f"threshold={self.threshold}  fov={self.fov_policy}"
        lines = [head, f"{'stem':<24} {'accuracy':>9} {'auc':>9} {'dice':>9}"]
        for r in self.rows:
            if r.skipped:
                lines.append(f"{r.stem:<24} {'skipped: ' + r.note}")
            else:
                lines.append(f"{r.stem:<24} {r.accuracy:>9.4f} {r.auc:>9.4f} {r.dice:>9.4f}")
        evaluated = [r for r in self.rows if not r.skipped]
        if evaluated:
            lines.append(f"{'mean':<24} {self.mean_accuracy:>9.4f} {self.mean_auc:>9.4f} {self.mean_dice:>9.4f}")
        return "\n".join(lines) + "\n"


def _png_stems(directory: Path) -> set[str]:
    return {p.stem for p in directory.glob("*.png")}


def evaluate_dataset(pred_dir, truth_dir, fov_dir=None,
                     threshold: float = DEFAULT_THRESHOLD) -> EvalReport:
    """Per-image metrics plus arithmetic-mean aggregates over matching stems.

    Images whose FOV holds a single class are skipped with a warning and
    flagged in the report rather than poisoning the aggregates.
    """
    pred_dir, truth_dir = Path(pred_dir), Path(truth_dir)
    fov_dir = Path(fov_dir) if fov_dir is not None else None
    pred_stems = _png_stems(pred_dir)
    truth_stems = _png_stems(truth_dir)
    stems = sorted(pred_stems & truth_stems)
    if not stems:
        raise ValueError(f"no matching stems between {pred_dir} and {truth_dir}")
    for missing in sorted(pred_stems ^ truth_stems):
        log.warning("stem %s present on one side only; skipping", missing)

    rows = []
    for stem in stems:
        pred = load_prob_png(pred_dir / f"{stem}.png")
        truth = load_png(truth_dir / f"{stem}.png", kind="mask")
        fov = None
        if fov_dir is not None and (fov_dir / f"{stem}.png").exists():
            fov = load_png(fov_dir / f"{stem}.png", kind="mask")
        counts = confusion(pred, truth, fov, threshold)
        pred_bin = BinaryMask((pred.data >= threshold).astype(np.uint8))
        try:
            auc = roc_auc(pred, truth, fov)
        except DegenerateTruthError as exc:
            log.warning("skipping %s: %s", stem, exc)
            rows.append(ImageEval(stem=stem, accuracy=None, auc=None, dice=None,
                                  counts=None, skipped=True, note=str(exc)))
            continue
        rows.append(ImageEval(stem=stem, accuracy=accuracy(counts), auc=auc,
                              dice=dice(pred_bin, truth, fov), counts=counts))
    fov_policy = "files" if fov_dir is not None else "all-ones"
    return EvalReport(rows=tuple(rows), threshold=threshold, fov_policy=fov_policy)


def best_accuracy_threshold(pred_dir, truth_dir, fov_dir=None,
                            levels: int = 1024) -> tuple[float, float]:
    """Threshold on a uniform grid maximizing mean per-image accuracy.

    Scores are binned to ``levels`` uniform bins; candidate thresholds are
    the bin lower edges, so the result is exact for score maps quantized
    at or below that resolution.  Returns (threshold, mean_accuracy).
    """
    pred_dir, truth_dir = Path(pred_dir), Path(truth_dir)
    fov_dir = Path(fov_dir) if fov_dir is not None else None
    stems = sorted(_png_stems(pred_dir) & _png_stems(truth_dir))
    if not stems:
        raise ValueError(f"no matching stems between {pred_dir} and {truth_dir}")
    acc_curves = []
    for stem in stems:
        pred = load_prob_png(pred_dir / f"{stem}.png")
        truth = load_png(truth_dir / f"{stem}.png", kind="mask")
        fov = None
        if fov_dir is not None and (fov_dir / f"{stem}.png").exists():
            fov = load_png(fov_dir / f"{stem}.png", kind="mask")
        inside = _fov_array(fov, pred.data.shape)
        scores = np.minimum((pred.data[inside] * levels).astype(np.int64), levels - 1)
        labels = truth.data[inside].astype(bool)
        pos_hist = np.bincount(scores[labels], minlength=levels)
        neg_hist = np.bincount(scores[~labels], minlength=levels)
        total = labels.size
        if total == 0:
            continue
        # predicted positive at threshold t_j = j/levels  <=>  bin >= j
        tp = np.cumsum(pos_hist[::-1])[::-1]
        fp = np.cumsum(neg_hist[::-1])[::-1]
        tn = int(neg_hist.sum()) - fp
        acc_curves.append((tp + tn) / total)
    if not acc_curves:
        raise ValueError("no evaluable images")
    mean_curve = np.mean(acc_curves, axis=0)
    best = int(np.argmax(mean_curve))
    return best / levels, float(mean_curve[best])
