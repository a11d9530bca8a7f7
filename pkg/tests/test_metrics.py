import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vesselaug import metrics
from vesselaug.raster import BinaryMask, ProbabilityMap, save_png, save_prob_png
from vesselaug.rng import SeedSpec, derive_stream
from vesselaug.synthetic import make_probability_map, make_sample


def pmap(arr) -> ProbabilityMap:
    return ProbabilityMap(np.asarray(arr, dtype=np.float64))


def mask(arr) -> BinaryMask:
    return BinaryMask(np.asarray(arr, dtype=np.uint8))


def auc_bruteforce(scores: np.ndarray, labels: np.ndarray) -> float:
    """O(n^2) pair-counting oracle: fraction of ordered pairs, ties at 0.5."""
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def random_instance(rng: np.ndarray, n_max: int = 500):
    n = int(rng.integers(10, n_max + 1))
    # quantized scores force plenty of ties
    scores = np.round(rng.random(n), 2)
    labels = (rng.random(n) < rng.uniform(0.1, 0.9)).astype(np.uint8)
    if labels.sum() == 0:
        labels[0] = 1
    if labels.sum() == n:
        labels[0] = 0
    fov = (rng.random(n) < 0.8).astype(np.uint8)
    # keep at least one positive and negative inside the fov
    fov[np.flatnonzero(labels == 1)[0]] = 1
    fov[np.flatnonzero(labels == 0)[0]] = 1
    return scores, labels, fov


class TestConfusionAccuracy:
    def test_three_pixel_enumeration(self):
        counts = metrics.confusion(pmap([[0.9, 0.4, 0.6]]), mask([[1, 0, 1]]),
                                   mask([[1, 1, 1]]), threshold=0.5)
        assert (counts.tp, counts.tn, counts.fp, counts.fn) == (2, 1, 0, 0)

    def test_perfect_prediction(self):
        truth = mask([[1, 0], [0, 1]])
        counts = metrics.confusion(pmap(truth.data.astype(float)), truth, None, threshold=0.5)
        assert counts.fp == 0 and counts.fn == 0
        assert metrics.accuracy(counts) == 1.0

    def test_empty_fov_all_zero_counts(self):
        counts = metrics.confusion(pmap([[0.9, 0.1]]), mask([[1, 0]]), mask([[0, 0]]))
        assert counts.total == 0
        with pytest.raises(ValueError):
            metrics.accuracy(counts)

    def test_accuracy_examples(self):
        assert metrics.accuracy(metrics.ConfusionCounts(tp=0, fp=3, tn=0, fn=2)) == 0.0
        assert metrics.accuracy(metrics.ConfusionCounts(tp=2, fp=0, tn=1, fn=1)) == 0.75

    def test_threshold_is_inclusive(self):
        counts = metrics.confusion(pmap([[0.5]]), mask([[1]]), None, threshold=0.5)
        assert counts.tp == 1

    def test_non_fov_pixels_ignored(self):
        # flipping predictions outside the FOV must not change counts
        rng = np.random.default_rng(0)
        scores = rng.random((10, 10))
        truth = mask(rng.integers(0, 2, (10, 10)))
        fov = mask(rng.integers(0, 2, (10, 10)))
        a = metrics.confusion(pmap(scores), truth, fov)
        scores2 = scores.copy()
        scores2[fov.data == 0] = 1.0 - scores2[fov.data == 0]
        b = metrics.confusion(pmap(scores2), truth, fov)
        assert a == b

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            metrics.confusion(pmap([[0.5]]), mask([[1, 0]]), None)


class TestDice:
    def test_identical_masks(self):
        m = mask([[1, 1], [0, 1]])
        assert metrics.dice(m, m) == 1.0

    def test_disjoint_masks(self):
        assert metrics.dice(mask([[1, 0]]), mask([[0, 1]])) == 0.0

    def test_formula_example(self):
        # |P| = 4, |T| = 2, overlap 2 -> 2*2/6
        pred = mask([[1, 1, 1, 1, 0, 0]])
        truth = mask([[1, 1, 0, 0, 0, 0]])
        assert metrics.dice(pred, truth) == pytest.approx(2 / 3, abs=1e-15)

    def test_both_empty_is_one(self):
        z = mask(np.zeros((3, 3)))
        assert metrics.dice(z, z) == 1.0

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a = mask(rng.integers(0, 2, (8, 8)))
        b = mask(rng.integers(0, 2, (8, 8)))
        assert metrics.dice(a, b) == metrics.dice(b, a)

    def test_fov_restriction(self):
        pred = mask([[1, 1]])
        truth = mask([[1, 0]])
        assert metrics.dice(pred, truth, mask([[1, 0]])) == 1.0  # disagreement hidden


class TestRocAuc:
    def test_perfect_separation(self):
        assert metrics.roc_auc(pmap([[0.9, 0.8, 0.1, 0.2]]), mask([[1, 1, 0, 0]])) == 1.0

    def test_all_ties_is_half(self):
        assert metrics.roc_auc(pmap([[0.5, 0.5, 0.5]]), mask([[1, 0, 1]])) == 0.5

    def test_four_pixel_example(self):
        # pairs: (.35,.1) win, (.35,.4) loss, (.8,.1) win, (.8,.4) win -> 3/4
        assert metrics.roc_auc(pmap([[0.1, 0.4, 0.35, 0.8]]), mask([[0, 0, 1, 1]])) == 0.75

    def test_degenerate_truth_raises(self):
        with pytest.raises(metrics.DegenerateTruthError):
            metrics.roc_auc(pmap([[0.5, 0.6]]), mask([[1, 1]]))
        with pytest.raises(metrics.DegenerateTruthError):
            metrics.roc_auc(pmap([[0.5, 0.6]]), mask([[1, 0]]), fov=mask([[1, 0]]))

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=30)
    def test_matches_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        scores, labels, fov = random_instance(rng, n_max=200)
        fast = metrics.roc_auc(pmap(scores[None, :]), mask(labels[None, :]), mask(fov[None, :]))
        slow = auc_bruteforce(scores[fov == 1], labels[fov == 1])
        assert abs(fast - slow) < 1e-12

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=20)
    def test_monotone_invariance(self, seed):
        rng = np.random.default_rng(seed)
        scores, labels, fov = random_instance(rng, n_max=300)
        base = metrics.roc_auc(pmap(scores[None, :]), mask(labels[None, :]), mask(fov[None, :]))
        cubed = metrics.roc_auc(pmap(scores[None, :] ** 3), mask(labels[None, :]), mask(fov[None, :]))
        assert abs(base - cubed) < 1e-12


class TestOverlay:
    def test_pred_equals_truth_no_white(self):
        m = mask(np.eye(8))
        out = metrics.render_overlay(m, m)
        white = np.all(out.data == 1.0, axis=2)
        assert white.sum() == 0
        red = np.all(out.data == (1.0, 0.0, 0.0), axis=2)
        assert red.sum() == 8

    def test_empty_pred_all_white(self):
        truth = mask(np.eye(6))
        out = metrics.render_overlay(mask(np.zeros((6, 6))), truth)
        white = np.all(out.data == 1.0, axis=2)
        assert white.sum() == 6

    def test_pixel_counts_on_random_case(self):
        rng = np.random.default_rng(7)
        pred = mask(rng.integers(0, 2, (16, 16)))
        truth = mask(rng.integers(0, 2, (16, 16)))
        out = metrics.render_overlay(pred, truth)
        red = np.all(out.data == (1.0, 0.0, 0.0), axis=2)
        white = np.all(out.data == 1.0, axis=2)
        p = pred.data.astype(bool)
        t = truth.data.astype(bool)
        assert red.sum() == p.sum()
        assert white.sum() == (t & ~p).sum()


class TestEvaluateDataset:
    def _write_pair(self, root, stem, scores, truth, fov=None):
        (root / "pred").mkdir(exist_ok=True, parents=True)
        (root / "truth").mkdir(exist_ok=True)
        save_prob_png(pmap(scores), root / "pred" / f"{stem}.png")
        save_png(mask(truth), root / "truth" / f"{stem}.png")
        if fov is not None:
            (root / "fov").mkdir(exist_ok=True)
            save_png(mask(fov), root / "fov" / f"{stem}.png")

    def test_perfect_prediction_aggregates(self, tmp_path):
        truth = np.random.default_rng(0).integers(0, 2, (12, 12))
        self._write_pair(tmp_path, "a", truth.astype(float), truth)
        report = metrics.evaluate_dataset(tmp_path / "pred", tmp_path / "truth")
        assert report.mean_accuracy == 1.0
        assert report.mean_dice == 1.0
        assert report.summary_line().startswith("mean_auc=1.0000 mean_acc=1.0000 mean_dice=1.0000")

    def test_mean_of_two_images(self, tmp_path):
        # image a: 9/10 correct at threshold .5; image b: 7/10
        scores_a = np.array([[0.9] * 9 + [0.9]])
        truth_a = np.array([[1] * 9 + [0]])
        scores_b = np.array([[0.9] * 7 + [0.1] * 3])
        truth_b = np.array([[1] * 7 + [1, 1, 0]])
        self._write_pair(tmp_path, "a", scores_a, truth_a)
        self._write_pair(tmp_path, "b", scores_b, truth_b)
        report = metrics.evaluate_dataset(tmp_path / "pred", tmp_path / "truth")
        accs = {r.stem: r.accuracy for r in report.rows}
        assert accs["a"] == 0.9 and accs["b"] == 0.8
        assert report.mean_accuracy == pytest.approx(0.85)

    def test_twenty_images_twenty_rows(self, tmp_path):
        stream = derive_stream(SeedSpec(1, "eval"))
        for i in range(20):
            sample = make_sample(32, 32, stream, id=f"i{i:02d}")
            scores = make_probability_map(sample.vessels, stream)
            self._write_pair(tmp_path, f"i{i:02d}", scores.data, sample.vessels.data,
                             sample.fov.data)
        report = metrics.evaluate_dataset(tmp_path / "pred", tmp_path / "truth", tmp_path / "fov")
        assert len(report.rows) == 20
        assert report.fov_policy == "files"
        lines = report.to_jsonl().strip().splitlines()
        assert len(lines) == 22  # header + 20 rows + aggregate

    def test_degenerate_image_skipped_and_flagged(self, tmp_path):
        self._write_pair(tmp_path, "good", np.array([[0.9, 0.1]]), np.array([[1, 0]]))
        self._write_pair(tmp_path, "allpos", np.array([[0.9, 0.8]]), np.array([[1, 1]]))
        report = metrics.evaluate_dataset(tmp_path / "pred", tmp_path / "truth")
        flags = {r.stem: r.skipped for r in report.rows}
        assert flags == {"good": False, "allpos": True}
        assert report.mean_accuracy == 1.0  # aggregate over evaluated rows only

    def test_empty_intersection_raises(self, tmp_path):
        (tmp_path / "pred").mkdir()
        (tmp_path / "truth").mkdir()
        save_prob_png(pmap([[0.5]]), tmp_path / "pred" / "x.png")
        save_png(mask([[1]]), tmp_path / "truth" / "y.png")
        with pytest.raises(ValueError):
            metrics.evaluate_dataset(tmp_path / "pred", tmp_path / "truth")

    def test_threshold_recorded_in_report(self, tmp_path):
        self._write_pair(tmp_path, "a", np.array([[0.9, 0.1]]), np.array([[1, 0]]))
        report = metrics.evaluate_dataset(tmp_path / "pred", tmp_path / "truth", threshold=0.25)
        assert report.threshold == 0.25
        assert '"threshold": 0.25' in report.to_jsonl()
        assert "threshold=0.25" in report.to_table()


class TestBestThreshold:
    def test_finds_separating_threshold(self, tmp_path):
        (tmp_path / "pred").mkdir()
        (tmp_path / "truth").mkdir()
        scores = np.array([[0.1, 0.2, 0.8, 0.9]])
        truth = np.array([[0, 0, 1, 1]])
        save_prob_png(pmap(scores), tmp_path / "pred" / "a.png")
        save_png(mask(truth), tmp_path / "truth" / "a.png")
        t, acc = metrics.best_accuracy_threshold(tmp_path / "pred", tmp_path / "truth")
        assert acc == 1.0
        assert 0.2 < t <= 0.8
