"""Tests for matching, PR / ROC curves, difficulty buckets and detection files."""
import numpy as np
import pytest

from face_rfcn.errors import EvaluationInputError, MissingArtifactError
from face_rfcn.evaluation import (
    average_precision,
    bucket_masks,
    discrete_roc,
    evaluate_dataset,
    match,
    pr_curve,
    read_detections,
    restrict_to_gts,
    write_curve,
    write_detections,
)
from face_rfcn.evaluation.detections import parse_detections
from face_rfcn.models import Box, Detection, MatchResult
from face_rfcn.utils.config import EvalConfig

from . import oracles


def det(x1, y1, x2, y2, score):
    return Detection(box=Box(x1=x1, y1=y1, x2=x2, y2=y2), score=score)


def flags_result(flags, num_gts):
    """MatchResult with TP/FP flags in descending score order."""
    matched, next_gt = [], 0
    for tp in flags:
        matched.append(next_gt if tp else None)
        next_gt += tp
    return MatchResult(
        scores=[1.0 - 0.1 * i for i in range(len(flags))],
        true_positive=list(flags),
        matched_gt=matched,
        gt_matched=[i < sum(flags) for i in range(num_gts)],
    )


class TestMatch:
    """Greedy detection to ground-truth matching."""

    def test_each_gt_matched_once(self):
        gts = np.array([[0, 0, 10, 10]], dtype=float)
        result = match([det(0, 0, 10, 10, 0.9), det(0, 0, 10, 10, 0.8)], gts)
        assert result.true_positive == [True, False]
        assert result.matched_gt == [0, None]
        assert result.gt_matched == [True]

    def test_below_threshold_is_false_positive(self):
        gts = np.array([[0, 0, 10, 10]], dtype=float)
        result = match([det(5, 5, 15, 15, 0.9)], gts)
        assert result.true_positive == [False]

    def test_no_gts(self):
        result = match([det(0, 0, 1, 1, 0.5)], np.zeros((0, 4)))
        assert result.true_positive == [False] and result.num_gts == 0

    def test_orders_by_score(self):
        gts = np.array([[0, 0, 10, 10]], dtype=float)
        result = match([det(0, 0, 10, 10, 0.2), det(0, 0, 10, 10, 0.7)], gts)
        assert result.scores == [0.7, 0.2]
        assert result.true_positive == [True, False]

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        boxes = oracles.random_boxes(rng, 40, extent=60.0, min_side=5.0)
        gts = oracles.random_boxes(rng, 8, extent=60.0, min_side=5.0)
        scores = rng.uniform(size=40)
        dets = [Detection(box=Box.from_array(b), score=s) for b, s in zip(boxes, scores)]
        assert match(dets, gts, 0.3).true_positive == oracles.match_detections(
            boxes, scores, gts, 0.3
        )

    def test_restrict_drops_excluded_matches(self):
        result = MatchResult(
            scores=[0.9, 0.8, 0.7],
            true_positive=[True, False, True],
            matched_gt=[1, None, 0],
            gt_matched=[True, True],
        )
        restricted = restrict_to_gts(result, [False, True])
        assert restricted.scores == [0.9, 0.8]
        assert restricted.matched_gt == [0, None]
        assert restricted.num_gts == 1


class TestCurves:
    """Average precision and discrete ROC."""

    def test_hand_ap(self):
        curve = pr_curve([flags_result([True, False, True], 2)])
        assert curve.summary["ap"] == pytest.approx(0.8333, abs=1e-4)
        assert curve.summary["recall"] == 1.0

    def test_perfect_ap(self):
        assert pr_curve([flags_result([True, True], 2)]).summary["ap"] == 1.0

    def test_missed_gts_cap_recall(self):
        curve = pr_curve([flags_result([True], 4)])
        assert curve.summary["ap"] == pytest.approx(0.25)
        assert curve.summary["recall"] == 0.25

    def test_average_precision_envelope(self):
        recall = np.array([0.5, 0.5, 1.0])
        precision = np.array([1.0, 0.5, 2 / 3])
        assert average_precision(recall, precision) == pytest.approx(0.5 + 0.5 * 2 / 3)

    def test_hand_roc(self):
        curve = discrete_roc([flags_result([True, False, False, True], 2)], [0, 1, 2])
        assert curve.summary == pytest.approx({"tpr@0": 0.5, "tpr@1": 0.5, "tpr@2": 1.0})
        assert curve.points[0] == (0.0, 0.0)

    def test_roc_beyond_last_point(self):
        curve = discrete_roc([flags_result([True, False], 2)], [100])
        assert curve.summary["tpr@100"] == 0.5

    def test_no_gts(self):
        with pytest.raises(EvaluationInputError):
            pr_curve([flags_result([False], 0)])

    def test_write_curve(self, tmp_path):
        curve = pr_curve([flags_result([True, False, True], 2)])
        write_curve(curve, tmp_path / "pr.csv")
        lines = (tmp_path / "pr.csv").read_text().splitlines()
        assert lines[0] == "recall,precision"
        assert lines[1] == "0.5,1"
        assert len(lines) == 5
        assert lines[-1].startswith("# ap=")


class TestEvaluateDataset:
    """Dataset evaluation with difficulty buckets."""

    @pytest.fixture
    def eval_cfg(self):
        return EvalConfig(hard_max_side=8, medium_max_side=16, fp_checkpoints=[0, 1])

    @pytest.fixture
    def annotations(self):
        return {
            "img1": np.array([[0, 0, 6, 6], [20, 20, 32, 32]], dtype=float),
            "img2": np.array([[0, 0, 20, 20]], dtype=float),
        }

    def test_bucket_masks(self, annotations, eval_cfg):
        masks = bucket_masks(annotations["img1"], eval_cfg)
        assert masks["hard"].tolist() == [True, False]
        assert masks["medium"].tolist() == [False, True]
        assert masks["easy"].tolist() == [False, False]
        assert masks["all"].tolist() == [True, True]

    def test_buckets(self, annotations, eval_cfg):
        detections = {
            "img1": [det(20, 20, 32, 32, 0.9), det(40, 40, 50, 50, 0.8)],
            "img2": [det(0, 0, 20, 20, 0.7)],
        }
        summary, curves = evaluate_dataset(detections, annotations, eval_cfg)
        assert summary.num_images == 2
        assert summary.num_detections == 3
        # the FP on img1 sits above the only easy TP
        assert summary.bucket("easy").ap == pytest.approx(0.5)
        assert summary.bucket("medium").ap == pytest.approx(1.0)
        assert summary.bucket("hard").recall == 0.0
        assert summary.bucket("all").num_gts == 3
        assert set(curves) == {"pr_all", "pr_easy", "pr_medium", "pr_hard", "roc"}
        assert summary.tpr_at_fp == pytest.approx({"0": 1 / 3, "1": 2 / 3})

    def test_empty_bucket(self, eval_cfg):
        annotations = {"img": np.array([[0, 0, 30, 30]], dtype=float)}
        summary, curves = evaluate_dataset({"img": []}, annotations, eval_cfg)
        assert summary.bucket("hard").num_gts == 0
        assert summary.bucket("hard").ap is None
        assert "pr_hard" not in curves

    def test_unannotated_image_counts_false_positives(self, annotations, eval_cfg):
        detections = {"img2": [det(0, 0, 20, 20, 0.5)], "other": [det(0, 0, 5, 5, 0.9)]}
        summary, _ = evaluate_dataset(detections, annotations, eval_cfg)
        assert summary.num_images == 3
        assert summary.tpr_at_fp["0"] == 0.0
        assert summary.tpr_at_fp["1"] == pytest.approx(1 / 3)

    def test_no_gts(self, eval_cfg):
        with pytest.raises(EvaluationInputError):
            evaluate_dataset({}, {"img": np.zeros((0, 4))}, eval_cfg)


class TestDetectionFiles:
    """Detections text format."""

    def test_round_trip(self, tmp_path):
        detections = {
            "b": [det(1, 2, 3, 4, 0.25), det(0, 0, 8, 8, 0.75)],
            "a": [det(0.5, 0.5, 9.5, 9.5, 0.5)],
        }
        path = tmp_path / "dets.txt"
        write_detections(detections, path)
        lines = path.read_text().splitlines()
        assert lines == ["a 0.5 0.5 9.5 9.5 0.5", "b 0 0 8 8 0.75", "b 1 2 3 4 0.25"]
        loaded = read_detections(path)
        assert [d.score for d in loaded["b"]] == [0.75, 0.25]

    def test_malformed_line(self):
        with pytest.raises(EvaluationInputError, match="line 2"):
            parse_detections("a 0 0 1 1 0.5\na 0 0 1\n")

    def test_bad_score(self):
        with pytest.raises(EvaluationInputError):
            parse_detections("a 0 0 1 1 1.5\n")

    def test_missing(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            read_detections(tmp_path / "none.txt")
