import numpy as np
import pytest

from changeforge.codec import ChangeBox, Detection
from changeforge.metrics import (
    EvaluationError,
    ResultsMatrix,
    average_precision,
    generalization_distance,
    iou,
)


def box(x, y, w, h):
    # corner-form helper: (x, y) top-left
    return ChangeBox(cx=x + w / 2, cy=y + h / 2, w=w, h=h)


def ap_oracle(detections, ground_truths, threshold=0.5):
    """Brute-force PR enumeration, independent of the implementation.

    Re-runs greedy matching from scratch for every score cutoff and
    integrates the precision envelope with nested loops.
    """
    pooled = [
        (det.score, str(pid), idx, det)
        for pid, dets in detections.items()
        for idx, det in enumerate(dets)
    ]
    pooled.sort(key=lambda t: (-t[0], t[1], t[2]))
    n_gt = sum(len(v) for v in ground_truths.values())

    points = []
    for k in range(1, len(pooled) + 1):
        # full re-match on the top-k prefix
        used = {pid: set() for pid in ground_truths}
        tp = 0
        for _, pid, _, det in pooled[:k]:
            gts = ground_truths.get(pid, [])
            best, bj = 0.0, -1
            for j, gt in enumerate(gts):
                if j in used.get(pid, set()):
                    continue
                v = iou(det.box, gt)
                if v > best:
                    best, bj = v, j
            if bj >= 0 and best >= threshold:
                used.setdefault(pid, set()).add(bj)
                tp += 1
        points.append((tp / n_gt, tp / k))

    ap = 0.0
    prev = 0.0
    for i, (r, _) in enumerate(points):
        if r > prev:
            p_env = max(p for rr, p in points[i:])
            ap += (r - prev) * p_env
            prev = r
    return ap


class TestIoU:
    def test_identical(self):
        b = box(1, 2, 10, 20)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(box(0, 0, 5, 5), box(10, 10, 5, 5)) == 0.0

    def test_partial_overlap_value(self):
        assert iou(box(0, 0, 2, 2), box(1, 1, 2, 2)) == pytest.approx(1 / 7)

    def test_symmetric(self, rng):
        for _ in range(50):
            a = box(*rng.uniform(0, 50, 2), *rng.uniform(1, 30, 2))
            b = box(*rng.uniform(0, 50, 2), *rng.uniform(1, 30, 2))
            assert iou(a, b) == pytest.approx(iou(b, a), rel=1e-15)
            assert 0.0 <= iou(a, b) <= 1.0

    def test_one_only_for_identical(self, rng):
        a = box(0, 0, 10, 10)
        b = box(0, 0, 10, 11)
        assert iou(a, b) < 1.0


class TestAveragePrecision:
    def test_perfect_single_detection(self):
        gts = {"p0": [box(10, 10, 20, 20)]}
        dets = {"p0": [Detection(box=box(12, 10, 20, 20), score=0.8)]}
        assert iou(dets["p0"][0].box, gts["p0"][0]) >= 0.5
        res = average_precision(dets, gts)
        assert res.ap50 == 1.0
        assert (res.true_positives, res.false_positives, res.false_negatives) == (1, 0, 0)

    def test_fp_then_tp_one_missed(self):
        gts = {"p0": [box(0, 0, 10, 10), box(50, 50, 10, 10)]}
        dets = {
            "p0": [
                Detection(box=box(100, 100, 10, 10), score=0.95),  # FP
                Detection(box=box(0, 0, 10, 10), score=0.9),  # TP
            ]
        }
        res = average_precision(dets, gts)
        assert res.ap50 == pytest.approx(0.25)
        assert res.ap50 == pytest.approx(ap_oracle(dets, gts))

    def test_duplicate_detection_is_fp(self):
        gts = {"p0": [box(0, 0, 10, 10)]}
        dets = {
            "p0": [
                Detection(box=box(0, 0, 10, 10), score=0.9),
                Detection(box=box(1, 0, 10, 10), score=0.8),
            ]
        }
        res = average_precision(dets, gts)
        assert res.true_positives == 1
        assert res.false_positives == 1

    def test_no_ground_truth_is_error(self):
        with pytest.raises(EvaluationError):
            average_precision({"p": []}, {"p": []})

    def test_matches_oracle_on_random_instances(self, rng):
        for _ in range(100):
            n_pairs = int(rng.integers(1, 6))
            gts, dets = {}, {}
            for p in range(n_pairs):
                pid = f"p{p}"
                gts[pid] = [
                    box(*rng.uniform(0, 80, 2), *rng.uniform(4, 30, 2))
                    for _ in range(int(rng.integers(1, 5)))
                ]
                dets[pid] = [
                    Detection(
                        box=box(*rng.uniform(0, 80, 2), *rng.uniform(4, 30, 2)),
                        score=float(rng.uniform(0.1, 1.0)),
                    )
                    for _ in range(int(rng.integers(0, 6)))
                ]
            res = average_precision(dets, gts)
            assert res.ap50 == ap_oracle(dets, gts)

    def test_extra_lowest_score_fp_never_raises_ap(self, rng):
        gts = {"p0": [box(0, 0, 10, 10), box(40, 40, 8, 8)]}
        dets = {
            "p0": [
                Detection(box=box(0, 0, 10, 10), score=0.9),
                Detection(box=box(60, 60, 5, 5), score=0.4),
            ]
        }
        base = average_precision(dets, gts).ap50
        dets2 = {
            "p0": dets["p0"] + [Detection(box=box(70, 70, 5, 5), score=0.1)]
        }
        assert average_precision(dets2, gts).ap50 <= base

    def test_added_tp_never_lowers_ap(self):
        gts = {"p0": [box(0, 0, 10, 10), box(40, 40, 8, 8)]}
        dets = {"p0": [Detection(box=box(0, 0, 10, 10), score=0.9)]}
        base = average_precision(dets, gts).ap50
        dets2 = {
            "p0": dets["p0"] + [Detection(box=box(40, 40, 8, 8), score=0.5)]
        }
        assert average_precision(dets2, gts).ap50 >= base


class TestGeneralizationDistance:
    def test_row_equal_to_best_is_zero(self):
        m = ResultsMatrix(
            rows=("a", "b"),
            columns=("t1", "t2"),
            values=np.array([[0.9, 0.8], [0.5, 0.8]]),
        )
        d = generalization_distance(m)
        assert d["a"] == 0.0
        assert d["b"] == pytest.approx(0.4)

    def test_column_permutation_invariant(self, rng):
        values = rng.uniform(0, 1, size=(4, 6))
        m1 = ResultsMatrix(
            rows=tuple("abcd"), columns=tuple("123456"), values=values
        )
        perm = rng.permutation(6)
        m2 = ResultsMatrix(
            rows=tuple("abcd"),
            columns=tuple(np.array(list("123456"))[perm]),
            values=values[:, perm],
        )
        d1, d2 = generalization_distance(m1), generalization_distance(m2)
        for k in d1:
            assert d1[k] == pytest.approx(d2[k], rel=1e-12)

    def test_non_negative(self, rng):
        values = rng.uniform(0, 1, size=(5, 4))
        m = ResultsMatrix(rows=tuple("abcde"), columns=tuple("wxyz"), values=values)
        assert all(v >= 0 for v in generalization_distance(m).values())

    def test_frozen_benchmark_row(self):
        # distance of a known AP row against the per-testset bests
        best = (1.000, 0.865, 0.750, 0.715, 0.581, 0.478)
        row = (0.971, 0.850, 0.742, 0.715, 0.581, 0.357)
        m = ResultsMatrix(
            rows=("best", "row"),
            columns=tuple("abcdef"),
            values=np.array([best, row]),
        )
        assert generalization_distance(m)["row"] == pytest.approx(0.126, abs=1e-3)

    def test_empty_matrix_rejected(self):
        with pytest.raises(EvaluationError):
            ResultsMatrix(rows=(), columns=("a",), values=np.zeros((1, 1)))
