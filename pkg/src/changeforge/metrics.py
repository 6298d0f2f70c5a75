"""Evaluation: IoU, single-class AP@0.5, and generalization distance."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .codec import ChangeBox, Detection


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class EvalResult:
    ap50: float
    true_positives: int
    false_positives: int
    false_negatives: int
    pr_curve: tuple  # ((recall, precision), ...)


@dataclass(frozen=True)
class ResultsMatrix:
    rows: tuple  # method labels
    columns: tuple  # testset labels
    values: np.ndarray  # (len(rows), len(columns)) AP fractions

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.rows), len(self.columns)):
            raise EvaluationError(
                f"matrix shape {v.shape} does not match labels "
                f"({len(self.rows)}, {len(self.columns)})"
            )
        if np.any(v < 0) or np.any(v > 1):
            raise EvaluationError("AP values must lie in [0, 1]")


def iou(a: ChangeBox, b: ChangeBox) -> float:
    ax0, ay0, ax1, ay1 = a.corners()
    bx0, by0, bx1, by1 = b.corners()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


def average_precision(detections, ground_truths, iou_threshold: float = 0.5) -> EvalResult:
    """Single-class AP by greedy score-ordered matching.

    ``detections`` maps pair_id -> list of Detection; ``ground_truths``
    maps pair_id -> list of ChangeBox.  Detections are pooled across
    pairs, sorted by descending score (ties broken by pair id then
    in-pair index), and each one greedily claims the highest-IoU
    unmatched ground truth of its own pair if that IoU clears the
    threshold.  AP integrates the precision envelope over recall
    (all-point interpolation).
    """
    n_gt = sum(len(v) for v in ground_truths.values())
    if n_gt == 0:
        raise EvaluationError("AP is undefined with no ground-truth boxes")

    pooled = [
        (det.score, str(pid), idx, det)
        for pid, dets in detections.items()
        for idx, det in enumerate(dets)
    ]
    pooled.sort(key=lambda t: (-t[0], t[1], t[2]))

    matched: dict = {pid: [False] * len(gts) for pid, gts in ground_truths.items()}
    tp_flags = []
    for _, pid, _, det in pooled:
        gts = ground_truths.get(pid, [])
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(gts):
            if matched[pid][j]:
                continue
            v = iou(det.box, gt)
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0 and best_iou >= iou_threshold:
            matched[pid][best_j] = True
            tp_flags.append(True)
        else:
            tp_flags.append(False)

    tp = np.cumsum([1 if f else 0 for f in tp_flags])
    fp = np.cumsum([0 if f else 1 for f in tp_flags])
    recalls = tp / n_gt
    precisions = tp / np.maximum(tp + fp, 1)

    # precision envelope (running max from the right), integrated over recall
    ap = 0.0
    prev_recall = 0.0
    env = np.maximum.accumulate(precisions[::-1])[::-1] if len(tp_flags) else np.array([])
    for r, p in zip(recalls, env):
        if r > prev_recall:
            ap += (r - prev_recall) * p
            prev_recall = r

    n_tp = int(tp[-1]) if len(tp_flags) else 0
    return EvalResult(
        ap50=float(ap),
        true_positives=n_tp,
        false_positives=len(tp_flags) - n_tp,
        false_negatives=n_gt - n_tp,
        pr_curve=tuple(zip(recalls.tolist(), precisions.tolist())),
    )


def generalization_distance(m: ResultsMatrix) -> dict:
    """Per-row L2 distance to the columnwise-best AP vector."""
    values = np.asarray(m.values, dtype=np.float64)
    if values.size == 0:
        raise EvaluationError("empty results matrix")
    best = values.max(axis=0)
    dists = np.linalg.norm(best[None, :] - values, axis=1)
    return {label: float(d) for label, d in zip(m.rows, dists)}


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def read_results_csv(path) -> ResultsMatrix:
    """CSV with a testset-name header row; first column holds method labels."""
    with open(path, newline="") as f:
        reader = list(csv.reader(f))
    if len(reader) < 2 or len(reader[0]) < 2:
        raise EvaluationError(f"{path}: need a header row and at least one data row")
    columns = tuple(c.strip() for c in reader[0][1:])
    rows, values = [], []
    for line in reader[1:]:
        if not line or all(not c.strip() for c in line):
            continue
        rows.append(line[0].strip())
        try:
            values.append([float(c) for c in line[1:]])
        except ValueError as e:
            raise EvaluationError(f"{path}: non-numeric AP value in row {line[0]!r}") from e
    return ResultsMatrix(rows=tuple(rows), columns=columns, values=np.array(values))


def read_detections_json(path) -> dict:
    """JSON array of {pair_id, cx, cy, w, h, score} -> pair_id -> [Detection]."""
    with open(path) as f:
        raw = json.load(f)
    if not isinstance(raw, list):
        raise EvaluationError(f"{path}: expected a JSON array of detections")
    out: dict = {}
    for i, d in enumerate(raw):
        try:
            det = Detection(
                box=ChangeBox(cx=float(d["cx"]), cy=float(d["cy"]),
                              w=float(d["w"]), h=float(d["h"])),
                score=float(d["score"]),
            )
            pid = str(d["pair_id"])
        except (KeyError, TypeError, ValueError) as e:
            raise EvaluationError(f"{path}: bad detection record {i}: {e}") from e
        out.setdefault(pid, []).append(det)
    return out


def write_detections_json(detections: dict, path) -> None:
    records = [
        {
            "pair_id": pid,
            "cx": det.box.cx,
            "cy": det.box.cy,
            "w": det.box.w,
            "h": det.box.h,
            "score": det.score,
        }
        for pid, dets in sorted(detections.items())
        for det in dets
    ]
    with open(path, "w") as f:
        json.dump(records, f, indent=2)
        f.write("\n")
