"""Classical suppression baselines: greedy NMS and Gaussian soft-NMS.

Both are deterministic: candidates are processed in descending score order
with ties broken by lower proposal id, and outputs preserve the input order.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .proposals import ProposalSet


def pairwise_iou(boxes: np.ndarray) -> np.ndarray:
    """Symmetric (n, n) IoU matrix for boxes given as an (n, 4) array."""
    x1, y1, x2, y2 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    areas = (x2 - x1) * (y2 - y1)
    iw = np.minimum(x2[:, None], x2[None, :]) - np.maximum(x1[:, None], x1[None, :])
    ih = np.minimum(y2[:, None], y2[None, :]) - np.maximum(y1[:, None], y1[None, :])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    union = areas[:, None] + areas[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0.0, inter / union, 0.0)
    return out


def _processing_order(pset: ProposalSet) -> list[int]:
    return sorted(range(len(pset)), key=lambda i: (-pset.proposals[i].score, pset.proposals[i].id))


def greedy_nms(pset: ProposalSet, iou_thresh: float) -> ProposalSet:
    """Keep proposals greedily by score, suppressing overlaps above the threshold.

    A candidate is suppressed when its IoU with any already-kept proposal is
    strictly greater than ``iou_thresh``.
    """
    if not (0.0 < iou_thresh < 1.0):
        raise ValueError("iou_thresh must lie strictly between 0 and 1")
    if len(pset) == 0:
        return pset
    ious = pairwise_iou(pset.boxes())
    suppressed = np.zeros(len(pset), dtype=bool)
    kept: list[int] = []
    for i in _processing_order(pset):
        if suppressed[i]:
            continue
        kept.append(i)
        # only kept boxes suppress; a box never outlives its own row update
        # because it is appended first
        suppressed |= ious[i] > iou_thresh
    kept_set = set(kept)
    survivors = tuple(p for idx, p in enumerate(pset) if idx in kept_set)
    return replace(pset, proposals=survivors)


def soft_nms(pset: ProposalSet, sigma: float, score_floor: float) -> ProposalSet:
    """Gaussian score-decay suppression.

    Proposals are visited in descending original-score order; each visit keeps
    the current proposal and decays every later candidate by
    exp(-iou^2 / sigma) against it, discarding candidates whose decayed score
    drops below ``score_floor``.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if len(pset) == 0:
        return pset
    ious = pairwise_iou(pset.boxes())
    order = _processing_order(pset)
    scores = {i: pset.proposals[i].score for i in order}
    dropped: set[int] = set()
    kept: list[int] = []
    for pos, i in enumerate(order):
        if i in dropped:
            continue
        kept.append(i)
        for j in order[pos + 1 :]:
            if j in dropped:
                continue
            scores[j] *= math.exp(-(ious[i, j] ** 2) / sigma)
            if scores[j] < score_floor:
                dropped.add(j)
    kept_set = set(kept)
    survivors = tuple(
        replace(p, score=scores[idx]) for idx, p in enumerate(pset) if idx in kept_set
    )
    return replace(pset, proposals=survivors)
