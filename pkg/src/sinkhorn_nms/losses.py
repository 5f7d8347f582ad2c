"""Loss terms: matching cost, binary cross-entropy, mask smoothness, and totals.

The matching loss couples the cost matrix with the soft assignment and pulls
the assignment toward the discrete optimum through a smoothed KL term.  Its
gradient with respect to the costs treats the discrete matching as constant
(it is piecewise constant in the costs, so its derivative vanishes almost
everywhere) and routes the rest through the unrolled solver derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Box, Mask, quality_score, total_variation
from .hungarian import KL_SMOOTHING_EPS, Assignment, kl_divergence
from .sinkhorn import Marginals, SinkhornParams, SoftAssignment, grad_unrolled, solve
from .cost import CostMatrix, cost_values

BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Weights for the KL pull and the total-loss combination.

    ``lambda3`` is accepted for configuration compatibility but does not
    enter the total.
    """

    lambda_kl: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 0.0

    def __post_init__(self):
        for name in ("lambda_kl", "lambda1", "lambda2", "lambda3"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be finite and nonnegative")


@dataclass(frozen=True)
class LossReport:
    """Per-term values, the weighted total, and the total's term gradients.

    ``term_gradients`` holds (d total / d l_cls, d total / d l_match,
    d total / d l_reg) = (1, lambda1, lambda2) for chain-rule composition
    with the per-term derivative operations.
    """

    l_cls: float
    l_match: float
    l_reg: float
    total: float
    weights: LossWeights
    term_gradients: tuple[float, float, float]


def matching_loss(
    C: CostMatrix | np.ndarray,
    S: SoftAssignment | np.ndarray,
    Pstar: Assignment,
    lambda_kl: float,
) -> float:
    """Frobenius inner product <C, S> plus ``lambda_kl`` times the smoothed KL."""
    values = cost_values(C)
    Sm = S.matrix if isinstance(S, SoftAssignment) else np.asarray(S, dtype=np.float64)
    if values.shape != Sm.shape:
        raise ValueError(f"shape mismatch: {values.shape} vs {Sm.shape}")
    transport = float((values * Sm).sum())
    if lambda_kl == 0.0:
        return transport
    return transport + lambda_kl * kl_divergence(Sm, Pstar, KL_SMOOTHING_EPS)


def bce(p: float, y: int, eps: float = BCE_EPS) -> float:
    """Binary cross-entropy -y log p - (1 - y) log(1 - p), with p clamped."""
    p = min(1.0 - eps, max(eps, p))
    return float(-y * math.log(p) - (1 - y) * math.log(1.0 - p))


def bce_mean(ps: Sequence[float], ys: Sequence[int], eps: float = BCE_EPS) -> float:
    """Mean binary cross-entropy over a batch."""
    if len(ps) != len(ys):
        raise ValueError("probability and label batches must have equal length")
    if len(ps) == 0:
        raise ValueError("empty batch")
    return float(np.mean([bce(p, y, eps) for p, y in zip(ps, ys)]))


def tv_loss(masks: Sequence[Mask]) -> float:
    """Sum of total variations over all masks."""
    return float(sum(total_variation(m) for m in masks))


def total_loss(l_cls: float, l_match: float, l_reg: float, w: LossWeights) -> LossReport:
    """Weighted total l_cls + lambda1 * l_match + lambda2 * l_reg."""
    for name, val in (("l_cls", l_cls), ("l_match", l_match), ("l_reg", l_reg)):
        if not math.isfinite(val):
            raise ValueError(f"{name} must be finite")
    total = l_cls + w.lambda1 * l_match + w.lambda2 * l_reg
    return LossReport(
        l_cls=l_cls,
        l_match=l_match,
        l_reg=l_reg,
        total=total,
        weights=w,
        term_gradients=(1.0, w.lambda1, w.lambda2),
    )


def kl_grad_wrt_assignment(
    S: SoftAssignment | np.ndarray, Pstar: Assignment, eps: float = KL_SMOOTHING_EPS
) -> np.ndarray:
    """Derivative of the smoothed, normalized KL with respect to the coupling.

    With s_bar = S / T, T = sum(S):
    d KL / d S[a, b] = (log(s_bar[a, b] / p_bar[a, b]) - KL) / T.
    """
    Sm = S.matrix if isinstance(S, SoftAssignment) else np.asarray(S, dtype=np.float64)
    total = float(Sm.sum())
    s_bar = Sm / total
    p_bar = (Pstar.indicator + eps) / (Pstar.indicator + eps).sum()
    kl = kl_divergence(Sm, Pstar, eps)
    with np.errstate(divide="ignore"):
        log_ratio = np.log(s_bar) - np.log(p_bar)
    return (log_ratio - kl) / total


def grad_matching_wrt_cost(
    C: CostMatrix | np.ndarray,
    params: SinkhornParams,
    marg: Marginals,
    Pstar: Assignment,
    lambda_kl: float,
) -> np.ndarray:
    """Derivative of ``matching_loss`` with S produced by the solver.

    The explicit <C, S> term contributes S itself; the dependence of S on C
    flows through the unrolled solver derivative with upstream
    C + lambda_kl * dKL/dS.  The discrete matching is held constant.
    """
    values = cost_values(C)
    S = solve(values, params, marg)
    upstream = values.copy()
    if lambda_kl != 0.0:
        upstream = upstream + lambda_kl * kl_grad_wrt_assignment(S, Pstar)
    return S.matrix + grad_unrolled(values, params, marg, upstream)


def quality_labels(
    boxes: Sequence[Box], gts: Sequence[Box], thresh: float = 0.5
) -> np.ndarray:
    """Binary supervision targets: 1 where the best ground-truth IoU reaches ``thresh``."""
    return np.array(
        [1 if quality_score(b, gts) >= thresh else 0 for b in boxes], dtype=np.int64
    )
