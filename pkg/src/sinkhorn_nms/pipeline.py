"""End-to-end differentiable suppression pipeline and baseline comparison.

The pipeline clusters proposals into K latent regions, builds the assignment
cost matrix, solves for the soft assignment with uniform marginals,
aggregates each region's proposals by its normalized assignment weights, and
refines per-region probabilities under the entropy constraint.  With ground
truth present the refinement objective uses box-overlap quality scores; at
inference the aggregated scores stand in for them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import greedy_nms, soft_nms  # noqa: F401  (re-exported surface)
from .clustering import (
    DEFAULT_IOU_THRESH,
    DEFAULT_K_MAX,
    DEFAULT_SCORE_FLOOR,
    estimate_k,
    init_centroids,
)
from .cost import CostWeights, build_cost, kappa
from .geometry import Box, Mask, quality_score
from .proposals import GroundTruth, ProposalSet
from .refine import RefineParams, frank_wolfe
from .sinkhorn import (
    Marginals,
    SinkhornParams,
    SoftAssignment,
    contraction_rate,
    solve,
)

DEFAULT_SOFT_NMS_SIGMA = 0.5


@dataclass(frozen=True, eq=False)
class RefinedProposal:
    """Aggregate of the proposals softly assigned to one latent region."""

    box: Box
    score: float
    feature: np.ndarray
    mask: Mask | None
    source_weights: np.ndarray
    probability: float | None = None


@dataclass(frozen=True)
class AdaptiveKParams:
    iou_thresh: float = DEFAULT_IOU_THRESH
    score_floor: float = DEFAULT_SCORE_FLOOR
    k_max: int = DEFAULT_K_MAX


@dataclass(frozen=True)
class PipelineConfig:
    """Operating point for the full pipeline; ``k=None`` selects adaptive K."""

    sinkhorn: SinkhornParams = field(default_factory=SinkhornParams)
    weights: CostWeights = field(default_factory=CostWeights)
    refine: RefineParams = field(default_factory=RefineParams)
    k: int | None = None
    adaptive: AdaptiveKParams = field(default_factory=AdaptiveKParams)
    seed: int = 0


@dataclass(frozen=True, eq=False)
class PipelineDiagnostics:
    k: int
    kappa: float
    rate_bound: float
    marginal_violations: tuple[float, ...]
    sinkhorn_iterations: int
    log_domain: bool
    fw_iterations: int
    fw_objective: tuple[float, ...]


@dataclass(frozen=True)
class MethodMetrics:
    mean_quality: float
    count: int
    wall_clock_s: float


def _weighted_aggregate(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Convex combination computed relative to the heaviest contributor.

    Centering on the dominant value keeps the aggregate bit-exact when all
    contributors coincide; the final clip enforces the convex envelope
    against rounding.
    """
    base = values[int(np.argmax(weights))]
    out = base + (weights[:, None] * (values - base)).sum(axis=0)
    return np.clip(out, values.min(axis=0), values.max(axis=0))


def aggregate(S: SoftAssignment | np.ndarray, pset: ProposalSet) -> list[RefinedProposal]:
    """Collapse proposals into one refined proposal per latent region.

    Column k of the assignment is renormalized to sum to one and used as
    convex-combination weights for boxes, scores, features, and masks.
    Proposals without masks contribute nothing to the mask average; if no
    contributor has a mask the refined mask is absent.
    """
    Sm = S.matrix if isinstance(S, SoftAssignment) else np.asarray(S, dtype=np.float64)
    M, K = Sm.shape
    if M != len(pset):
        raise ValueError(f"assignment has {M} rows but the set has {len(pset)} proposals")
    boxes = pset.boxes()
    scores = pset.scores()
    feats = pset.features()
    refined: list[RefinedProposal] = []
    for k in range(K):
        col = Sm[:, k]
        total = float(col.sum())
        if total <= 0.0:
            raise ValueError(f"empty latent region: column {k} has no mass")
        w = col / total
        box_vals = _weighted_aggregate(boxes, w)
        score = float(_weighted_aggregate(scores[:, None], w)[0])
        feature = _weighted_aggregate(feats, w)
        mask = _aggregate_masks(pset, w)
        refined.append(
            RefinedProposal(
                box=Box(*box_vals),
                score=score,
                feature=feature,
                mask=mask,
                source_weights=w,
            )
        )
    return refined


def _aggregate_masks(pset: ProposalSet, w: np.ndarray) -> Mask | None:
    carriers = [(i, p.mask) for i, p in enumerate(pset) if p.mask is not None]
    if not carriers:
        return None
    shape = carriers[0][1].values.shape
    for _, m in carriers:
        if m.values.shape != shape:
            raise ValueError("masks must share a common grid to be aggregated")
    idx = np.array([i for i, _ in carriers])
    sub = w[idx]
    total = float(sub.sum())
    if total <= 0.0:
        return None
    sub = sub / total
    stack = np.stack([m.values for _, m in carriers])
    base = stack[int(np.argmax(sub))]
    values = base + (sub[:, None, None] * (stack - base)).sum(axis=0)
    return Mask(np.clip(values, 0.0, 1.0))


def dnms(
    pset: ProposalSet, gt: GroundTruth | None, cfg: PipelineConfig
) -> tuple[list[RefinedProposal], PipelineDiagnostics]:
    """Differentiable suppression: cluster, assign softly, aggregate, refine.

    Returns K refined proposals and the run diagnostics (cost diameter, rate
    bound, solver trace, refinement trace).  The entropy threshold is capped
    at ln(K), the largest value feasible for a K-point simplex.
    """
    M = len(pset)
    if M == 0:
        raise ValueError("no proposals")
    if cfg.k is not None:
        if cfg.k < 1:
            raise ValueError("k must be >= 1")
        K = min(cfg.k, M)
    else:
        K = estimate_k(
            pset,
            iou_thresh=cfg.adaptive.iou_thresh,
            score_floor=cfg.adaptive.score_floor,
            k_max=cfg.adaptive.k_max,
        )
    cents = init_centroids(pset, K, cfg.seed)
    C = build_cost(pset, cents, cfg.weights)
    marg = Marginals.uniform(M, K)
    S = solve(C, cfg.sinkhorn, marg)
    refined = aggregate(S, pset)
    if gt is not None:
        q = np.array([quality_score(r.box, gt.boxes) for r in refined])
    else:
        q = np.array([r.score for r in refined])
    fw_params = replace(cfg.refine, tau_H=min(cfg.refine.tau_H, math.log(K)))
    fw = frank_wolfe(q, fw_params)
    refined = [
        replace(r, probability=float(fw.p.p[k])) for k, r in enumerate(refined)
    ]
    diag = PipelineDiagnostics(
        k=K,
        kappa=kappa(C),
        rate_bound=contraction_rate(C, cfg.sinkhorn.tau),
        marginal_violations=S.violations,
        sinkhorn_iterations=S.iterations,
        log_domain=S.log_domain,
        fw_iterations=fw.iterations,
        fw_objective=fw.objective_trace,
    )
    return refined, diag


def compare(
    pset: ProposalSet, gt: GroundTruth, cfg: PipelineConfig
) -> dict[str, MethodMetrics]:
    """Run the pipeline and both baselines, reporting quality, count, and time."""
    if gt is None or len(gt.boxes) == 0:
        raise ValueError("compare requires non-empty ground truth")

    def mean_quality(boxes: list[Box]) -> float:
        return float(np.mean([quality_score(b, gt.boxes) for b in boxes]))

    out: dict[str, MethodMetrics] = {}

    start = time.perf_counter()
    refined, _ = dnms(pset, gt, cfg)
    elapsed = time.perf_counter() - start
    out["dnms"] = MethodMetrics(
        mean_quality=mean_quality([r.box for r in refined]),
        count=len(refined),
        wall_clock_s=elapsed,
    )

    start = time.perf_counter()
    kept = greedy_nms(pset, cfg.adaptive.iou_thresh)
    elapsed = time.perf_counter() - start
    out["greedy_nms"] = MethodMetrics(
        mean_quality=mean_quality([p.box for p in kept]),
        count=len(kept),
        wall_clock_s=elapsed,
    )

    start = time.perf_counter()
    decayed = soft_nms(pset, DEFAULT_SOFT_NMS_SIGMA, cfg.adaptive.score_floor)
    elapsed = time.perf_counter() - start
    out["soft_nms"] = MethodMetrics(
        mean_quality=mean_quality([p.box for p in decayed]),
        count=len(decayed),
        wall_clock_s=elapsed,
    )
    return out
