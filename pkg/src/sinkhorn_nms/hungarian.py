"""Exact one-to-one assignment oracle and the divergence against it.

``hungarian_solve`` returns the globally optimal matching of cardinality
min(M, K), with a deterministic tie-break: among all optimal matchings it
returns the lexicographically smallest pair list.  The underlying linear
assignment subproblems are solved with scipy; the tie-break is enforced by
re-solving with pairs forced in lexicographic order, so optimality is never
sacrificed for determinism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import xlogy

from .cost import CostMatrix, cost_values
from .sinkhorn import SoftAssignment

# Relative tolerance when testing whether a forced partial matching can still
# be completed to an optimal one.
_OPT_TOL = 1e-9

KL_SMOOTHING_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class Assignment:
    """Discrete matching: (row, column) pairs, total cost, and 0/1 indicator."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float
    indicator: np.ndarray


def _lap_cost(values: np.ndarray) -> float:
    if values.shape[0] == 0 or values.shape[1] == 0:
        return 0.0
    rows, cols = linear_sum_assignment(values)
    return float(values[rows, cols].sum())


def hungarian_solve(C: CostMatrix | np.ndarray) -> Assignment:
    """Globally minimal matching of cardinality min(M, K).

    Rectangular matrices leave |M - K| rows or columns unmatched.  Among all
    optimal matchings the lexicographically smallest pair list (pairs sorted
    by row index, compared element-wise) is returned: the matching is rebuilt
    pair by pair, committing at each step to the smallest (row, column) whose
    forced inclusion still admits an optimal completion.
    """
    values = cost_values(C)
    M, K = values.shape
    n = min(M, K)
    optimum = _lap_cost(values)
    tol = _OPT_TOL * (1.0 + abs(optimum))

    pairs: list[tuple[int, int]] = []
    fixed_cost = 0.0
    rows = list(range(M))
    cols = list(range(K))
    for slot in range(n):
        need = n - slot - 1
        committed = False
        for ji, j in enumerate(rows):
            # Rows skipped here stay unmatched, which is only affordable when
            # enough rows remain to complete the matching.
            rows_after = rows[ji + 1 :]
            if len(rows_after) < need:
                break
            for k in cols:
                cols_after = [c for c in cols if c != k]
                rest = (
                    _lap_cost(values[np.ix_(rows_after, cols_after)]) if need else 0.0
                )
                if fixed_cost + values[j, k] + rest <= optimum + tol:
                    pairs.append((j, k))
                    fixed_cost += float(values[j, k])
                    rows = rows_after
                    cols = cols_after
                    committed = True
                    break
            if committed:
                break
        if not committed:  # pragma: no cover - optimum always admits completion
            raise RuntimeError("failed to reconstruct an optimal matching")

    indicator = np.zeros((M, K), dtype=np.float64)
    for j, k in pairs:
        indicator[j, k] = 1.0
    total = float(sum(values[j, k] for j, k in pairs))
    return Assignment(pairs=tuple(pairs), total_cost=total, indicator=indicator)


def kl_divergence(
    S: SoftAssignment | np.ndarray, Pstar: Assignment, eps: float = KL_SMOOTHING_EPS
) -> float:
    """KL divergence between the normalized coupling and the smoothed matching.

    Both arguments are normalized to total mass one; the indicator is
    smoothed by ``eps`` before normalization because it has zero entries
    wherever the coupling may spread mass.  Terms where the coupling is zero
    contribute nothing.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    Sm = S.matrix if isinstance(S, SoftAssignment) else np.asarray(S, dtype=np.float64)
    P = Pstar.indicator
    if Sm.shape != P.shape:
        raise ValueError(f"shape mismatch: {Sm.shape} vs {P.shape}")
    s_bar = Sm / Sm.sum()
    p_bar = (P + eps) / (P + eps).sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = xlogy(s_bar, np.where(s_bar > 0, s_bar / p_bar, 1.0))
    return max(0.0, float(terms.sum()))
