"""Empirical verification harnesses: gradient checks and convergence sweeps.

Gradient checks compare reverse-mode derivatives against central finite
differences on seeded random instances.  Errors are normalized by the
largest finite-difference magnitude, so the reported number is
max|g - g_fd| / max|g_fd|.  Convergence sweeps run the Hilbert-metric
contraction check across a temperature grid and confirm that the
entropy-constrained refinement reaches the oracle optimum of its linear
objective within two iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .hungarian import hungarian_solve
from .losses import grad_matching_wrt_cost, matching_loss
from .refine import RefineParams, duality_gap, entropy, frank_wolfe, lmo_entropy
from .rng import SplitMix64
from .sinkhorn import (
    Marginals,
    SinkhornParams,
    grad_analytic,
    grad_unrolled,
    solve,
    verify_contraction,
)

DEFAULT_FD_STEP = 1e-5
# Beyond this step the central difference no longer approximates a derivative.
ABSURD_FD_STEP = 0.1

# Early stopping is disabled during gradient checks: a perturbed input could
# otherwise change the number of executed iterations and make the loss
# discontinuous at the finite-difference scale.
_NO_EARLY_STOP_TOL = 1e-300


def fd_threshold(tau: float) -> float:
    """Pass threshold for normalized gradient error as a function of temperature.

    Sharpness of the coupling grows like exp(range / tau), which inflates
    both the true curvature and the finite-difference truncation error:

        tau >= 0.5   -> 1e-4
        0.1 <= tau < 0.5 -> 1e-2
        tau < 0.1    -> 1e-1
    """
    if tau >= 0.5:
        return 1e-4
    if tau >= 0.1:
        return 1e-2
    return 1e-1


@dataclass(frozen=True)
class GradCheckTrial:
    seed: int
    m: int
    k: int
    error: float


@dataclass(frozen=True)
class GradCheckReport:
    kind: str
    tau: float
    iters: int
    fd_step: float
    threshold: float
    trials: tuple[GradCheckTrial, ...]
    max_error: float
    passed: bool
    note: str | None = None


def random_matrix(rng: SplitMix64, m: int, k: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    return np.array([[rng.uniform(lo, hi) for _ in range(k)] for _ in range(m)])


def central_difference(f: Callable[[np.ndarray], float], X: np.ndarray, step: float) -> np.ndarray:
    """Central finite differences of a scalar function of a matrix."""
    grad = np.zeros_like(X)
    for idx in np.ndindex(*X.shape):
        plus = X.copy()
        plus[idx] += step
        minus = X.copy()
        minus[idx] -= step
        grad[idx] = (f(plus) - f(minus)) / (2.0 * step)
    return grad


def normalized_error(grad: np.ndarray, fd: np.ndarray) -> float:
    scale = max(float(np.abs(fd).max()), 1e-12)
    return float(np.abs(grad - fd).max()) / scale


def _sizes(rng: SplitMix64, m_max: int, k_max: int) -> tuple[int, int]:
    return 2 + rng.randint(max(1, m_max - 1)), 2 + rng.randint(max(1, k_max - 1))


def gradcheck_unrolled(
    m_max: int = 5,
    k_max: int = 4,
    tau: float = 1.0,
    iters: int = 10,
    trials: int = 10,
    seed: int = 0,
    fd_step: float = DEFAULT_FD_STEP,
    threshold: float | None = None,
) -> GradCheckReport:
    """Unrolled solver derivative versus central differences of <U, S(C)>."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    threshold = fd_threshold(tau) if threshold is None else threshold
    rng = SplitMix64(seed)
    params = SinkhornParams(tau=tau, iters=iters, tol=_NO_EARLY_STOP_TOL)
    results = []
    for t in range(trials):
        m, k = _sizes(rng, m_max, k_max)
        C = random_matrix(rng, m, k)
        U = random_matrix(rng, m, k, -1.0, 1.0)
        marg = Marginals.uniform(m, k)
        grad = grad_unrolled(C, params, marg, U)
        fd = central_difference(
            lambda X: float((U * solve(X, params, marg).matrix).sum()), C, fd_step
        )
        results.append(GradCheckTrial(seed=t, m=m, k=k, error=normalized_error(grad, fd)))
    max_error = max(r.error for r in results)
    return GradCheckReport(
        kind="unrolled",
        tau=tau,
        iters=iters,
        fd_step=fd_step,
        threshold=threshold,
        trials=tuple(results),
        max_error=max_error,
        passed=max_error < threshold,
        note=_step_note(fd_step),
    )


def gradcheck_matching(
    m_max: int = 5,
    k_max: int = 4,
    tau: float = 1.0,
    iters: int = 10,
    trials: int = 10,
    seed: int = 0,
    fd_step: float = DEFAULT_FD_STEP,
    lambda_kl: float = 0.5,
    threshold: float | None = None,
) -> GradCheckReport:
    """Matching-loss derivative versus central differences.

    The discrete matching is frozen at the base point, matching the
    derivative's piecewise-constant treatment of it.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    threshold = fd_threshold(tau) if threshold is None else threshold
    rng = SplitMix64(seed)
    params = SinkhornParams(tau=tau, iters=iters, tol=_NO_EARLY_STOP_TOL)
    results = []
    for t in range(trials):
        m, k = _sizes(rng, m_max, k_max)
        C = random_matrix(rng, m, k)
        marg = Marginals.uniform(m, k)
        Pstar = hungarian_solve(C)
        grad = grad_matching_wrt_cost(C, params, marg, Pstar, lambda_kl)
        fd = central_difference(
            lambda X: matching_loss(X, solve(X, params, marg), Pstar, lambda_kl),
            C,
            fd_step,
        )
        results.append(GradCheckTrial(seed=t, m=m, k=k, error=normalized_error(grad, fd)))
    max_error = max(r.error for r in results)
    return GradCheckReport(
        kind="matching",
        tau=tau,
        iters=iters,
        fd_step=fd_step,
        threshold=threshold,
        trials=tuple(results),
        max_error=max_error,
        passed=max_error < threshold,
        note=_step_note(fd_step),
    )


def _step_note(fd_step: float) -> str | None:
    if fd_step >= ABSURD_FD_STEP:
        return (
            f"finite-difference step {fd_step:g} is far too large for a meaningful "
            "derivative comparison; use a step near 1e-5"
        )
    return None


@dataclass(frozen=True)
class JacobianCheckReport:
    """Closed-form coupling Jacobian checked where it is provably exact.

    ``softmax_max_error`` compares the formula against finite differences of
    the single-global-normalization map.  ``sinkhorn_gap`` measures its
    deviation from the unrolled derivative of the fully scaled solver; this
    is reported, not asserted.
    """

    softmax_max_error: float
    sinkhorn_gap: float
    trials: int
    passed: bool
    threshold: float


def _global_softmax(values: np.ndarray, tau: float) -> np.ndarray:
    z = -values / tau
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def jacobian_formula_check(
    trials: int = 20,
    m_max: int = 4,
    k_max: int = 3,
    tau: float = 1.0,
    seed: int = 0,
    fd_step: float = DEFAULT_FD_STEP,
    threshold: float = 1e-6,
) -> JacobianCheckReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = SplitMix64(seed)
    softmax_err = 0.0
    sink_gap = 0.0
    params = SinkhornParams(tau=tau, iters=10, tol=_NO_EARLY_STOP_TOL)
    for _ in range(trials):
        m, k = _sizes(rng, m_max, k_max)
        C = random_matrix(rng, m, k)
        U = random_matrix(rng, m, k, -1.0, 1.0)
        S = _global_softmax(C, tau)
        grad = grad_analytic(S, tau, U)
        fd = central_difference(
            lambda X: float((U * _global_softmax(X, tau)).sum()), C, fd_step
        )
        softmax_err = max(softmax_err, normalized_error(grad, fd))

        marg = Marginals.uniform(m, k)
        S_full = solve(C, params, marg)
        g_analytic = grad_analytic(S_full, tau, U)
        g_unrolled = grad_unrolled(C, params, marg, U)
        sink_gap = max(sink_gap, normalized_error(g_analytic, g_unrolled))
    return JacobianCheckReport(
        softmax_max_error=softmax_err,
        sinkhorn_gap=sink_gap,
        trials=trials,
        passed=softmax_err < threshold,
        threshold=threshold,
    )


@dataclass(frozen=True)
class ContractionRow:
    tau: float
    trial: int
    m: int
    k: int
    max_ratio: float | None
    rate_bound: float
    passed: bool


@dataclass(frozen=True)
class FrankWolfeRow:
    trial: int
    k: int
    tau_H: float
    gap: float
    iterations: int
    feasible: bool
    passed: bool


@dataclass(frozen=True)
class ConvergenceSweepReport:
    contraction: tuple[ContractionRow, ...]
    frank_wolfe: tuple[FrankWolfeRow, ...]
    passed: bool


def contraction_sweep(
    taus: tuple[float, ...] = (0.5, 1.0, 2.0),
    trials: int = 20,
    m_max: int = 10,
    k_max: int = 6,
    seed: int = 0,
    iters: int = 5000,
    log_domain: bool | None = None,
) -> tuple[ContractionRow, ...]:
    """Hilbert-ratio contraction check over a grid of temperatures."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = SplitMix64(seed)
    rows = []
    for tau in taus:
        for t in range(trials):
            m, k = _sizes(rng, m_max, k_max)
            C = random_matrix(rng, m, k)
            params = SinkhornParams(tau=tau, iters=iters, tol=1e-12, log_domain=log_domain)
            report = verify_contraction(C, params, Marginals.uniform(m, k))
            rows.append(
                ContractionRow(
                    tau=tau,
                    trial=t,
                    m=m,
                    k=k,
                    max_ratio=report.max_ratio,
                    rate_bound=report.rate_bound,
                    passed=report.passed,
                )
            )
    return tuple(rows)


def frank_wolfe_sweep(
    trials: int = 100,
    k_max: int = 12,
    seed: int = 0,
    gap_tol_scale: float = 1e-6,
) -> tuple[FrankWolfeRow, ...]:
    """One-step optimality of the linear refinement objective on random inputs.

    For each random (q, tau_H) draw the returned point must be feasible and
    its objective within ``gap_tol_scale * max|q|`` of the oracle optimum in
    at most two iterations.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = SplitMix64(seed)
    rows = []
    for t in range(trials):
        k = 2 + rng.randint(k_max - 1)
        q = np.array([rng.uniform(0.0, 1.0) for _ in range(k)])
        tau_H = rng.uniform(0.0, math.log(k))
        params = RefineParams(tau_H=tau_H)
        result = frank_wolfe(q, params)
        feasible = (
            abs(float(result.p.p.sum()) - 1.0) <= 1e-10
            and entropy(result.p) >= tau_H - 1e-6
        )
        oracle = lmo_entropy(q, params)
        gap = abs(float(q @ oracle.p) - result.objective_trace[-1])
        tol = gap_tol_scale * max(float(np.abs(q).max()), 1e-12)
        passed = feasible and result.iterations <= 2 and gap <= tol
        rows.append(
            FrankWolfeRow(
                trial=t,
                k=k,
                tau_H=tau_H,
                gap=gap,
                iterations=result.iterations,
                feasible=feasible,
                passed=passed,
            )
        )
    return tuple(rows)


def convergence_sweep(
    taus: tuple[float, ...] = (0.5, 1.0, 2.0),
    trials: int = 20,
    m_max: int = 10,
    k_max: int = 6,
    seed: int = 0,
    log_domain: bool | None = None,
) -> ConvergenceSweepReport:
    contraction = contraction_sweep(
        taus=taus, trials=trials, m_max=m_max, k_max=k_max, seed=seed, log_domain=log_domain
    )
    fw = frank_wolfe_sweep(trials=max(trials, 20), seed=seed + 1)
    passed = all(r.passed for r in contraction) and all(r.passed for r in fw)
    return ConvergenceSweepReport(contraction=contraction, frank_wolfe=fw, passed=passed)


def duality_gap_at_optimum(q: np.ndarray, params: RefineParams) -> float:
    """Duality gap evaluated at the Frank-Wolfe output (should be ~0)."""
    result = frank_wolfe(q, params)
    return duality_gap(result.p, q, params)
