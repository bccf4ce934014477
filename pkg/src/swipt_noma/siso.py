"""Single-antenna design: closed-form power split inside a golden-section search.

For fixed beta the best power fraction alpha (share of x1) is the smallest
value meeting both QoS constraints, which has a closed form.  The resulting
user-2 SNR h(beta) is unimodal on the feasible beta interval, so a
golden-section search recovers the global optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .system import SisoInstance, SisoSolution, SolveStatus

GOLDEN_RATIO = 0.618
DEFAULT_EPS = 1e-4
CONSTRAINT_TOL = 1e-9


@dataclass(frozen=True)
class BetaInterval:
    beta_min: float
    beta_max: float
    feasible: bool

    @property
    def length(self) -> float:
        return self.beta_max - self.beta_min if self.feasible else 0.0


def feasible_beta_interval(inst: SisoInstance, gamma1: float) -> BetaInterval:
    """Splits for which some alpha in [0, 1] meets both constraints.

    Both constraints are monotone in alpha, so it suffices to test alpha = 1.
    """
    deficit = max(gamma1 - inst.h1, 0.0)
    relay = inst.h2 * inst.g
    if deficit == 0.0:
        beta_min = 0.0
    elif relay > 0.0:
        beta_min = deficit / relay
    else:
        beta_min = math.inf
    beta_max = 1.0 - gamma1 / inst.h2
    feasible = beta_max >= 0.0 and beta_min <= beta_max
    return BetaInterval(beta_min, beta_max, feasible)


def _resolution(inst: SisoInstance) -> float:
    """Absolute rounding error of (1 - beta) h2 and beta g h2 for a float beta."""
    return 4.0 * np.finfo(float).eps * inst.h2 * max(1.0, inst.g)


def _check_beta(beta: float):
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta={beta} must lie in [0, 1)")


def closed_form_terms(beta: float, inst: SisoInstance, gamma1: float) -> tuple[float, float]:
    """(A, B): alpha making the user-2 SIC constraint, resp. the user-1 QoS constraint, tight."""
    _check_beta(beta)
    eff = (1.0 - beta) * inst.h2
    if eff - gamma1 <= _resolution(inst):
        # at the top of the feasible interval up to rounding in (1 - beta) h2
        a_term = 1.0
    else:
        a_term = gamma1 * (eff + 1.0) / ((1.0 + gamma1) * eff)
    c = gamma1 - beta * inst.h2 * inst.g
    b_term = c * (inst.h1 + 1.0) / ((c + 1.0) * inst.h1)
    return a_term, b_term


def constraint_slacks(alpha: float, beta: float, inst: SisoInstance, gamma1: float) -> tuple[float, float]:
    """SINR minus target for (SIC at user 2, combined SINR at user 1)."""
    eff = (1.0 - beta) * inst.h2
    sic = alpha * eff / ((1.0 - alpha) * eff + 1.0) - gamma1
    qos = alpha * inst.h1 / ((1.0 - alpha) * inst.h1 + 1.0) + beta * inst.g * inst.h2 - gamma1
    return sic, qos


def optimal_alpha(beta: float, inst: SisoInstance, gamma1: float) -> float | None:
    a_term, b_term = closed_form_terms(beta, inst, gamma1)
    relay = inst.h2 * inst.g
    if relay > 0 and beta >= gamma1 / relay:
        alpha = min(a_term, 1.0)
    else:
        alpha = min(max(a_term, b_term), 1.0)
    sic, qos = constraint_slacks(alpha, beta, inst, gamma1)
    tol = CONSTRAINT_TOL * max(1.0, gamma1) + _resolution(inst)
    if sic < -tol or qos < -tol:
        return None
    return alpha


def evaluate_h(beta: float, inst: SisoInstance, gamma1: float) -> float:
    """User-2 SNR at the best alpha for this split, -inf when infeasible."""
    if not 0.0 <= beta < 1.0:
        return -math.inf
    alpha = optimal_alpha(beta, inst, gamma1)
    if alpha is None:
        return -math.inf
    return (1.0 - alpha) * (1.0 - beta) * inst.h2


def _infeasible() -> SisoSolution:
    return SisoSolution(math.nan, math.nan, math.nan, SolveStatus.INFEASIBLE)


def gss_solve(
    inst: SisoInstance,
    gamma1: float,
    eps: float = DEFAULT_EPS,
    search: str = "feasible",
) -> SisoSolution:
    """Golden-section search over beta.

    ``search="feasible"`` brackets the feasible interval; ``search="unit"``
    brackets [0, 1] and lets infeasible points score -inf.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    interval = feasible_beta_interval(inst, gamma1)
    if not interval.feasible:
        return _infeasible()
    if search == "feasible":
        lo, hi = interval.beta_min, interval.beta_max
    elif search == "unit":
        lo, hi = 0.0, 1.0
    else:
        raise ValueError(f"unknown search mode {search!r}")

    a = GOLDEN_RATIO
    iterations = 0
    history = []
    while hi - lo > eps:
        span = hi - lo
        b1 = lo + (1.0 - a) * span
        b2 = lo + a * span
        h1, h2 = evaluate_h(b1, inst, gamma1), evaluate_h(b2, inst, gamma1)
        if h1 >= h2:
            hi = b2
        else:
            lo = b1
        iterations += 1
        history.append(max(h1, h2))
    beta = 0.5 * (lo + hi)
    alpha = optimal_alpha(beta, inst, gamma1) if beta < 1.0 else None
    if alpha is None:
        return SisoSolution(math.nan, beta, math.nan, SolveStatus.INFEASIBLE, iterations, history)
    objective = (1.0 - alpha) * (1.0 - beta) * inst.h2
    return SisoSolution(alpha, beta, objective, SolveStatus.OPTIMAL, iterations, history)


def gss_iteration_bound(length: float, eps: float) -> int:
    if length <= eps:
        return 0
    return math.ceil(math.log(eps / length) / math.log(GOLDEN_RATIO))


@dataclass(frozen=True)
class BruteForceResult:
    alpha: float
    beta: float
    objective: float
    feasible: bool
    grid_n: int


def brute_force_siso(inst: SisoInstance, gamma1: float, grid_n: int = 2001) -> BruteForceResult:
    """Exhaustive maximum over a grid_n x grid_n lattice on [0, 1]^2."""
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    grid = np.linspace(0.0, 1.0, grid_n)
    alpha = grid[None, :]
    best = (-math.inf, math.nan, math.nan)
    chunk = max(1, 2_000_000 // grid_n)
    for lo in range(0, grid_n, chunk):
        beta = grid[lo : lo + chunk, None]
        eff = (1.0 - beta) * inst.h2
        with np.errstate(divide="ignore", invalid="ignore"):
            sic = alpha * eff / ((1.0 - alpha) * eff + 1.0)
            qos = alpha * inst.h1 / ((1.0 - alpha) * inst.h1 + 1.0) + beta * inst.g * inst.h2
        ok = (sic >= gamma1) & (qos >= gamma1)
        obj = np.where(ok, (1.0 - alpha) * eff, -np.inf)
        k = int(np.argmax(obj))
        i, j = divmod(k, grid_n)
        if obj[i, j] > best[0]:
            best = (float(obj[i, j]), float(grid[j]), float(grid[lo + i]))
    if best[0] == -math.inf:
        return BruteForceResult(math.nan, math.nan, math.nan, False, grid_n)
    return BruteForceResult(best[1], best[2], best[0], True, grid_n)


# ---------------------------------------------------------------------------
# Analytic helpers on the QoS-limited branch (alpha = B)
# ---------------------------------------------------------------------------


def f_value(beta: float, inst: SisoInstance, gamma1: float) -> float:
    """f(beta) = B(beta) * (beta - 1) - beta, so that h = h2 * (1 + f) when alpha = B."""
    _, b_term = closed_form_terms(beta, inst, gamma1)
    return b_term * (beta - 1.0) - beta


def f_prime(beta: float, inst: SisoInstance, gamma1: float) -> float:
    hg = inst.h2 * inst.g
    den = (gamma1 - beta * hg + 1.0) ** 2 * inst.h1**2
    if den == 0.0:
        raise ZeroDivisionError("f_prime denominator vanishes")
    num = (hg**2 * beta**2 - 2.0 * hg * (gamma1 + 1.0) * beta + hg + gamma1**2 + gamma1) * inst.h1 * (inst.h1 + 1.0)
    return num / den - 1.0


def delta_sign(beta: float, inst: SisoInstance, gamma1: float) -> float:
    """Numerator minus denominator of f'(beta) + 1; shares the sign of f'."""
    hg = inst.h2 * inst.g
    return inst.h1 * (hg * beta - (gamma1 + 1.0)) ** 2 + inst.h1 * (hg - (gamma1 + 1.0)) * (inst.h1 + 1.0)


def count_strict_local_maxima(values: np.ndarray, tol: float = 1e-9) -> int:
    """Strict local maxima of a sampled curve, merging plateaus within tol."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0
    # collapse plateaus
    keep = [v[0]]
    for val in v[1:]:
        if abs(val - keep[-1]) > tol * max(1.0, abs(val)):
            keep.append(val)
    k = np.array(keep)
    if k.size == 1:
        return 1
    count = 0
    for i in range(k.size):
        left = k[i - 1] if i > 0 else -np.inf
        right = k[i + 1] if i + 1 < k.size else -np.inf
        if k[i] > left and k[i] > right:
            count += 1
    return count
