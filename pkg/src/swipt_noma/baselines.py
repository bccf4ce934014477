"""Comparison strategies: noncooperative NOMA and two TDMA variants.

Rates are ``bandwidth_hz * log2(1 + SINR)`` (bandwidth 1 gives bit/s/Hz).
User 1 is credited with its target rate whenever the target is met, so sum
rates differ across strategies only through user 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .miso import _finish, solve_p3
from .system import MisoInstance, SisoInstance, SolveStatus

NONCOOP_NOMA = "noncoop_noma"
OMA_DYNAMIC = "oma_dynamic"
OMA_FIXED = "oma_fixed"


@dataclass
class BaselineResult:
    strategy: str
    R1: float
    R2: float
    feasible: bool
    internals: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.feasible:
            self.R1 = 0.0
            self.R2 = 0.0

    @property
    def Rsum(self) -> float:
        return self.R1 + self.R2


def _check_gamma(gamma_nc: float):
    if not gamma_nc > 0:
        raise ValueError("gamma_nc must be positive")


def _check_rate(r_target: float):
    if not r_target >= 0:
        raise ValueError("R_target must be nonnegative")


def noncoop_alpha(inst: SisoInstance, gamma_nc: float) -> float:
    """Smallest share of power for x1 meeting the SINR target at both users."""
    _check_gamma(gamma_nc)
    return max(gamma_nc * (h + 1.0) / ((gamma_nc + 1.0) * h) for h in (inst.h1, inst.h2))


def noncoop_noma_siso(inst: SisoInstance, gamma_nc: float, bandwidth_hz: float = 1.0) -> BaselineResult:
    alpha = noncoop_alpha(inst, gamma_nc)
    if alpha > 1.0:
        return BaselineResult(NONCOOP_NOMA, 0.0, 0.0, False, {"alpha": alpha})
    r1 = bandwidth_hz * math.log2(1.0 + gamma_nc)
    r2 = bandwidth_hz * math.log2(1.0 + (1.0 - alpha) * inst.h2)
    return BaselineResult(NONCOOP_NOMA, r1, r2, True, {"alpha": alpha})


def noncoop_noma_miso(
    inst: MisoInstance,
    gamma_nc: float,
    bandwidth_hz: float = 1.0,
    tol: float | None = None,
    rng: np.random.Generator | None = None,
) -> BaselineResult:
    """Relaxed beamforming without the relaying stage.

    This is the fixed-split SDP at beta = 0 with the direct link alone
    carrying user 1's target.
    """
    _check_gamma(gamma_nc)
    kwargs = {} if tol is None else {"tol": tol}
    (res,) = solve_p3(inst, gamma_nc, [(0.0, gamma_nc)], **kwargs)
    if res.W1 is None:
        return BaselineResult(NONCOOP_NOMA, 0.0, 0.0, False, {"status": res.status.value})
    sol = _finish(inst, gamma_nc, 0.0, gamma_nc, res.W1, res.W2, SolveStatus.OPTIMAL, rng, 100)
    snr2 = max(sol.objective, 0.0)
    internals = {
        "w1": sol.w1,
        "w2": sol.w2,
        "snr2": snr2,
        "eig_ratio": sol.eig_ratio_lambda,
        "residuals": res.residuals,
    }
    r1 = bandwidth_hz * math.log2(1.0 + gamma_nc)
    r2 = bandwidth_hz * math.log2(1.0 + snr2)
    return BaselineResult(NONCOOP_NOMA, r1, r2, True, internals)


def matched_filter_gains(inst) -> tuple[float, float]:
    """(G1, G2): ||h_i||^2 for a multi-antenna instance, h_i for a scalar one."""
    if isinstance(inst, SisoInstance):
        return inst.h1, inst.h2
    if isinstance(inst, MisoInstance):
        return (
            float(np.vdot(inst.h1_vec, inst.h1_vec).real),
            float(np.vdot(inst.h2_vec, inst.h2_vec).real),
        )
    g1, g2 = inst
    return float(g1), float(g2)


def oma_dynamic(inst, r_target: float, bandwidth_hz: float = 1.0) -> BaselineResult:
    """TDMA with user 1 given just enough time to reach ``r_target`` (bit/s/Hz).

    ``inst`` may be a SisoInstance, a MisoInstance or a pair of gains.
    """
    _check_rate(r_target)
    g1, g2 = matched_filter_gains(inst)
    c1, c2 = math.log2(1.0 + g1), math.log2(1.0 + g2)
    if r_target == 0.0:
        tau1 = 0.0
    elif c1 > 0.0:
        tau1 = r_target / c1
    else:
        tau1 = math.inf
    if tau1 > 1.0:
        return BaselineResult(OMA_DYNAMIC, 0.0, 0.0, False, {"tau1": tau1})
    return BaselineResult(
        OMA_DYNAMIC, bandwidth_hz * r_target, bandwidth_hz * (1.0 - tau1) * c2, True, {"tau1": tau1}
    )


def oma_fixed(inst, r_target: float, bandwidth_hz: float = 1.0) -> BaselineResult:
    """TDMA with equal slots; feasible when half a slot carries ``r_target``."""
    _check_rate(r_target)
    g1, g2 = matched_filter_gains(inst)
    c1, c2 = math.log2(1.0 + g1), math.log2(1.0 + g2)
    if 0.5 * c1 < r_target:
        return BaselineResult(OMA_FIXED, 0.0, 0.0, False, {"tau1": 0.5})
    return BaselineResult(OMA_FIXED, bandwidth_hz * r_target, bandwidth_hz * 0.5 * c2, True, {"tau1": 0.5})


def target_sinrs(r_target: float) -> tuple[float, float]:
    """(gamma1 for the two-slot cooperative scheme, gamma_nc for single-slot NOMA)."""
    _check_rate(r_target)
    return 2.0 ** (2.0 * r_target) - 1.0, 2.0**r_target - 1.0
