"""Domain types and link-budget utilities for the two-user cooperative downlink.

Gains are normalised by the noise: ``h = sqrt(Ps) / sigma * h_raw``, so every
SINR below is dimensionless and the beamformers satisfy a unit power cap.
User 2 splits a fraction ``beta`` of its received power for harvesting and
spends it relaying user 1's symbol over a link of power gain ``g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DEFAULT_FEASIBILITY_TOL = 1e-6


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    STATIONARY = "stationary"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemParams:
    transmit_power_dbm: float = 30.0
    noise_power_dbm: float = -90.0
    sinr_target_gamma1: float = 1.0
    antenna_count_nt: int = 2
    rician_k: float = 3.0
    pathloss_exp_user1: float = 4.0
    pathloss_exp_user2: float = 2.0
    pathloss_exp_relay: float = 2.0
    bandwidth_hz: float = 1e6
    stage_fraction_tau: float = 0.5

    def __post_init__(self):
        if not self.sinr_target_gamma1 > 0:
            raise ValueError("sinr_target_gamma1 must be positive")
        if int(self.antenna_count_nt) != self.antenna_count_nt or self.antenna_count_nt < 1:
            raise ValueError("antenna_count_nt must be a positive integer")
        if not 0.0 < self.stage_fraction_tau < 1.0:
            raise ValueError("stage_fraction_tau must lie in (0, 1)")
        if self.rician_k < 0:
            raise ValueError("rician_k must be nonnegative")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")

    @property
    def snr_scale(self) -> float:
        """Linear Ps / sigma^2."""
        return dbm_to_watt(self.transmit_power_dbm) / dbm_to_watt(self.noise_power_dbm)


@dataclass(frozen=True)
class SisoInstance:
    """Single-antenna gains: h1, h2 normalised powers, g raw relay power gain."""

    h1: float
    h2: float
    g: float

    def __post_init__(self):
        for name in ("h1", "h2", "g"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if self.h1 <= 0 or self.h2 <= 0:
            raise ValueError("channel gains h1, h2 must be positive")
        if self.g < 0:
            raise ValueError("relay gain g must be nonnegative")


@dataclass(frozen=True)
class MisoInstance:
    h1_vec: np.ndarray
    h2_vec: np.ndarray
    g: float
    allow_zero: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        h1 = np.atleast_1d(np.asarray(self.h1_vec, dtype=complex))
        h2 = np.atleast_1d(np.asarray(self.h2_vec, dtype=complex))
        if h1.ndim != 1 or h1.shape != h2.shape:
            raise ValueError("h1_vec and h2_vec must be vectors of equal length")
        if not (np.all(np.isfinite(h1)) and np.all(np.isfinite(h2)) and math.isfinite(self.g)):
            raise ValueError("channel entries must be finite")
        if not self.allow_zero and (np.linalg.norm(h1) == 0 or np.linalg.norm(h2) == 0):
            raise ValueError("channel vectors must have nonzero norm")
        if self.g < 0:
            raise ValueError("relay gain g must be nonnegative")
        object.__setattr__(self, "h1_vec", h1)
        object.__setattr__(self, "h2_vec", h2)
        object.__setattr__(self, "g", float(self.g))

    @property
    def nt(self) -> int:
        return self.h1_vec.shape[0]

    @property
    def H1(self) -> np.ndarray:
        return np.outer(self.h1_vec, self.h1_vec.conj())

    @property
    def H2(self) -> np.ndarray:
        return np.outer(self.h2_vec, self.h2_vec.conj())

    @classmethod
    def from_siso(cls, inst: SisoInstance) -> "MisoInstance":
        return cls(np.array([math.sqrt(inst.h1)]), np.array([math.sqrt(inst.h2)]), inst.g)

    def to_siso(self, antenna: int | None = None) -> SisoInstance:
        """Scalar instance; for N_t > 1 pick one antenna explicitly."""
        if antenna is None:
            if self.nt != 1:
                raise ValueError("to_siso needs an antenna index when N_t > 1")
            antenna = 0
        return SisoInstance(
            float(abs(self.h1_vec[antenna]) ** 2), float(abs(self.h2_vec[antenna]) ** 2), self.g
        )


@dataclass
class MisoSolution:
    w1: np.ndarray | None
    w2: np.ndarray | None
    W1: np.ndarray | None
    W2: np.ndarray | None
    beta: float
    objective: float
    status: SolveStatus
    iterations: int = 0
    eig_ratio_lambda: float = float("nan")
    x: float = float("nan")
    history: list[float] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)
    extraction_ok: bool = True
    meta: dict = field(default_factory=dict, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status in (SolveStatus.OPTIMAL, SolveStatus.STATIONARY, SolveStatus.MAX_ITER)


@dataclass
class SisoSolution:
    alpha: float
    beta: float
    objective: float
    status: SolveStatus
    iterations: int = 0
    history: list[float] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


# ---------------------------------------------------------------------------
# Link quantities
# ---------------------------------------------------------------------------


def _gain(h: np.ndarray, w) -> float:
    w = np.asarray(w, dtype=complex)
    if w.shape != h.shape:
        raise ValueError(f"beamformer length {w.shape} does not match channel {h.shape}")
    return float(abs(np.vdot(h, w)) ** 2)


def _check_beta(beta: float):
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta={beta} outside [0, 1]")


def sinr_stage1_user1(inst: MisoInstance, w1, w2) -> float:
    """Direct-link SINR of x1 at user 1 (x2 treated as interference)."""
    return _gain(inst.h1_vec, w1) / (_gain(inst.h1_vec, w2) + 1.0)


def received_power_user2(inst: MisoInstance, w1, w2) -> float:
    return _gain(inst.h2_vec, w1) + _gain(inst.h2_vec, w2)


def equivalent_sinr_user1(inst: MisoInstance, w1, w2, beta: float) -> float:
    """MRC combination of the direct SINR and the relayed SNR."""
    _check_beta(beta)
    return sinr_stage1_user1(inst, w1, w2) + beta * inst.g * received_power_user2(inst, w1, w2)


def harvested_transmit_power(inst: MisoInstance, w1, w2, beta: float) -> float:
    """Relay transmit power in noise-normalised units (ideal harvester)."""
    _check_beta(beta)
    return beta * received_power_user2(inst, w1, w2)


def sic_sinr_user2(inst: MisoInstance, w1, w2, beta: float) -> float:
    """SINR with which user 2 decodes x1 before cancelling it."""
    _check_beta(beta)
    p1 = (1.0 - beta) * _gain(inst.h2_vec, w1)
    p2 = (1.0 - beta) * _gain(inst.h2_vec, w2)
    return p1 / (p2 + 1.0)


def snr_user2(inst: MisoInstance, w2, beta: float) -> float:
    _check_beta(beta)
    return (1.0 - beta) * _gain(inst.h2_vec, w2)


def rates_from_sinr(gamma1: float, snr2: float, params: SystemParams, prelog: float | None = None):
    """(R1, R2, Rsum) in bit/s.

    ``prelog`` defaults to the first-stage time fraction, reflecting the
    two-slot cooperative protocol; pass 1.0 for single-slot accounting.
    """
    if gamma1 < 0 or snr2 < 0:
        raise ValueError("SINR values must be nonnegative")
    pre = params.stage_fraction_tau if prelog is None else prelog
    r1 = pre * params.bandwidth_hz * math.log2(1.0 + gamma1)
    r2 = pre * params.bandwidth_hz * math.log2(1.0 + snr2)
    return r1, r2, r1 + r2


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    slacks: dict[str, float]

    @property
    def violated(self) -> list[str]:
        return [k for k, v in self.slacks.items() if v < 0]


def check_p1_feasibility(
    inst: MisoInstance, w1, w2, beta: float, gamma1: float, tol: float = DEFAULT_FEASIBILITY_TOL
) -> FeasibilityReport:
    """Evaluate the four design constraints at a beamformer / split pair.

    Slacks (positive means satisfied):
      sic_user2   SINR of x1 at user 2 minus the target
      qos_user1   equivalent SINR at user 1 minus the target
      power       1 - ||w1||^2 - ||w2||^2
      split       distance of beta to the ends of [0, 1]
    """
    _check_beta(beta)
    w1 = np.asarray(w1, dtype=complex)
    w2 = np.asarray(w2, dtype=complex)
    slacks = {
        "sic_user2": sic_sinr_user2(inst, w1, w2, beta) - gamma1,
        "qos_user1": equivalent_sinr_user1(inst, w1, w2, beta) - gamma1,
        "power": 1.0 - float(np.vdot(w1, w1).real + np.vdot(w2, w2).real),
        "split": min(beta, 1.0 - beta),
    }
    return FeasibilityReport(all(v >= -tol for v in slacks.values()), slacks)
