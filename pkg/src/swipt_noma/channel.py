"""Random channel realisations: indoor geometry, path loss and Rician fading."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import MisoInstance, SisoInstance, SystemParams

PATHLOSS_AT_1M = 1e-3


@dataclass(frozen=True)
class GeometryConfig:
    """Rectangular room; x runs along the depth, y along the width.

    The base station sits on the x = 0 wall.
    """

    room_width_m: float = 5.0
    room_depth_m: float = 6.0
    bs_position: tuple[float, float] = (0.0, 2.5)
    min_separation_m: float = 0.1
    max_redraws: int = 1000

    def __post_init__(self):
        if self.room_width_m <= 0 or self.room_depth_m <= 0:
            raise ValueError("room dimensions must be positive")
        if self.min_separation_m < 0:
            raise ValueError("min_separation_m must be nonnegative")


@dataclass(frozen=True)
class ChannelDraw:
    """Small-scale fading and positions, before path loss and normalisation."""

    raw_h1_vec: np.ndarray
    raw_h2_vec: np.ndarray
    raw_g1: complex
    pos_user1: np.ndarray
    pos_user2: np.ndarray


def path_loss(distance_m, exponent: float):
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = PATHLOSS_AT_1M * d ** (-exponent)
    return float(out) if out.ndim == 0 else out


def los_vector(n: int) -> np.ndarray:
    return np.ones(n, dtype=complex)


def _cn(rng: np.random.Generator, n: int) -> np.ndarray:
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def sample_rician_vector(rng: np.random.Generator, k_factor: float, n: int) -> np.ndarray:
    """Unit-power Rician vector; ``k_factor = inf`` gives the LOS part alone."""
    if k_factor < 0:
        raise ValueError("k_factor must be nonnegative")
    if n < 1:
        raise ValueError("n must be >= 1")
    nlos = _cn(rng, n)
    if np.isinf(k_factor):
        return los_vector(n)
    return np.sqrt(k_factor / (1 + k_factor)) * los_vector(n) + np.sqrt(1 / (1 + k_factor)) * nlos


def _uniform_point(rng, geometry: GeometryConfig) -> np.ndarray:
    return np.array([rng.uniform(0.0, geometry.room_depth_m), rng.uniform(0.0, geometry.room_width_m)])


def sample_positions(rng: np.random.Generator, geometry: GeometryConfig) -> tuple[np.ndarray, np.ndarray]:
    """Two user positions, re-drawn until no pair of nodes is too close."""
    bs = np.asarray(geometry.bs_position, dtype=float)
    for _ in range(geometry.max_redraws):
        p1 = _uniform_point(rng, geometry)
        p2 = _uniform_point(rng, geometry)
        dists = (np.linalg.norm(p1 - bs), np.linalg.norm(p2 - bs), np.linalg.norm(p1 - p2))
        if min(dists) >= max(geometry.min_separation_m, 1e-12):
            return p1, p2
    raise RuntimeError("could not place users with the required separation")


def sample_draw(rng: np.random.Generator, params: SystemParams, geometry: GeometryConfig) -> ChannelDraw:
    p1, p2 = sample_positions(rng, geometry)
    nt = params.antenna_count_nt
    h1 = _cn(rng, nt)
    h2 = sample_rician_vector(rng, params.rician_k, nt)
    g1 = sample_rician_vector(rng, params.rician_k, 1)[0]
    return ChannelDraw(h1, h2, complex(g1), p1, p2)


def normalize_draw(draw: ChannelDraw, params: SystemParams, geometry: GeometryConfig) -> MisoInstance:
    """Apply path loss and the sqrt(Ps)/sigma scaling; g keeps only path loss."""
    bs = np.asarray(geometry.bs_position, dtype=float)
    d1 = np.linalg.norm(draw.pos_user1 - bs)
    d2 = np.linalg.norm(draw.pos_user2 - bs)
    d12 = np.linalg.norm(draw.pos_user1 - draw.pos_user2)
    amp = np.sqrt(params.snr_scale)
    h1 = amp * np.sqrt(path_loss(d1, params.pathloss_exp_user1)) * draw.raw_h1_vec
    h2 = amp * np.sqrt(path_loss(d2, params.pathloss_exp_user2)) * draw.raw_h2_vec
    g = path_loss(d12, params.pathloss_exp_relay) * abs(draw.raw_g1) ** 2
    return MisoInstance(h1, h2, g)


def sample_instance(
    rng: np.random.Generator, params: SystemParams, geometry: GeometryConfig | None = None
) -> MisoInstance:
    geometry = geometry or GeometryConfig()
    return normalize_draw(sample_draw(rng, params, geometry), params, geometry)


def sample_siso_instance(
    rng: np.random.Generator, params: SystemParams, geometry: GeometryConfig | None = None
) -> SisoInstance:
    """Scalar instance built from the first antenna of a draw."""
    return sample_instance(rng, params, geometry).to_siso(antenna=0)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream per (master seed, trial index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))
