"""Monte-Carlo sweeps over transmit power, target rate, SINR target or antenna count.

Every (point, trial) pair draws one channel realisation and evaluates every
strategy on it.  Trial ``k`` always uses the stream ``SeedSequence([seed, k])``,
so a power or target sweep reuses the same small-scale fading and geometry at
every point.  Records are sorted before writing and no wall-clock data is
emitted unless asked for, so reruns give byte-identical CSV.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import baselines
from .channel import GeometryConfig, normalize_draw, sample_draw, trial_rng
from .conic.ipm import DEFAULT_TOL
from .miso import exhaustive_search, sca_solve_batch
from .siso import gss_solve
from .system import MisoInstance, SystemParams

COOP_SCA = "coop_sca"
COOP_ES = "coop_es"
COOP_GSS = "coop_gss"
NONCOOP_MISO = "noncoop_miso"
NONCOOP_SISO = "noncoop_siso"
OMA_DYNAMIC = "oma_dynamic"
OMA_FIXED = "oma_fixed"
OMA_DYNAMIC_SISO = "oma_dynamic_siso"
OMA_FIXED_SISO = "oma_fixed_siso"

STRATEGIES = (
    COOP_SCA,
    COOP_ES,
    COOP_GSS,
    NONCOOP_MISO,
    NONCOOP_SISO,
    OMA_DYNAMIC,
    OMA_FIXED,
    OMA_DYNAMIC_SISO,
    OMA_FIXED_SISO,
)
SWEEP_VARIABLES = ("ps_dbm", "r_target", "gamma1", "nt")
TARGET_MAPPINGS = ("equal_sinr", "equal_rate")
AVERAGING = ("zero", "conditional")

CSV_COLUMNS = (
    "strategy",
    "sweep_value",
    "trial",
    "seed",
    "R1",
    "R2",
    "Rsum",
    "feasible",
    "iterations",
    "eig_ratio",
    "wall_time",
)
SUMMARY_COLUMNS = (
    "strategy",
    "sweep_value",
    "trials",
    "feasible_prob",
    "mean_R1",
    "mean_R2",
    "mean_Rsum",
)


@dataclass
class ExperimentConfig:
    strategies: list[str]
    sweep: str = "ps_dbm"
    grid: list[float] = field(default_factory=lambda: [30.0])
    trials: int = 200
    seed: int = 0
    tol: float = DEFAULT_TOL
    out: str | None = None
    params: SystemParams = field(default_factory=SystemParams)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    target_mapping: str = "equal_sinr"
    es_grid: int = 101
    sca_eps: float = 1e-4
    sca_max_iter: int = 100
    randomizations: int = 100
    average: str = "zero"
    timing: bool = False
    label: str = ""

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if len(self.grid) == 0:
            raise ValueError("sweep grid is empty")
        if not self.strategies:
            raise ValueError("no strategies given")
        unknown = [s for s in self.strategies if s not in STRATEGIES]
        if unknown:
            raise ValueError(f"unknown strategies {unknown}; choose from {list(STRATEGIES)}")
        if self.sweep not in SWEEP_VARIABLES:
            raise ValueError(f"sweep must be one of {SWEEP_VARIABLES}")
        if self.target_mapping not in TARGET_MAPPINGS:
            raise ValueError(f"target_mapping must be one of {TARGET_MAPPINGS}")
        if self.average not in AVERAGING:
            raise ValueError(f"average must be one of {AVERAGING}")
        if self.es_grid < 2:
            raise ValueError("es_grid must be >= 2")
        self.grid = [float(v) for v in self.grid]

    def params_at(self, value: float) -> SystemParams:
        if self.sweep == "ps_dbm":
            return dataclasses.replace(self.params, transmit_power_dbm=value)
        if self.sweep == "nt":
            if value != int(value):
                raise ValueError("antenna counts must be integers")
            return dataclasses.replace(self.params, antenna_count_nt=int(value))
        if self.sweep == "gamma1":
            return dataclasses.replace(self.params, sinr_target_gamma1=value)
        return self.params


@dataclass(frozen=True)
class Targets:
    """SINR targets and pre-logs for one sweep point (rates in bit/s/Hz)."""

    gamma_coop: float
    gamma_nc: float
    r_target: float
    coop_prelog: float


def targets_for(config: ExperimentConfig, value: float) -> Targets:
    """Map the point to per-strategy targets.

    ``equal_sinr``: every scheme must reach the same SINR and all rates use
    a unit pre-log.  ``equal_rate``: every scheme must deliver the same user-1
    rate; the two-slot cooperative scheme then needs 2^(2R) - 1 with a 1/2
    pre-log, single-slot NOMA 2^R - 1.
    """
    if config.sweep == "r_target":
        if value < 0:
            raise ValueError("target rates must be nonnegative")
        rate = value
        gamma = 2.0**rate - 1.0
    else:
        gamma = config.params_at(value).sinr_target_gamma1
        rate = math.log2(1.0 + gamma)
    if config.target_mapping == "equal_sinr":
        return Targets(gamma, gamma, rate, 1.0)
    if config.sweep != "r_target":
        # a given SINR pins the cooperative rate
        rate = 0.5 * math.log2(1.0 + gamma)
    g_coop, g_nc = baselines.target_sinrs(rate)
    return Targets(g_coop, g_nc, rate, 0.5)


@dataclass
class SweepRecord:
    strategy: str
    sweep_value: float
    trial: int
    seed: int
    R1: float
    R2: float
    Rsum: float
    feasible: bool
    iterations: int | None = None
    eig_ratio: float | None = None
    wall_time: float | None = None

    def sort_key(self):
        return (self.strategy, self.sweep_value, self.trial)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(records, key=SweepRecord.sort_key):
        w.writerow([_fmt(getattr(r, c)) if c != "strategy" else r.strategy for c in CSV_COLUMNS])
    return buf.getvalue()


def summarize(records, average: str = "zero") -> list[dict]:
    """Mean rates and feasibility probability per (strategy, point)."""
    groups: dict[tuple[str, float], list[SweepRecord]] = {}
    for r in records:
        groups.setdefault((r.strategy, r.sweep_value), []).append(r)
    rows = []
    for (strategy, value), recs in sorted(groups.items()):
        feas = [r for r in recs if r.feasible]
        pool = feas if average == "conditional" else recs

        def mean(attr):
            if not pool:
                return math.nan
            return float(np.mean([getattr(r, attr) for r in pool]))

        rows.append(
            {
                "strategy": strategy,
                "sweep_value": value,
                "trials": len(recs),
                "feasible_prob": len(feas) / len(recs),
                "mean_R1": mean("R1"),
                "mean_R2": mean("R2"),
                "mean_Rsum": mean("Rsum"),
            }
        )
    return rows


def summary_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in rows:
        w.writerow([row["strategy"] if c == "strategy" else _fmt(row[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Strategy evaluation
# ---------------------------------------------------------------------------


def _rate(snr: float) -> float:
    return math.log2(1.0 + max(snr, 0.0))


def _coop_record(strategy, value, trial, config, tg, sol, iterations, eig_ratio):
    bw = config.params.bandwidth_hz
    if sol is None or not sol.feasible or not math.isfinite(sol.objective):
        return SweepRecord(strategy, value, trial, config.seed, 0.0, 0.0, 0.0, False, iterations, eig_ratio)
    r1 = bw * tg.coop_prelog * _rate(tg.gamma_coop)
    r2 = bw * tg.coop_prelog * _rate(sol.objective)
    return SweepRecord(strategy, value, trial, config.seed, r1, r2, r1 + r2, True, iterations, eig_ratio)


def _baseline_record(strategy, value, trial, config, res, eig_ratio=None):
    return SweepRecord(
        strategy, value, trial, config.seed, res.R1, res.R2, res.Rsum, res.feasible, None, eig_ratio
    )


def _failed(strategy, value, trial, config):
    return SweepRecord(strategy, value, trial, config.seed, 0.0, 0.0, 0.0, False)


def _extraction_rng(config, trial):
    return np.random.default_rng(np.random.SeedSequence([int(config.seed), int(trial), 1]))


def evaluate_strategy(strategy, value, trials, instances, config, tg) -> list[SweepRecord]:
    """Records for one strategy on the instances of one point."""
    bw = config.params.bandwidth_hz
    out = []
    if strategy == COOP_SCA:
        sols = sca_solve_batch(
            instances,
            tg.gamma_coop,
            eps=config.sca_eps,
            max_iter=config.sca_max_iter,
            tol=config.tol,
            rng=_extraction_rng(config, trials[0]),
            n_randomizations=config.randomizations,
        )
        for k, sol in zip(trials, sols):
            ratio = sol.meta.get("eig_ratio_raw") if sol.feasible else None
            out.append(_coop_record(strategy, value, k, config, tg, sol, sol.iterations, ratio))
        return out
    for k, inst in zip(trials, instances):
        try:
            out.append(_evaluate_one(strategy, value, k, inst, config, tg, bw))
        except (ValueError, ArithmeticError, np.linalg.LinAlgError):
            out.append(_failed(strategy, value, k, config))
    return out


def _evaluate_one(strategy, value, k, inst: MisoInstance, config, tg, bw) -> SweepRecord:
    if strategy == COOP_ES:
        sol = exhaustive_search(
            inst,
            tg.gamma_coop,
            config.es_grid,
            config.es_grid,
            tol=config.tol,
            rng=_extraction_rng(config, k),
            n_randomizations=config.randomizations,
        )
        ratio = sol.meta.get("eig_ratio_raw") if sol.feasible else None
        return _coop_record(strategy, value, k, config, tg, sol, None, ratio)
    if strategy == COOP_GSS:
        sol = gss_solve(inst.to_siso(antenna=0), tg.gamma_coop)
        return _coop_record(strategy, value, k, config, tg, sol, sol.iterations, None)
    if strategy == NONCOOP_MISO:
        res = baselines.noncoop_noma_miso(inst, tg.gamma_nc, bw, tol=config.tol, rng=_extraction_rng(config, k))
        return _baseline_record(strategy, value, k, config, res, res.internals.get("eig_ratio"))
    if strategy == NONCOOP_SISO:
        res = baselines.noncoop_noma_siso(inst.to_siso(antenna=0), tg.gamma_nc, bw)
        return _baseline_record(strategy, value, k, config, res)
    if strategy in (OMA_DYNAMIC, OMA_FIXED, OMA_DYNAMIC_SISO, OMA_FIXED_SISO):
        target = inst.to_siso(antenna=0) if strategy.endswith("_siso") else inst
        fn = baselines.oma_dynamic if strategy.startswith(OMA_DYNAMIC) else baselines.oma_fixed
        return _baseline_record(strategy, value, k, config, fn(target, tg.r_target, bw))
    raise ValueError(f"unknown strategy {strategy!r}")


def _instances(config: ExperimentConfig):
    """Instances per point; the draw of trial k is shared across points where possible."""
    shared = config.sweep != "nt"
    draws = {}
    if shared:
        for k in range(config.trials):
            draws[k] = sample_draw(trial_rng(config.seed, k), config.params, config.geometry)
    per_point = {}
    for value in config.grid:
        params = config.params_at(value)
        insts = []
        for k in range(config.trials):
            draw = draws[k] if shared else sample_draw(trial_rng(config.seed, k), params, config.geometry)
            insts.append(normalize_draw(draw, params, config.geometry))
        per_point[value] = insts
    return per_point


def run_sweep(config: ExperimentConfig) -> tuple[list[SweepRecord], list[dict]]:
    records: list[SweepRecord] = []
    per_point = _instances(config)
    trials = list(range(config.trials))
    for value in config.grid:
        tg = targets_for(config, value)
        insts = per_point[value]
        for strategy in config.strategies:
            start = time.perf_counter()
            try:
                recs = evaluate_strategy(strategy, value, trials, insts, config, tg)
            except (ValueError, ArithmeticError, np.linalg.LinAlgError):
                # batch failed as a whole: retry trial by trial
                recs = []
                for k, inst in zip(trials, insts):
                    try:
                        recs.extend(evaluate_strategy(strategy, value, [k], [inst], config, tg))
                    except (ValueError, ArithmeticError, np.linalg.LinAlgError):
                        recs.append(_failed(strategy, value, k, config))
            if config.timing:
                per_trial = (time.perf_counter() - start) / len(trials)
                for r in recs:
                    r.wall_time = per_trial
            if config.label:
                for r in recs:
                    r.strategy = f"{r.strategy}@{config.label}"
            records.extend(recs)
    records.sort(key=SweepRecord.sort_key)
    return records, summarize(records, config.average)


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


_TOP_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"params", "geometry"}


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d or {})
    unknown = set(d) - _TOP_KEYS - {"params", "geometry"}
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    params = SystemParams(**(d.pop("params", None) or {}))
    geo = dict(d.pop("geometry", None) or {})
    if "bs_position" in geo:
        geo["bs_position"] = tuple(geo["bs_position"])
    geometry = GeometryConfig(**geo)
    if "strategies" not in d:
        raise ValueError("config needs a 'strategies' list")
    return ExperimentConfig(params=params, geometry=geometry, **d)


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        d = yaml.safe_load(fh) or {}
    if not isinstance(d, dict):
        raise ValueError("config file must hold a mapping")
    d.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_dict(d)


# ---------------------------------------------------------------------------
# Figure presets
# ---------------------------------------------------------------------------

DEFAULT_TRIALS = 200
FIGURES = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9")

PS_GRID = [-50.0, -45.0, -40.0, -35.0, -30.0, -25.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 35.0, 40.0, 45.0]
RATE_GRID = [float(r) for r in range(2, 25, 2)]


def preset(figure: str, trials: int = DEFAULT_TRIALS, seed: int = 0, tol: float = DEFAULT_TOL, es_grid: int | None = None):
    """Configs for a figure; fig6 yields one config per transmit power."""
    base = SystemParams(antenna_count_nt=2, sinr_target_gamma1=1.0)
    common = {"trials": trials, "seed": seed, "tol": tol}
    if figure == "fig3":
        return [
            ExperimentConfig(
                strategies=[COOP_SCA, COOP_ES, NONCOOP_MISO, OMA_DYNAMIC, OMA_FIXED],
                sweep="ps_dbm",
                grid=PS_GRID,
                params=base,
                es_grid=es_grid or 21,
                **common,
            )
        ]
    if figure == "fig4":
        return [
            ExperimentConfig(
                strategies=[COOP_GSS, NONCOOP_SISO, OMA_DYNAMIC_SISO, OMA_FIXED_SISO],
                sweep="ps_dbm",
                grid=PS_GRID,
                params=dataclasses.replace(base, antenna_count_nt=1),
                **common,
            )
        ]
    if figure == "fig5":
        return [
            ExperimentConfig(
                strategies=[COOP_SCA, COOP_ES, COOP_GSS],
                sweep="ps_dbm",
                grid=PS_GRID,
                params=base,
                es_grid=es_grid or 21,
                **common,
            )
        ]
    if figure == "fig6":
        return [
            ExperimentConfig(
                strategies=[COOP_SCA, NONCOOP_MISO],
                sweep="r_target",
                grid=RATE_GRID,
                params=dataclasses.replace(base, transmit_power_dbm=ps),
                label=f"ps{ps:g}",
                **common,
            )
            for ps in (35.0, 40.0)
        ]
    if figure == "fig8":
        return [
            ExperimentConfig(
                strategies=[COOP_SCA, NONCOOP_MISO, OMA_DYNAMIC, OMA_FIXED],
                sweep="r_target",
                grid=RATE_GRID,
                params=dataclasses.replace(base, transmit_power_dbm=25.0),
                **common,
            )
        ]
    if figure == "fig9":
        return [
            ExperimentConfig(
                strategies=[COOP_SCA],
                sweep="nt",
                grid=[2.0, 3.0, 4.0, 5.0, 6.0],
                params=base,
                **common,
            )
        ]
    if figure == "fig7":
        raise ValueError("fig7 is a convergence trace; use convergence_trace")
    raise ValueError(f"unknown figure {figure!r}; choose from {list(FIGURES)}")


def convergence_trace(seed: int = 0, ps_dbm: float = 30.0, gamma1: float = 1.0, max_draws: int = 1000):
    """Per-iteration user-2 rate of SCA (N_t = 1) and GSS on one feasible scalar instance."""
    params = SystemParams(transmit_power_dbm=ps_dbm, antenna_count_nt=1, sinr_target_gamma1=gamma1)
    geometry = GeometryConfig()
    bw = params.bandwidth_hz
    for k in range(max_draws):
        inst = normalize_draw(sample_draw(trial_rng(seed, k), params, geometry), params, geometry)
        gss = gss_solve(inst.to_siso(), gamma1)
        if gss.feasible:
            break
    else:
        raise RuntimeError("no feasible instance found")
    (sca,) = sca_solve_batch([inst], gamma1)
    r1 = bw * _rate(gamma1)
    records = []
    for n, u in enumerate(sca.history, start=1):
        r2 = bw * _rate(u)
        records.append(SweepRecord(COOP_SCA, float(n), k, seed, r1, r2, r1 + r2, True, n))
    for n, h in enumerate(gss.history, start=1):
        r2 = bw * _rate(h)
        records.append(SweepRecord(COOP_GSS, float(n), k, seed, r1, r2, r1 + r2, True, n))
    records.sort(key=SweepRecord.sort_key)
    return records


def reproduce(figure: str, trials: int = DEFAULT_TRIALS, seed: int = 0, tol: float = DEFAULT_TOL, es_grid: int | None = None, timing: bool = False):
    """Records and summary rows for one figure preset."""
    if figure == "fig7":
        records = convergence_trace(seed)
        return records, summarize(records)
    records = []
    for config in preset(figure, trials, seed, tol, es_grid):
        config.timing = timing
        recs, _ = run_sweep(config)
        records.extend(recs)
    records.sort(key=SweepRecord.sort_key)
    return records, summarize(records)
