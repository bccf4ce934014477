"""Multi-antenna design: relaxed beamforming problems, SCA loop and lattice oracle.

All conic subproblems are posed in noise- and channel-normalised units:
with ``n_i = ||h_i||^2`` and unit directions ``e_i = h_i / ||h_i||`` every
trace term is ``Tr(H_i W) = n_i * Tr(e_i e_i^H W)``, so the solver only sees
quantities of order one regardless of the transmit power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProblem, ProblemBuilder, Status, schur_2x2_as_rotated_soc, solve_batch
from .conic.ipm import DEFAULT_TOL
from .system import MisoInstance, MisoSolution, SolveStatus, check_p1_feasibility

BETA_CEILING = 1.0 - 1e-9
X_FLOOR = 1e-12
LINEARIZATION_FLOOR = 1e-6
AGM_FLOOR = 1e-5
RANK_ONE_RATIO = 1e-6
DEFAULT_RANDOMIZATIONS = 100
SCA_EPS = 1e-4
SCA_MAX_ITER = 100
# SCA also stops once u changes by less than this multiple of the subproblem's
# reported relative accuracy
RESOLUTION_FACTOR = 10.0
# residual bound for accepting a subproblem solve that stopped short of tol
LOOSE_TOL = 1e-5


@dataclass(frozen=True)
class SdrMatrices:
    H1: np.ndarray
    H2: np.ndarray

    @classmethod
    def from_instance(cls, inst: MisoInstance) -> "SdrMatrices":
        return cls(inst.H1, inst.H2)


@dataclass(frozen=True)
class _Channels:
    n1: float
    n2: float
    q: float  # g * n2
    U1: np.ndarray
    U2: np.ndarray

    @classmethod
    def of(cls, inst: MisoInstance) -> "_Channels":
        n1 = float(np.vdot(inst.h1_vec, inst.h1_vec).real)
        n2 = float(np.vdot(inst.h2_vec, inst.h2_vec).real)
        e1 = inst.h1_vec / math.sqrt(n1)
        e2 = inst.h2_vec / math.sqrt(n2)
        return cls(n1, n2, inst.g * n2, np.outer(e1, e1.conj()), np.outer(e2, e2.conj()))


def _tr(H, W) -> float:
    return float(np.real(np.trace(H @ W)))


def _usable(sol) -> bool:
    return sol.status is Status.OPTIMAL or (
        sol.status is Status.NUMERICAL_TROUBLE and max(sol.kkt_residuals) <= LOOSE_TOL
    )


# ---------------------------------------------------------------------------
# Fixed (beta, x) problem
# ---------------------------------------------------------------------------


def _relay_demand(gamma1, beta, x, q):
    """Right-hand side of the relay row, normalised by ||h2||^2; None if unmeetable."""
    if x >= gamma1:
        return 0.0
    if beta * q <= 0.0:
        return None
    return (gamma1 - x) / (beta * q)


def _w2_scale(gamma1: float) -> float:
    # user 1's SINR row gives Tr(e2 e2^H W2) <= 1 / gamma1, so for large targets
    # W2 is solved for as s * W2 (and x as x / s) to keep every row O(1)
    return max(1.0, gamma1)


def build_p3(inst: MisoInstance, gamma1: float, beta: float, x: float) -> ConicProblem:
    """Linear SDP in (W1, W2) for a fixed split ``beta`` and auxiliary ``x``.

    The variable named W2 holds s * W2 with s = ``_w2_scale(gamma1)``, and the
    objective is s (1 - beta) Tr(e2 e2^H W2); (1 - beta) ||h2||^2 Tr(e2 e2^H W2)
    is the SNR.
    When beta * g = 0 the relay row degenerates to the scalar condition
    x >= gamma1, posed as a constant row.
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    ch = _Channels.of(inst)
    nt = inst.nt
    s = _w2_scale(gamma1)
    b = ProblemBuilder()
    W1 = b.hermitian("W1", nt)
    W2 = b.hermitian("W2", nt)
    t11, t12 = W1.inner(ch.U1), W2.inner(ch.U1) / s
    t21, t22 = W1.inner(ch.U2), W2.inner(ch.U2) / s
    b.nonneg(t21 - gamma1 * t22 - gamma1 / (ch.n2 * (1.0 - beta)))
    b.nonneg(t11 - x * t12 - x / ch.n1)
    demand = _relay_demand(gamma1, beta, x, ch.q)
    if demand is None:
        b.nonneg(0.0 * t21 + (x - gamma1))
    else:
        b.nonneg(t21 + t22 - demand)
    b.nonneg(1.0 - W1.trace() - W2.trace() / s)
    b.psd(W1)
    b.psd(W2)
    b.maximize(s * (1.0 - beta) * t22)
    return b.build()


class _P3Family:
    """build_p3 for many (beta, x) at once: F is affine in x, f is explicit."""

    def __init__(self, inst: MisoInstance, gamma1: float):
        self.inst, self.gamma1 = inst, gamma1
        self.ch = _Channels.of(inst)
        p0 = build_p3(inst, gamma1, 0.5, 0.0)
        p1 = build_p3(inst, gamma1, 0.5, 1.0)
        self.template = p0
        self.F0 = p0.F
        self.F1 = p1.F - p0.F
        self.c_unit = p0.c / 0.5

    def problem(self, beta: float, x: float) -> ConicProblem:
        ch, g1 = self.ch, self.gamma1
        f = np.zeros_like(self.template.f)
        f[0] = -g1 / (ch.n2 * (1.0 - beta))
        f[1] = -x / ch.n1
        demand = _relay_demand(g1, beta, x, ch.q)
        f[2] = (x - g1) if demand is None else -demand
        f[3] = 1.0
        F = self.F0 + x * self.F1
        if demand is None:
            F = F.copy()
            F[2] = 0.0
        return ConicProblem(
            c=(1.0 - beta) * self.c_unit,
            F=F,
            f=f,
            cones=self.template.cones,
            var_names=self.template.var_names,
        )

    def surely_infeasible(self, beta: float, x: float) -> bool:
        """Cheap necessary conditions (each trace term is at most the power budget)."""
        ch, g1 = self.ch, self.gamma1
        margin = 1.0 + 1e-9
        if beta >= 1.0 or g1 / (ch.n2 * (1.0 - beta)) > margin:
            return True
        if x / ch.n1 > margin:
            return True
        demand = _relay_demand(g1, beta, x, ch.q)
        return demand is None or demand > margin


@dataclass
class P3Result:
    beta: float
    x: float
    value: float
    W1: np.ndarray | None
    W2: np.ndarray | None
    status: Status
    residuals: tuple[float, float, float]


def _hermitian_values(problem: ConicProblem, xvec: np.ndarray, nt: int, gamma1: float):
    """(W1, W2) in physical units from a P3 or P5 solution."""
    from .conic.problem import HermitianVariable

    W1 = HermitianVariable("W1", nt).value(xvec[problem.var_names["W1"]])
    W2 = HermitianVariable("W2", nt).value(xvec[problem.var_names["W2"]])
    return W1, W2 / _w2_scale(gamma1)


def solve_p3(inst: MisoInstance, gamma1: float, points, tol: float = DEFAULT_TOL) -> list[P3Result]:
    """Solve the fixed-(beta, x) SDP at every (beta, x) in ``points``."""
    fam = _P3Family(inst, gamma1)
    out: list[P3Result | None] = [None] * len(points)
    todo, probs = [], []
    for k, (beta, x) in enumerate(points):
        if fam.surely_infeasible(beta, x):
            out[k] = P3Result(beta, x, -math.inf, None, None, Status.INFEASIBLE, (math.nan,) * 3)
        else:
            todo.append(k)
            probs.append(fam.problem(beta, x))
    sols = solve_batch(probs, tol=tol)
    for k, prob, sol in zip(todo, probs, sols):
        beta, x = points[k]
        if _usable(sol):
            W1, W2 = _hermitian_values(prob, sol.x, inst.nt, gamma1)
            value = (1.0 - beta) * fam.ch.n2 * _tr(fam.ch.U2, W2)
            out[k] = P3Result(beta, x, value, W1, W2, sol.status, sol.kkt_residuals)
        else:
            out[k] = P3Result(beta, x, -math.inf, None, None, sol.status, sol.kkt_residuals)
    return out


# ---------------------------------------------------------------------------
# Rank-one structure
# ---------------------------------------------------------------------------


def eigen_ratio(W: np.ndarray) -> float:
    """lambda_1 / lambda_2 of a PSD matrix (inf when lambda_2 is numerically zero)."""
    lam = np.linalg.eigvalsh(0.5 * (W + W.conj().T))[::-1]
    if lam.size < 2:
        return math.inf
    floor = max(lam[0], 0.0) * np.finfo(float).eps * lam.size
    if lam[1] <= floor:
        return math.inf
    return float(lam[0] / lam[1])


def is_negligible(W: np.ndarray, scale: float = 1.0) -> bool:
    return float(np.real(np.trace(W))) <= 1e-9 * scale


def pair_eigen_ratio(W1: np.ndarray, W2: np.ndarray) -> float:
    """R_lambda over the matrices that carry power."""
    scale = float(np.real(np.trace(W1 + W2)))
    ratios = [eigen_ratio(W) for W in (W1, W2) if not is_negligible(W, scale)]
    return min(ratios) if ratios else math.inf


def purify_rank_one(W: np.ndarray, functionals, max_steps: int | None = None) -> np.ndarray:
    """Rank-reduce a PSD matrix while keeping Tr(A_k W) fixed for every A_k.

    Each step finds a Hermitian direction in the range of W that is invisible
    to all functionals and moves along it until an eigenvalue hits zero.  With
    K functionals this terminates at rank r with r^2 <= K.
    """
    W = 0.5 * (W + W.conj().T)
    lam, Q = np.linalg.eigh(W)
    lam = np.clip(lam, 0.0, None)
    W = (Q * lam) @ Q.conj().T
    funcs = [np.asarray(A) for A in functionals]
    steps = max_steps if max_steps is not None else W.shape[0]
    for _ in range(steps):
        lam, Q = np.linalg.eigh(W)
        keep = lam > lam.max(initial=0.0) * 1e-13
        r = int(keep.sum())
        if r * r <= len(funcs) or r <= 1:
            break
        V = Q[:, keep] * np.sqrt(lam[keep])
        from .conic.problem import hermitian_basis

        basis = hermitian_basis(r)
        M = np.array([[np.real(np.trace(V.conj().T @ A @ V @ E)) for E in basis] for A in funcs])
        _, _, vh = np.linalg.svd(M)
        coef = vh[-1]
        D = np.einsum("k,kij->ij", coef, basis)
        dl = np.linalg.eigvalsh(D)
        if dl[-1] < abs(dl[0]):
            D, dl = -D, -dl[::-1]
        if dl[-1] <= 0:
            break
        step = np.eye(r) - D / dl[-1]
        W = V @ step @ V.conj().T
        W = 0.5 * (W + W.conj().T)
    return W


def purify_pair(W1, W2, inst: MisoInstance):
    ch = _Channels.of(inst)
    funcs = [ch.U1, ch.U2, np.eye(inst.nt)]
    return purify_rank_one(W1, funcs), purify_rank_one(W2, funcs)


# ---------------------------------------------------------------------------
# Beamformer extraction
# ---------------------------------------------------------------------------


@dataclass
class Extraction:
    w1: np.ndarray
    w2: np.ndarray
    eig_ratio: float
    ok: bool
    method: str


def _principal(W):
    lam, Q = np.linalg.eigh(0.5 * (W + W.conj().T))
    return Q[:, -1] * math.sqrt(max(lam[-1], 0.0))


def _sqrt_psd(W):
    lam, Q = np.linalg.eigh(0.5 * (W + W.conj().T))
    return (Q * np.sqrt(np.clip(lam, 0.0, None))) @ Q.conj().T


def extract_beamformers(
    W1: np.ndarray,
    W2: np.ndarray,
    rng: np.random.Generator | None = None,
    n_randomizations: int = DEFAULT_RANDOMIZATIONS,
    *,
    inst: MisoInstance | None = None,
    beta: float | None = None,
    gamma1: float | None = None,
    tol: float = 1e-6,
) -> Extraction:
    """Beamformers from relaxed covariance matrices.

    Rank-one inputs give principal eigenvectors directly.  Otherwise Gaussian
    randomisation draws candidates ``W^(1/2) r``, rescales them to the power
    cap and keeps the best one that meets every design constraint; this needs
    ``inst``, ``beta`` and ``gamma1``.
    """
    ratio = pair_eigen_ratio(W1, W2)
    scale = float(np.real(np.trace(W1 + W2)))
    rank_one = all(
        is_negligible(W, scale) or eigen_ratio(W) >= 1.0 / RANK_ONE_RATIO for W in (W1, W2)
    )
    w1, w2 = _principal(W1), _principal(W2)
    if is_negligible(W2, scale):
        w2 = np.zeros_like(w2)
    if rank_one:
        return Extraction(w1, w2, ratio, True, "eigen")
    if inst is None or beta is None or gamma1 is None:
        raise ValueError("randomisation needs inst, beta and gamma1")
    rng = rng if rng is not None else np.random.default_rng(0)
    S1, S2 = _sqrt_psd(W1), _sqrt_psd(W2)
    nt = W1.shape[0]
    best, best_val = None, -math.inf
    for _ in range(n_randomizations):
        r = (rng.standard_normal((2, nt)) + 1j * rng.standard_normal((2, nt))) / math.sqrt(2.0)
        c1, c2 = S1 @ r[0], S2 @ r[1]
        power = float(np.vdot(c1, c1).real + np.vdot(c2, c2).real)
        if power > 1.0:
            c1, c2 = c1 / math.sqrt(power), c2 / math.sqrt(power)
        if check_p1_feasibility(inst, c1, c2, beta, gamma1, tol).feasible:
            val = (1.0 - beta) * abs(np.vdot(inst.h2_vec, c2)) ** 2
            if val > best_val:
                best, best_val = (c1, c2), val
    if best is None:
        return Extraction(w1, w2, ratio, False, "randomization-failed")
    return Extraction(best[0], best[1], ratio, True, "randomization")


def _finish(inst, gamma1, beta, x, W1, W2, status, rng, n_randomizations, **extra) -> MisoSolution:
    raw_ratio = pair_eigen_ratio(W1, W2)
    P1, P2 = purify_pair(W1, W2, inst)
    ext = extract_beamformers(
        P1, P2, rng, n_randomizations, inst=inst, beta=min(max(beta, 0.0), 1.0), gamma1=gamma1
    )
    objective = (1.0 - beta) * _tr(inst.H2, P2)
    meta = {"eig_ratio_raw": raw_ratio, "extraction": ext.method}
    meta.update(extra.pop("meta", {}))
    return MisoSolution(
        w1=ext.w1,
        w2=ext.w2,
        W1=P1,
        W2=P2,
        beta=beta,
        objective=objective,
        status=status,
        eig_ratio_lambda=ext.eig_ratio,
        x=x,
        extraction_ok=ext.ok,
        meta=meta,
        **extra,
    )


def _infeasible_solution(**extra) -> MisoSolution:
    return MisoSolution(None, None, None, None, math.nan, math.nan, SolveStatus.INFEASIBLE, **extra)


# ---------------------------------------------------------------------------
# Lattice oracle
# ---------------------------------------------------------------------------


def exhaustive_search(
    inst: MisoInstance,
    gamma1: float,
    grid_beta: int = 101,
    grid_x: int = 101,
    tol: float = DEFAULT_TOL,
    rng: np.random.Generator | None = None,
    n_randomizations: int = DEFAULT_RANDOMIZATIONS,
) -> MisoSolution:
    """Best fixed-(beta, x) SDP value over a closed lattice on [0, 1] x [0, gamma1].

    Endpoints are included so that refining n -> 2n - 1 nests the lattice;
    beta = 1 is never feasible and beta = 0 only admits x = gamma1.
    """
    if grid_beta < 2 or grid_x < 2:
        raise ValueError("grids need at least two points")
    betas = np.linspace(0.0, 1.0, grid_beta)
    xs = np.linspace(0.0, gamma1, grid_x)
    points = [(float(b), float(x)) for b in betas[:-1] for x in xs]
    results = solve_p3(inst, gamma1, points, tol=tol)
    values = np.full((grid_beta, grid_x), -math.inf)
    for k, res in enumerate(results):
        values[k // grid_x, k % grid_x] = res.value
    meta = {
        "betas": betas,
        "xs": xs,
        "values": values,
        "n_feasible": int(np.isfinite(values).sum()),
        "n_solved": sum(1 for r in results if r.W1 is not None or r.status is not Status.INFEASIBLE),
    }
    k_best = int(np.argmax([r.value for r in results]))
    best = results[k_best]
    if not math.isfinite(best.value):
        return _infeasible_solution(meta=meta)
    meta["residuals"] = best.residuals
    return _finish(
        inst, gamma1, best.beta, best.x, best.W1, best.W2, SolveStatus.OPTIMAL, rng, n_randomizations, meta=meta
    )


# ---------------------------------------------------------------------------
# Successive convex approximation
# ---------------------------------------------------------------------------


@dataclass
class ScaState:
    """Linearisation point and current iterate, in physical (unnormalised) units."""

    u: float
    v: float
    t: float
    a: float
    beta: float
    x: float
    W1: np.ndarray
    W2: np.ndarray
    n: int = 0
    history: list[float] = field(default_factory=list)


def agm_update(inst: MisoInstance, prev: ScaState) -> float:
    """a = sqrt(Tr(H1 W2) / x), with x clamped away from zero."""
    x = max(prev.x, X_FLOOR)
    return math.sqrt(max(_tr(inst.H1, prev.W2), 0.0) / x)


def build_p5(inst: MisoInstance, gamma1: float, v_n: float, t_n: float, a_n: float) -> ConicProblem:
    """Convex inner approximation around (v_n, t_n, a_n) (physical units).

    Variables are scaled with s = ``_w2_scale(gamma1)``: u' = s u / n2,
    v' = v sqrt(s / n2), t' = t / sqrt(g n2), x' = x / s, W2' = s W2, with W1
    and beta as is.  The objective is u'.
    """
    if not (math.isfinite(v_n) and math.isfinite(t_n) and math.isfinite(a_n)):
        raise ValueError("linearisation point must be finite")
    if a_n <= 0:
        raise ValueError("a_n must be positive")
    ch = _Channels.of(inst)
    nt = inst.nt
    sc = _w2_scale(gamma1)
    vn = max(v_n * math.sqrt(sc / ch.n2), LINEARIZATION_FLOOR)
    bn = max(a_n * sc / math.sqrt(ch.n1), AGM_FLOOR)

    b = ProblemBuilder()
    u = b.scalar("u")
    v = b.scalar("v")
    x = b.scalar("x")
    beta = b.scalar("beta")
    W1 = b.hermitian("W1", nt)
    W2 = b.hermitian("W2", nt)
    t11, t12 = W1.inner(ch.U1), W2.inner(ch.U1)
    t21, t22 = W1.inner(ch.U2), W2.inner(ch.U2)

    b.nonneg(2.0 * vn * v - vn * vn - u)
    if ch.q > 0:
        t = b.scalar("t")
        tn = max(t_n / math.sqrt(ch.q), LINEARIZATION_FLOOR)
        b.nonneg(2.0 * tn * t - tn * tn - (gamma1 - sc * x) / ch.q)
        b.add(schur_2x2_as_rotated_soc(beta, t21 + t22 / sc, t))
    else:
        b.nonneg(sc * x - gamma1)
    b.nonneg(x, beta, BETA_CEILING - beta, 1.0 - W1.trace() - W2.trace() / sc)
    b.rsoc(2.0 * t11 - 2.0 * sc / ch.n1 * x, 1.0, bn * x, t12 / bn)
    b.rsoc(t21 - gamma1 / sc * t22, 1.0 - beta, math.sqrt(gamma1 / ch.n2))
    b.add(schur_2x2_as_rotated_soc(1.0 - beta, t22, v))
    b.psd(W1)
    b.psd(W2)
    b.maximize(u)
    return b.build()


@dataclass
class _Run:
    inst: MisoInstance
    gamma1: float
    ch: _Channels
    state: ScaState | None = None
    u_norm: float = -math.inf
    status: SolveStatus | None = None
    trace: list[dict] = field(default_factory=list)
    seed_used: tuple[float, float] | None = None
    next_seed: int = 0
    fallback: ScaState | None = None


# (0, gamma1) is the noncooperative design, feasible whenever that one is
_GRID_SEEDS = [(b, f) for b in (0.5, 0.25, 0.75, 0.1, 0.9) for f in (0.5, 0.0, 1.0, 0.25, 0.75)]
RESTORATION_SEEDS = _GRID_SEEDS[:1] + [(0.0, 1.0)] + _GRID_SEEDS[1:]


def _seed_state(run: _Run, res: P3Result) -> ScaState:
    inst, ch = run.inst, run.ch
    beta, x = res.beta, res.x
    t22 = _tr(inst.H2, res.W2)
    t2s = _tr(inst.H2, res.W1 + res.W2)
    state = ScaState(
        u=-math.inf,
        v=math.sqrt(max((1.0 - beta) * t22, 0.0)),
        t=math.sqrt(max(inst.g * beta * t2s, 0.0)),
        a=1.0,
        beta=beta,
        x=x,
        W1=res.W1,
        W2=res.W2,
    )
    state.a = max(agm_update(inst, state), AGM_FLOOR * math.sqrt(ch.n1) / _w2_scale(run.gamma1))
    return state


def _restore(runs: list[_Run], tol: float):
    """Feasible linearisation points from fixed-(beta, x) solves.

    Each run resumes after the last seed it used, so a seed whose first
    subproblem failed is not tried again.
    """
    pending = list(runs)
    for k, (beta, frac) in enumerate(RESTORATION_SEEDS):
        if not pending:
            break
        still, probs, owners = [], [], []
        for run in pending:
            if run.next_seed > k:
                still.append(run)
                continue
            fam = _P3Family(run.inst, run.gamma1)
            x = frac * run.gamma1
            if fam.surely_infeasible(beta, x):
                still.append(run)
            else:
                probs.append(fam.problem(beta, x))
                owners.append(run)
        for run, prob, sol in zip(owners, probs, solve_batch(probs, tol=tol)):
            x = frac * run.gamma1
            if _usable(sol):
                W1, W2 = _hermitian_values(prob, sol.x, run.inst.nt, run.gamma1)
                res = P3Result(beta, x, math.nan, W1, W2, sol.status, sol.kkt_residuals)
                run.state = _seed_state(run, res)
                run.seed_used = (beta, x)
                run.next_seed = k + 1
                if run.fallback is None:
                    run.fallback = run.state
            else:
                still.append(run)
        pending = still
    for run in pending:
        # every seed used up; keep a feasible fixed-split point if one was found
        run.state = run.fallback
        run.status = SolveStatus.INFEASIBLE if run.fallback is None else SolveStatus.MAX_ITER


def sca_solve_batch(
    instances,
    gamma1,
    eps: float = SCA_EPS,
    max_iter: int = SCA_MAX_ITER,
    tol: float = DEFAULT_TOL,
    rng: np.random.Generator | None = None,
    n_randomizations: int = DEFAULT_RANDOMIZATIONS,
) -> list[MisoSolution]:
    """Run the SCA loop on several instances in lockstep (one conic batch per step).

    Each run starts from v = t = a = 1; when that first subproblem is
    infeasible, fixed-(beta, x) solves provide a feasible linearisation point.

    The loop stops once |u_n - u_(n-1)| < eps, with u the user-2 SNR, or once
    that change is within RESOLUTION_FACTOR * |u_n| times the worst KKT
    residual of the subproblem, below which iterates cannot be told apart.
    """
    instances = list(instances)
    gammas = np.broadcast_to(np.asarray(gamma1, dtype=float), (len(instances),))
    runs = [_Run(inst, float(g1), _Channels.of(inst)) for inst, g1 in zip(instances, gammas)]
    for run in runs:
        run.state = _unit_start(run)
    active = _sca_step(runs, tol, eps, first=True) if max_iter >= 1 else []
    retry = [r for r in runs if r.state is None]
    while retry:
        _restore(retry, tol)
        seeded = [r for r in retry if r.status is None]
        active += _sca_step(seeded, tol, eps, first=True) if max_iter >= 1 else []
        retry = [r for r in seeded if r.state is None]

    while active:
        active = _sca_step([r for r in active if r.state.n < max_iter], tol, eps)
    for run in runs:
        if run.status is None:
            run.status = SolveStatus.MAX_ITER

    out = []
    for run in runs:
        if run.state is None:
            out.append(_infeasible_solution(trace=run.trace))
            continue
        s = run.state
        out.append(
            _finish(
                run.inst,
                run.gamma1,
                s.beta,
                s.x,
                s.W1,
                s.W2,
                run.status,
                rng,
                n_randomizations,
                iterations=s.n,
                history=list(s.history),
                trace=run.trace,
                meta={"seed": run.seed_used},
            )
        )
    return out


def _unit_start(run: _Run) -> ScaState:
    """Unit starting point v = t = a = 1 (no iterate yet)."""
    z = np.zeros((run.inst.nt, run.inst.nt), dtype=complex)
    return ScaState(u=-math.inf, v=1.0, t=1.0, a=1.0, beta=math.nan, x=math.nan, W1=z, W2=z)


def _sca_step(runs: list[_Run], tol: float, eps: float, first: bool = False) -> list[_Run]:
    """One P5 solve per run, batched by structure; returns the runs still iterating.

    With ``first`` a failed solve means the unit start is unusable: the run's
    state is cleared so that restoration can take over.
    """
    groups: dict[tuple, list[tuple[_Run, ConicProblem]]] = {}
    for run in runs:
        s = run.state
        prob = build_p5(run.inst, run.gamma1, s.v, s.t, s.a)
        groups.setdefault(prob.structure(), []).append((run, prob))
    still = []
    for items in groups.values():
        sols = solve_batch([p for _, p in items], tol=tol)
        for (run, prob), sol in zip(items, sols):
            n = run.state.n + 1
            if not _usable(sol):
                if first:
                    run.state = None
                    continue
                run.status = SolveStatus.MAX_ITER
                run.trace.append({"n": n, "solver_status": Status(sol.status).value})
                continue
            if _advance(run, prob, sol, n, eps):
                still.append(run)
    return still


def _advance(run: _Run, prob: ConicProblem, sol, n: int, eps: float) -> bool:
    """Take the subproblem solution as the new iterate; True while not converged."""
    inst, ch = run.inst, run.ch
    val = prob.value_of
    sc = _w2_scale(run.gamma1)
    u_norm = float(val(sol.x, "u")[0]) / sc
    W1, W2 = _hermitian_values(prob, sol.x, inst.nt, run.gamma1)
    beta = float(np.clip(val(sol.x, "beta")[0], 0.0, 1.0))
    x = float(max(val(sol.x, "x")[0], 0.0)) * sc
    v = float(val(sol.x, "v")[0]) * math.sqrt(ch.n2 / sc)
    t = float(val(sol.x, "t")[0]) * math.sqrt(ch.q) if "t" in prob.var_names else 0.0
    # change in the user-2 SNR; changes within the subproblem accuracy count as zero
    delta = abs(u_norm - run.u_norm) * ch.n2
    floor = RESOLUTION_FACTOR * max(sol.kkt_residuals) * abs(u_norm) * ch.n2
    s = ScaState(u=u_norm * ch.n2, v=v, t=t, a=1.0, beta=beta, x=x, W1=W1, W2=W2, n=n, history=run.state.history)
    s.a = max(agm_update(inst, s), AGM_FLOOR * math.sqrt(ch.n1) / sc)
    s.history.append(s.u)
    run.state = s
    pres, dres, gap = sol.kkt_residuals
    run.trace.append(
        {
            "n": n,
            "u": s.u,
            "u_normalized": u_norm,
            "delta": delta,
            "beta": beta,
            "x": x,
            "primal_res": pres,
            "dual_res": dres,
            "gap": gap,
        }
    )
    run.u_norm = u_norm
    if delta < eps or delta <= floor:
        run.status = SolveStatus.STATIONARY
        return False
    return True


def sca_solve(
    inst: MisoInstance,
    gamma1: float,
    eps: float = SCA_EPS,
    max_iter: int = SCA_MAX_ITER,
    tol: float = DEFAULT_TOL,
    rng: np.random.Generator | None = None,
    n_randomizations: int = DEFAULT_RANDOMIZATIONS,
) -> MisoSolution:
    return sca_solve_batch([inst], gamma1, eps, max_iter, tol, rng, n_randomizations)[0]
