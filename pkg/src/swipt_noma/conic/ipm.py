"""Batched primal-dual interior-point method for small dense conic programs.

The user-facing problem (see :mod:`.problem`) is a maximisation.  Internally
it is rewritten in the minimisation form

    minimize  c^T x   s.t.  G x + s = h,  A x = b,  s in K

with every rotated cone turned into a Lorentz cone and all orthant rows
gathered into one block.  The iteration works on the homogeneous self-dual
embedding with Nesterov-Todd scaling and a Mehrotra predictor-corrector, so
infeasible and unbounded problems end in certificates rather than stalls.

Many problems that share one cone structure are solved together: all linear
algebra is vectorised over a leading batch axis and finished problems are
dropped from the working set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .cones import NonNegBlock, PsdBlock, SocBlock
from .problem import ConicProblem

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 200
BATCH_CHUNK = 2048
POLISH = 1e-3


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_TROUBLE = "numerical_trouble"


@dataclass
class ConicSolution:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    objective: float
    status: Status
    kkt_residuals: tuple[float, float, float]
    iterations: int
    var_names: dict[str, slice] = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, name: str) -> np.ndarray:
        return self.x[self.var_names[name]]


# ---------------------------------------------------------------------------
# Layout: user rows <-> internal rows
# ---------------------------------------------------------------------------


class _Layout:
    def __init__(self, problem: ConicProblem):
        slices = problem.cone_slices()
        nonneg_rows, other = [], []
        for spec, sl in zip(problem.cones, slices):
            if spec.kind == "nonneg":
                nonneg_rows.extend(range(sl.start, sl.stop))
            else:
                other.append((spec, sl))
        perm = list(nonneg_rows)
        self.blocks = []
        self.rsoc_heads = []
        start = 0
        if nonneg_rows:
            self.blocks.append((NonNegBlock(len(nonneg_rows)), slice(0, len(nonneg_rows))))
            start = len(nonneg_rows)
        for spec, sl in other:
            perm.extend(range(sl.start, sl.stop))
            rows = sl.stop - sl.start
            if spec.kind == "psd":
                blk = PsdBlock(spec.dim)
            else:
                blk = SocBlock(rows)
                if spec.kind == "rsoc":
                    self.rsoc_heads.append(start)
            self.blocks.append((blk, slice(start, start + rows)))
            start += rows
        self.m = start
        self.perm = np.array(perm, dtype=int)
        self.inv_perm = np.argsort(self.perm)
        self.degree = sum(blk.degree for blk, _ in self.blocks)
        self.e = np.concatenate([blk.identity() for blk, _ in self.blocks]) if self.blocks else np.zeros(0)
        heads = np.array(self.rsoc_heads, dtype=int)
        self._h0, self._h1 = heads, heads + 1

    def _mix(self, v, scale):
        # (a, b) -> scale * (a + b, a - b) on every rotated-cone head pair
        if len(self._h0) == 0:
            return v
        v = v.copy()
        a = v[:, self._h0].copy()
        b = v[:, self._h1].copy()
        v[:, self._h0] = scale * (a + b)
        v[:, self._h1] = scale * (a - b)
        return v

    def primal_in(self, v):
        """User row space -> internal (cone) coordinates."""
        return self._mix(v[:, self.perm], 0.5)

    def primal_out(self, v):
        return self._mix(v, 1.0)[:, self.inv_perm]

    def dual_in(self, v):
        return self._mix(v[:, self.perm], 1.0)

    def dual_out(self, v):
        return self._mix(v, 0.5)[:, self.inv_perm]

    def violation(self, v):
        """Largest cone-membership violation of internal vectors v (B, m)."""
        out = np.zeros(v.shape[0])
        for blk, sl in self.blocks:
            out = np.maximum(out, blk.margin(v[:, sl]))
        return out


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------


def kkt_residuals(problem: ConicProblem, x, y, z) -> tuple[float, float, float]:
    """Dimensionless (primal, dual, gap) residuals of a candidate point.

    Computed from the problem data only: the primal slack is F x + f, the dual
    equation is A^T y - F^T z = c with z in the dual cone, and the gap is the
    relative difference between the dual and primal objectives.
    """
    layout = _Layout(problem)
    data = _Stack([problem])
    p, d, g = _user_residuals(
        data, layout, np.atleast_2d(x), np.atleast_2d(y).reshape(1, -1), np.atleast_2d(z)
    )
    return float(p[0]), float(d[0]), float(g[0])


def _user_residuals(data, layout, x, y, z, cone_check_below=np.inf):
    """Residuals; cone violations are only evaluated where the linear parts are below the bound."""
    s = np.einsum("bmn,bn->bm", data.F, x) + data.f
    ax = np.einsum("bpn,bn->bp", data.A, x) - data.b
    nb = 1.0 + np.linalg.norm(data.b, axis=1)
    nf = 1.0 + np.linalg.norm(data.f, axis=1)
    pres = np.linalg.norm(ax, axis=1) / nb
    dual_eq = np.einsum("bpn,bp->bn", data.A, y) - np.einsum("bmn,bm->bn", data.F, z) - data.c
    nc = 1.0 + np.linalg.norm(data.c, axis=1)
    nz = 1.0 + np.linalg.norm(z, axis=1)
    dres = np.linalg.norm(dual_eq, axis=1) / nc
    pobj = np.sum(data.c * x, axis=1)
    dobj = np.sum(data.b * y, axis=1) + np.sum(data.f * z, axis=1)
    gap = np.abs(dobj - pobj) / (1.0 + np.abs(pobj))
    sel = np.flatnonzero(np.maximum(np.maximum(pres, dres), gap) <= cone_check_below)
    if sel.size:
        pres[sel] = np.maximum(pres[sel], layout.violation(layout.primal_in(s[sel])) / nf[sel])
        dres[sel] = np.maximum(dres[sel], layout.violation(layout.dual_in(z[sel])) / nz[sel])
    return pres, dres, gap


class _Stack:
    """Problem data stacked along a batch axis."""

    def __init__(self, problems):
        self.F = np.stack([p.F for p in problems])
        self.f = np.stack([p.f for p in problems])
        self.c = np.stack([p.c for p in problems])
        self.A = np.stack([p.A for p in problems])
        self.b = np.stack([p.b for p in problems])
        self.offset = np.array([p.offset for p in problems])


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


def solve(problem: ConicProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> ConicSolution:
    return solve_batch([problem], tol=tol, max_iter=max_iter)[0]


def solve_batch(problems, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> list[ConicSolution]:
    """Solve problems that share one structure (same variables and cones)."""
    problems = list(problems)
    if not problems:
        return []
    key = problems[0].structure()
    for p in problems[1:]:
        if p.structure() != key:
            raise ValueError("solve_batch needs problems with identical structure")
    out: list[ConicSolution] = []
    for lo in range(0, len(problems), BATCH_CHUNK):
        # diverging batch members are detected and retired explicitly
        with np.errstate(all="ignore"):
            out.extend(_solve_chunk(problems[lo : lo + BATCH_CHUNK], tol, max_iter))
    return out


def _ruiz(G, A, layout, n_iter=8):
    """Row (per cone block) and column equilibration factors."""
    B, m, n = G.shape
    E = np.ones((B, m))
    Ea = np.ones((B, A.shape[1]))
    D = np.ones((B, n))
    for _ in range(n_iter):
        Gs = E[:, :, None] * G * D[:, None, :]
        As = Ea[:, :, None] * A * D[:, None, :]
        col = np.maximum(np.abs(Gs).max(axis=1), np.abs(As).max(axis=1, initial=0.0))
        col = np.where(col > 1e-12, col, 1.0)
        row = np.abs(Gs).max(axis=2)
        for blk, sl in layout.blocks:
            if blk.kind != "nonneg":
                row[:, sl] = row[:, sl].max(axis=1, keepdims=True)
        row = np.where(row > 1e-12, row, 1.0)
        arow = np.abs(As).max(axis=2, initial=0.0) if A.shape[1] else np.ones((B, 0))
        arow = np.where(arow > 1e-12, arow, 1.0)
        D /= np.sqrt(col)
        E /= np.sqrt(row)
        Ea /= np.sqrt(arow)
    return E, Ea, D


def _apply_blocks(scalings, layout, v, method):
    out = np.empty_like(v)
    for sc, (_, sl) in zip(scalings, layout.blocks):
        out[:, sl] = getattr(sc, method)(v[:, sl])
    return out


def _lam_div(scalings, layout, d):
    out = np.empty_like(d)
    for sc, (_, sl) in zip(scalings, layout.blocks):
        out[:, sl] = sc.lam_div(d[:, sl])
    return out


def _jordan(layout, u, v):
    out = np.empty_like(u)
    for blk, sl in layout.blocks:
        out[:, sl] = blk.jordan(u[:, sl], v[:, sl])
    return out


def _max_step(layout, x, d):
    out = np.full(x.shape[0], np.inf)
    for blk, sl in layout.blocks:
        out = np.minimum(out, blk.max_step(x[:, sl], d[:, sl]))
    return out


def _shift_into_cone(layout, v):
    if layout.m == 0:
        return v
    margin = layout.violation(v)
    nrm = np.linalg.norm(v, axis=1)
    shift = np.where(margin >= -1e-8 * np.maximum(nrm, 1.0), 1.0 + margin, 0.0)
    return v + shift[:, None] * layout.e


class _Kkt:
    """Regularised reduced KKT operator [[H, A^T], [A, 0]] with refinement."""

    def __init__(self, Gs, A):
        B, _, n = Gs.shape
        p = A.shape[1]
        H = np.swapaxes(Gs, 1, 2) @ Gs
        K = np.zeros((B, n + p, n + p))
        K[:, :n, :n] = H
        K[:, :n, n:] = np.swapaxes(A, 1, 2)
        K[:, n:, :n] = A
        diag = np.einsum("bii->bi", H)
        delta = 1e-11 * np.maximum(diag.max(axis=1), 1.0)
        Kreg = K.copy()
        idx = np.arange(n + p)
        Kreg[:, idx[:n], idx[:n]] += delta[:, None]
        Kreg[:, idx[n:], idx[n:]] -= delta[:, None]
        self.K = K
        try:
            self.Kinv = np.linalg.inv(Kreg)
        except np.linalg.LinAlgError:
            self.Kinv = np.linalg.pinv(Kreg)

    def solve(self, rhs, refine=3):
        sol = self.Kinv @ rhs
        for _ in range(refine):
            sol = sol + self.Kinv @ (rhs - self.K @ sol)
        return sol


def _solve_chunk(problems, tol, max_iter):
    layout = _Layout(problems[0])
    data = _Stack(problems)
    B, n, p = len(problems), problems[0].n, problems[0].A.shape[0]
    m = layout.m

    # internal data: minimize c x, G x + s = h
    G0 = -_rows_in(layout, data.F)
    h0 = layout.primal_in(data.f)
    c0 = -data.c
    A0, b0 = data.A, data.b

    E, Ea, D = _ruiz(G0, A0, layout)
    G = E[:, :, None] * G0 * D[:, None, :]
    A = Ea[:, :, None] * A0 * D[:, None, :]
    h = E * h0
    b = Ea * b0
    c = D * c0
    sig_h = np.maximum(np.maximum(np.abs(h).max(axis=1, initial=0.0), np.abs(b).max(axis=1, initial=0.0)), 1.0)
    sig_c = np.maximum(np.abs(c).max(axis=1, initial=0.0), 1.0)
    h = h / sig_h[:, None]
    b = b / sig_h[:, None]
    c = c / sig_c[:, None]

    def to_user(idx, xs, ys, zs, scale):
        # scaled internal iterate -> user-space (x, y, z), divided by `scale`
        xu = D[idx] * xs * (sig_h[idx] / scale)[:, None]
        yu = Ea[idx] * ys * (sig_c[idx] / scale)[:, None]
        zu = layout.dual_out(E[idx] * zs * (sig_c[idx] / scale)[:, None])
        return xu, yu, zu

    # initial point
    kkt = _Kkt(G, A)
    GT = np.swapaxes(G, 1, 2)
    rhs = np.zeros((B, n + p, 2))
    rhs[:, :n, 0] = np.einsum("bnm,bm->bn", GT, h)
    rhs[:, n:, 0] = b
    rhs[:, :n, 1] = -c
    sol = kkt.solve(rhs)
    x = sol[:, :n, 0]
    s = h - np.einsum("bmn,bn->bm", G, x)
    y = sol[:, n:, 1]
    z = np.einsum("bmn,bn->bm", G, sol[:, :n, 1])
    s = _shift_into_cone(layout, s)
    z = _shift_into_cone(layout, z)
    tau = np.ones(B)
    kappa = np.ones(B)

    # np.full would coerce the str-valued enum to plain str
    status = np.empty(B, dtype=object)
    status[:] = [Status.NUMERICAL_TROUBLE] * B
    iters = np.zeros(B, dtype=int)
    res_x = np.zeros((B, n))
    res_y = np.zeros((B, p))
    res_z = np.zeros((B, m))
    res_kkt = np.full((B, 3), np.inf)
    best = np.full(B, np.inf)
    prev = np.full(B, np.inf)
    active = np.arange(B)
    broken = np.zeros(B, dtype=bool)

    e = layout.e

    for it in range(max_iter + 1):
        if active.size == 0:
            break
        # ------------------------------------------------------------ checks
        xu, yu, zu = to_user(active, x, y, z, tau)
        sub = _Sub(data, active)
        pres, dres, gap = _user_residuals(sub, layout, xu, yu, zu, cone_check_below=np.minimum(best[active], 1e-2))
        worst = np.maximum(np.maximum(pres, dres), gap)
        improved = worst < best[active]
        if np.any(improved):
            ii = active[improved]
            best[ii] = worst[improved]
            res_x[ii], res_y[ii], res_z[ii] = xu[improved], yu[improved], zu[improved]
            res_kkt[ii] = np.stack([pres, dres, gap], axis=1)[improved]
            iters[ii] = it
        # once within tol, keep polishing while the residuals still shrink fast
        reached = best[active] <= tol
        done = reached & ((worst <= POLISH * tol) | (worst > 0.5 * prev[active]))
        prev[active] = worst
        status[active[done]] = Status.OPTIMAL

        # certificates, in unscaled internal units
        xo = D[active] * x
        zo = E[active] * z
        yo = Ea[active] * y
        so = s / E[active]
        hz_by = np.sum(h0[active] * zo, axis=1) + np.sum(b0[active] * yo, axis=1)
        dual_ray = np.einsum("bmn,bm->bn", G0[active], zo) + np.einsum("bpn,bp->bn", A0[active], yo)
        nc0 = np.maximum(np.linalg.norm(c0[active], axis=1), 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            pinf = np.linalg.norm(dual_ray, axis=1) / nc0 / -hz_by
        infeas = (~reached) & (hz_by < 0) & (pinf <= tol)
        cx = np.sum(c0[active] * xo, axis=1)
        prim_ray_z = np.einsum("bmn,bn->bm", G0[active], xo) + so
        prim_ray_y = np.einsum("bpn,bn->bp", A0[active], xo)
        nh0 = np.maximum(np.linalg.norm(h0[active], axis=1), 1.0)
        nb0 = np.maximum(np.linalg.norm(b0[active], axis=1), 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            dinf = np.maximum(
                np.linalg.norm(prim_ray_z, axis=1) / nh0, np.linalg.norm(prim_ray_y, axis=1) / nb0
            ) / -cx
        unbnd = (~reached) & (~infeas) & (cx < 0) & (dinf <= tol)
        if np.any(infeas):
            ii = active[infeas]
            status[ii] = Status.INFEASIBLE
            iters[ii] = it
            # store the normalised Farkas ray
            scale = -hz_by[infeas]
            res_y[ii] = yo[infeas] / scale[:, None]
            res_z[ii] = layout.dual_out(zo[infeas] / scale[:, None])
            res_x[ii] = np.nan
        if np.any(unbnd):
            ii = active[unbnd]
            status[ii] = Status.UNBOUNDED
            iters[ii] = it
            res_x[ii] = xo[unbnd] / -cx[unbnd][:, None]
        finished = done | infeas | unbnd
        bad = ~np.all(np.isfinite(x), axis=1) | ~np.isfinite(tau) | ~np.all(np.isfinite(z), axis=1)
        finished |= bad | broken
        if it == max_iter:
            break
        if np.any(finished):
            keep = ~finished
            active = active[keep]
            x, y, z, s = x[keep], y[keep], z[keep], s[keep]
            tau, kappa = tau[keep], kappa[keep]
            if active.size == 0:
                break
        wG, wA, wh, wb, wc = G[active], A[active], h[active], b[active], c[active]

        # ------------------------------------------------------- Newton step
        Bw = active.size
        rx = np.einsum("bpn,bp->bn", wA, y) + np.einsum("bmn,bm->bn", wG, z) + wc * tau[:, None]
        ry = np.einsum("bpn,bn->bp", wA, x) - wb * tau[:, None]
        rz = np.einsum("bmn,bn->bm", wG, x) + s - wh * tau[:, None]
        rt = kappa + np.sum(wc * x, axis=1) + np.sum(wb * y, axis=1) + np.sum(wh * z, axis=1)
        mu = (np.sum(s * z, axis=1) + tau * kappa) / (layout.degree + 1)

        scalings = [blk.scaling(s[:, sl], z[:, sl]) for blk, sl in layout.blocks]
        lam = np.concatenate([sc.lam_vec() for sc in scalings], axis=1) if scalings else np.zeros((Bw, 0))
        Gs = _apply_blocks(scalings, layout, wG, "WinvT")
        hs = _apply_blocks(scalings, layout, wh, "WinvT")
        wrz = _apply_blocks(scalings, layout, rz, "WinvT")
        kkt = _Kkt(Gs, wA)
        GsT = np.swapaxes(Gs, 1, 2)

        rhs2 = np.concatenate([np.einsum("bnm,bm->bn", GsT, hs) - wc, wb], axis=1)
        u2 = kkt.solve(rhs2[:, :, None])[:, :, 0]
        u2x, u2y = u2[:, :n], u2[:, n:]
        u2z = np.einsum("bmn,bn->bm", Gs, u2x) - hs
        den = -kappa / tau + np.sum(wc * u2x, axis=1) + np.sum(wb * u2y, axis=1) + np.sum(hs * u2z, axis=1)

        def direction(eta, ds_rhs, dk_rhs):
            lds = _lam_div(scalings, layout, ds_rhs)
            r3 = -eta[:, None] * wrz - lds
            rhs1 = np.concatenate(
                [-eta[:, None] * rx + np.einsum("bnm,bm->bn", GsT, r3), -eta[:, None] * ry], axis=1
            )
            u1 = kkt.solve(rhs1[:, :, None])[:, :, 0]
            u1x, u1y = u1[:, :n], u1[:, n:]
            u1z = np.einsum("bmn,bn->bm", Gs, u1x) - r3
            num = (
                -eta * rt
                - dk_rhs / tau
                - (np.sum(wc * u1x, axis=1) + np.sum(wb * u1y, axis=1) + np.sum(hs * u1z, axis=1))
            )
            dtau = num / den
            dx = u1x + dtau[:, None] * u2x
            dy = u1y + dtau[:, None] * u2y
            dzt = u1z + dtau[:, None] * u2z
            dst = lds - dzt
            dz = _apply_blocks(scalings, layout, dzt, "Winv")
            ds = _apply_blocks(scalings, layout, dst, "WT")
            dkappa = (dk_rhs - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkappa, dst, dzt

        def step_length(dst, dzt, dtau, dkappa):
            # s + a ds = W^T (lam + a dst) and z + a dz = W^{-1} (lam + a dzt)
            a = np.full(Bw, np.inf)
            for sc, (blk, sl) in zip(scalings, layout.blocks):
                if blk.kind == "psd":
                    a = np.minimum(a, blk.max_step_scaled(sc.lam, dst[:, sl]))
                    a = np.minimum(a, blk.max_step_scaled(sc.lam, dzt[:, sl]))
                else:
                    lv = sc.lam_vec()
                    a = np.minimum(a, blk.max_step(lv, dst[:, sl]))
                    a = np.minimum(a, blk.max_step(lv, dzt[:, sl]))
            with np.errstate(divide="ignore", invalid="ignore"):
                a = np.minimum(a, np.where(dtau < 0, -tau / dtau, np.inf))
                a = np.minimum(a, np.where(dkappa < 0, -kappa / dkappa, np.inf))
            return a

        # predictor
        ds_aff = -_jordan(layout, lam, lam)
        dk_aff = -tau * kappa
        dx, dy, dz, ds, dtau, dkappa, dst, dzt = direction(np.ones(Bw), ds_aff, dk_aff)
        alpha_aff = np.minimum(1.0, step_length(dst, dzt, dtau, dkappa))
        sigma = (1.0 - alpha_aff) ** 3

        # corrector
        ds_cmb = ds_aff + sigma[:, None] * mu[:, None] * e - _jordan(layout, dst, dzt)
        dk_cmb = dk_aff + sigma * mu - dtau * dkappa
        dx, dy, dz, ds, dtau, dkappa, dst, dzt = direction(1.0 - sigma, ds_cmb, dk_cmb)
        broken = ~(
            np.all(np.isfinite(dx), axis=1)
            & np.all(np.isfinite(dy), axis=1)
            & np.all(np.isfinite(dz), axis=1)
            & np.all(np.isfinite(ds), axis=1)
            & np.isfinite(dtau)
            & np.isfinite(dkappa)
        )
        alpha = np.minimum(1.0, 0.99 * step_length(dst, dzt, dtau, dkappa))
        alpha = np.where(np.isfinite(alpha) & ~broken, alpha, 0.0)
        dx, dy, dz, ds = (np.where(broken[:, None], 0.0, d) for d in (dx, dy, dz, ds))
        dtau, dkappa = np.where(broken, 0.0, dtau), np.where(broken, 0.0, dkappa)

        x = x + alpha[:, None] * dx
        y = y + alpha[:, None] * dy
        z = z + alpha[:, None] * dz
        s = s + alpha[:, None] * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    status[(best <= tol) & (status == Status.NUMERICAL_TROUBLE)] = Status.OPTIMAL
    out = []
    for i, prob in enumerate(problems):
        status[i] = Status(status[i])
        xi = res_x[i]
        obj = float(np.dot(data.c[i], xi) + data.offset[i]) if status[i] is Status.OPTIMAL else np.nan
        if status[i] is Status.NUMERICAL_TROUBLE and np.all(np.isfinite(xi)):
            obj = float(np.dot(data.c[i], xi) + data.offset[i])
        out.append(
            ConicSolution(
                x=xi,
                y=res_y[i],
                z=res_z[i],
                objective=obj,
                status=status[i],
                kkt_residuals=tuple(float(r) for r in res_kkt[i]),
                iterations=int(iters[i]),
                var_names=prob.var_names,
            )
        )
    return out


def _rows_in(layout, M):
    """Apply the user->internal row map to the rows of (B, m, n) stacks."""
    return np.swapaxes(layout.primal_in(np.swapaxes(M, 1, 2).reshape(-1, M.shape[1])).reshape(
        M.shape[0], M.shape[2], M.shape[1]
    ), 1, 2)


class _Sub:
    def __init__(self, data, idx):
        self.F, self.f, self.c = data.F[idx], data.f[idx], data.c[idx]
        self.A, self.b = data.A[idx], data.b[idx]
