"""Conic problem data and a small modelling layer.

A :class:`ConicProblem` is

    maximize    c @ x + offset
    subject to  F @ x + f  in  K_1 x ... x K_r
                A @ x == b

with ``K_i`` one of the cones described by :class:`ConeSpec`.  Rows of
``F``/``f`` are laid out cone after cone; PSD blocks use ``svec`` storage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cones import svec, svec_dim

CONE_KINDS = ("nonneg", "soc", "rsoc", "psd")
MAX_PSD_SIDE = 16


@dataclass(frozen=True)
class ConeSpec:
    """One cone factor.

    ``dim`` is the number of rows for ``nonneg``/``soc``/``rsoc`` and the
    matrix side for ``psd``.  The rotated cone is {(a, b, z): a*b >= |z|^2,
    a >= 0, b >= 0}.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("cone dimension must be >= 1")
        if self.kind == "rsoc" and self.dim < 2:
            raise ValueError("rotated cone needs at least two rows")
        if self.kind == "psd" and self.dim > MAX_PSD_SIDE:
            raise ValueError(f"PSD side {self.dim} exceeds {MAX_PSD_SIDE}")

    @property
    def rows(self) -> int:
        return svec_dim(self.dim) if self.kind == "psd" else self.dim


@dataclass
class ConicProblem:
    c: np.ndarray
    F: np.ndarray
    f: np.ndarray
    cones: tuple[ConeSpec, ...]
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    offset: float = 0.0
    var_names: dict[str, slice] = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        self.F = np.asarray(self.F, dtype=float).reshape(-1, n)
        self.f = np.asarray(self.f, dtype=float)
        if self.A is None:
            self.A = np.zeros((0, n))
            self.b = np.zeros(0)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float)
        self.cones = tuple(self.cones)
        m = sum(k.rows for k in self.cones)
        if self.F.shape[0] != m or self.f.shape != (m,):
            raise ValueError(f"cone rows ({m}) do not match F {self.F.shape} / f {self.f.shape}")
        if self.b.shape != (self.A.shape[0],):
            raise ValueError("A and b have inconsistent shapes")

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def structure(self) -> tuple:
        """Key shared by problems that can be solved in one batch."""
        return (self.n, self.A.shape[0], self.cones)

    def cone_slices(self) -> list[slice]:
        out, start = [], 0
        for k in self.cones:
            out.append(slice(start, start + k.rows))
            start += k.rows
        return out

    def value_of(self, x: np.ndarray, name: str) -> np.ndarray:
        return x[self.var_names[name]]


# ---------------------------------------------------------------------------
# Affine expressions
# ---------------------------------------------------------------------------


class Affine:
    """Affine scalar expression over named variable blocks."""

    __slots__ = ("terms", "const")

    def __init__(self, terms=None, const=0.0):
        self.terms: dict[str, np.ndarray] = terms or {}
        self.const = float(const)

    @staticmethod
    def lift(v) -> "Affine":
        return v if isinstance(v, Affine) else Affine({}, float(v))

    def __add__(self, other):
        other = Affine.lift(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else v
        return Affine(terms, self.const + other.const)

    __radd__ = __add__

    def __mul__(self, a):
        a = float(a)
        return Affine({k: a * v for k, v in self.terms.items()}, a * self.const)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return self * (1.0 / float(a))

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-Affine.lift(other))

    def __rsub__(self, other):
        return Affine.lift(other) - self

    def __repr__(self):
        return f"Affine({list(self.terms)}, const={self.const:g})"


class SymmetricVariable:
    """Real symmetric matrix variable parametrised by its svec."""

    def __init__(self, name: str, side: int):
        self.name, self.side = name, side
        self.size = svec_dim(side)

    def inner(self, C: np.ndarray) -> Affine:
        return Affine({self.name: svec(np.asarray(C, dtype=float))})

    def trace(self) -> Affine:
        return self.inner(np.eye(self.side))

    def psd_rows(self) -> tuple[ConeSpec, list[Affine]]:
        eye = np.eye(self.size)
        return ConeSpec("psd", self.side), [Affine({self.name: eye[k]}) for k in range(self.size)]

    def value(self, params: np.ndarray) -> np.ndarray:
        from .cones import smat

        return smat(np.asarray(params), self.side)


_HERM_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def hermitian_basis(n: int) -> np.ndarray:
    """Real basis (n*n, n, n) of the n x n Hermitian matrices.

    Ordering: the n diagonal entries, then for each i < j the real and the
    imaginary part of entry (i, j).
    """
    if n not in _HERM_CACHE:
        basis = []
        for i in range(n):
            E = np.zeros((n, n), dtype=complex)
            E[i, i] = 1.0
            basis.append(E)
        for i in range(n):
            for j in range(i + 1, n):
                E = np.zeros((n, n), dtype=complex)
                E[i, j] = E[j, i] = 1.0
                basis.append(E)
                E = np.zeros((n, n), dtype=complex)
                E[i, j] = 1j
                E[j, i] = -1j
                basis.append(E)
        basis = np.array(basis)
        psd_map = np.stack([svec(realify_hermitian_block(E)) for E in basis], axis=1)
        _HERM_CACHE[n] = (basis, psd_map)
    return _HERM_CACHE[n][0]


def _hermitian_psd_map(n: int) -> np.ndarray:
    hermitian_basis(n)
    return _HERM_CACHE[n][1]


class HermitianVariable:
    """Complex Hermitian n x n matrix variable with n*n real parameters.

    The PSD constraint is imposed on the real 2n x 2n embedding.
    """

    def __init__(self, name: str, n: int):
        self.name, self.n = name, n
        self.size = n * n
        self._basis = hermitian_basis(n)

    def trace_coeffs(self, H: np.ndarray) -> np.ndarray:
        """Real coefficient vector of the functional W -> Tr(H W)."""
        H = np.asarray(H)
        return np.real(np.einsum("ij,kji->k", H, self._basis))

    def inner(self, H: np.ndarray) -> Affine:
        return Affine({self.name: self.trace_coeffs(H)})

    def trace(self) -> Affine:
        return self.inner(np.eye(self.n))

    def psd_rows(self) -> tuple[ConeSpec, list[Affine]]:
        M = _hermitian_psd_map(self.n)
        return ConeSpec("psd", 2 * self.n), [Affine({self.name: M[r]}) for r in range(M.shape[0])]

    def value(self, params: np.ndarray) -> np.ndarray:
        return np.einsum("k,kij->ij", np.asarray(params, dtype=float), self._basis)


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------


class ProblemBuilder:
    """Collects variables and constraints, then emits a :class:`ConicProblem`."""

    def __init__(self):
        self._sizes: dict[str, int] = {}
        self._cones: list[tuple[ConeSpec, list[Affine]]] = []
        self._eqs: list[Affine] = []
        self._objective = Affine()

    def _declare(self, name: str, size: int):
        if name in self._sizes:
            raise ValueError(f"variable {name!r} declared twice")
        self._sizes[name] = size

    def scalar(self, name: str) -> Affine:
        self._declare(name, 1)
        return Affine({name: np.ones(1)})

    def symmetric(self, name: str, side: int) -> SymmetricVariable:
        var = SymmetricVariable(name, side)
        self._declare(name, var.size)
        return var

    def hermitian(self, name: str, n: int) -> HermitianVariable:
        var = HermitianVariable(name, n)
        self._declare(name, var.size)
        return var

    def nonneg(self, *exprs):
        for e in exprs:
            self._cones.append((ConeSpec("nonneg", 1), [Affine.lift(e)]))

    def soc(self, head, *tail):
        rows = [Affine.lift(head)] + [Affine.lift(t) for t in tail]
        self._cones.append((ConeSpec("soc", len(rows)), rows))

    def rsoc(self, a, b, *z):
        rows = [Affine.lift(a), Affine.lift(b)] + [Affine.lift(t) for t in z]
        self._cones.append((ConeSpec("rsoc", len(rows)), rows))

    def add(self, constraint: tuple[ConeSpec, list[Affine]]):
        spec, rows = constraint
        if len(rows) != spec.rows:
            raise ValueError("row count does not match cone")
        self._cones.append((spec, [Affine.lift(r) for r in rows]))

    def psd(self, var):
        self.add(var.psd_rows())

    def equal(self, expr):
        self._eqs.append(Affine.lift(expr))

    def maximize(self, expr):
        self._objective = Affine.lift(expr)

    def build(self) -> ConicProblem:
        slices, start = {}, 0
        for name, size in self._sizes.items():
            slices[name] = slice(start, start + size)
            start += size
        n = start

        def dense(expr: Affine) -> np.ndarray:
            row = np.zeros(n)
            for name, coef in expr.terms.items():
                row[slices[name]] += coef
            return row

        rows, consts, specs = [], [], []
        merged: list[Affine] = []
        # consecutive 1-row nonneg constraints are merged into one orthant
        for spec, exprs in self._cones:
            if spec.kind == "nonneg":
                merged.extend(exprs)
                continue
            if merged:
                specs.append(ConeSpec("nonneg", len(merged)))
                rows.extend(dense(e) for e in merged)
                consts.extend(e.const for e in merged)
                merged = []
            specs.append(spec)
            rows.extend(dense(e) for e in exprs)
            consts.extend(e.const for e in exprs)
        if merged:
            specs.append(ConeSpec("nonneg", len(merged)))
            rows.extend(dense(e) for e in merged)
            consts.extend(e.const for e in merged)
        F = np.array(rows).reshape(-1, n)
        A = np.array([dense(e) for e in self._eqs]).reshape(-1, n)
        b = -np.array([e.const for e in self._eqs])
        return ConicProblem(
            c=dense(self._objective),
            F=F,
            f=np.array(consts),
            cones=tuple(specs),
            A=A,
            b=b,
            offset=self._objective.const,
            var_names=slices,
        )


# ---------------------------------------------------------------------------
# Helpers named in the module contract
# ---------------------------------------------------------------------------


def realify_hermitian_block(H: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]] of a Hermitian matrix.

    The embedding preserves PSD-ness both ways and doubles every eigenvalue's
    multiplicity; for Hermitian H, X one has Tr(H X) = Tr(R(H) R(X)) / 2.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.abs(H).max(initial=0.0)))
    if np.abs(H - H.conj().T).max(initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    re, im = np.real(H), np.imag(H)
    return np.block([[re, -im], [im, re]])


def schur_2x2_as_rotated_soc(a_expr, b_expr, v_expr) -> tuple[ConeSpec, list[Affine]]:
    """[[a, v], [v, b]] >= 0  <=>  a*b >= v^2, a >= 0, b >= 0."""
    return ConeSpec("rsoc", 3), [Affine.lift(a_expr), Affine.lift(b_expr), Affine.lift(v_expr)]


def dump_problem(problem: ConicProblem) -> str:
    """Human-readable listing of variables, cones and affine rows."""
    names = {}
    for name, sl in problem.var_names.items():
        for k in range(sl.start, sl.stop):
            names[k] = name if sl.stop - sl.start == 1 else f"{name}[{k - sl.start}]"

    def fmt(row, const):
        parts = [f"{row[k]:+.6g}*{names.get(k, f'x{k}')}" for k in np.flatnonzero(row)]
        parts.append(f"{const:+.6g}")
        return " ".join(parts)

    lines = [f"variables ({problem.n}):"]
    for name, sl in problem.var_names.items():
        lines.append(f"  {name}: {sl.stop - sl.start}")
    lines.append("maximize: " + fmt(problem.c, problem.offset))
    for spec, sl in zip(problem.cones, problem.cone_slices()):
        lines.append(f"cone {spec.kind}({spec.dim}):")
        for r in range(sl.start, sl.stop):
            lines.append("  " + fmt(problem.F[r], problem.f[r]))
    for r in range(problem.A.shape[0]):
        lines.append("equal: " + fmt(problem.A[r], -problem.b[r]) + " == 0")
    return "\n".join(lines)
