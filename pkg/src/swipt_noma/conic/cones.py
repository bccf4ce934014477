"""Batched cone algebra for the interior-point solver.

Every routine works on arrays whose first axis indexes independent problems
that share one cone structure.  Vectors have shape ``(B, d)``, stacks of
column vectors ``(B, d, k)``.

Only self-scaled cones appear here: the nonnegative orthant, the Lorentz
(second-order) cone and the real symmetric PSD cone in ``svec`` storage.
Rotated second-order cones are mapped onto Lorentz cones by the problem layer.
"""

from __future__ import annotations

import numpy as np

SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# svec / smat
# ---------------------------------------------------------------------------

_SVEC_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _svec_index(p: int):
    if p not in _SVEC_CACHE:
        rows, cols = np.tril_indices(p)
        scale = np.where(rows == cols, 1.0, SQRT2)
        _SVEC_CACHE[p] = (rows, cols, scale)
    return _SVEC_CACHE[p]


def svec_dim(p: int) -> int:
    return p * (p + 1) // 2


def svec(X: np.ndarray) -> np.ndarray:
    """Map symmetric matrices ``(..., p, p)`` to ``(..., p(p+1)/2)``.

    Off-diagonal entries carry a factor sqrt(2) so that the Euclidean inner
    product of two svec's equals the trace inner product of the matrices.
    """
    p = X.shape[-1]
    rows, cols, scale = _svec_index(p)
    return X[..., rows, cols] * scale


def smat(v: np.ndarray, p: int) -> np.ndarray:
    rows, cols, scale = _svec_index(p)
    X = np.zeros(v.shape[:-1] + (p, p))
    vals = v / scale
    X[..., rows, cols] = vals
    X[..., cols, rows] = vals
    return X


# ---------------------------------------------------------------------------
# Cone blocks
# ---------------------------------------------------------------------------


class NonNegBlock:
    kind = "nonneg"

    def __init__(self, dim: int):
        self.dim = dim
        self.degree = dim

    def identity(self) -> np.ndarray:
        return np.ones(self.dim)

    def margin(self, x):
        """Smallest t with x + t*e in the cone boundary, i.e. -lambda_min(x)."""
        return -x.min(axis=1)

    def max_step(self, x, d):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d < 0, -x / d, np.inf)
        return ratio.min(axis=1)

    def scaling(self, s, z):
        return _NonNegScaling(s, z)

    def jordan(self, u, v):
        return u * v

    def inverse_product(self, u, d):
        """Solve u o x = d for x."""
        return d / u


class _NonNegScaling:
    def __init__(self, s, z):
        self.w = np.sqrt(s / z)
        self.lam = np.sqrt(s * z)

    def lam_vec(self):
        return self.lam

    def lam_div(self, d):
        return d / self.lam

    def W(self, v):
        return _bcast(self.w, v) * v

    def Winv(self, v):
        return v / _bcast(self.w, v)

    WT = W
    WinvT = Winv


class SocBlock:
    """Lorentz cone {x : x0 >= ||x1||}."""

    kind = "soc"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("second-order cone needs dim >= 1")
        self.dim = dim
        self.degree = 1

    def identity(self):
        e = np.zeros(self.dim)
        e[0] = 1.0
        return e

    def margin(self, x):
        return np.linalg.norm(x[:, 1:], axis=1) - x[:, 0]

    def max_step(self, x, d):
        xres = np.sqrt(np.maximum(x[:, 0] ** 2 - np.sum(x[:, 1:] ** 2, axis=1), 1e-300))
        xb = x / xres[:, None]
        db = d / xres[:, None]
        rho0 = xb[:, 0] * db[:, 0] - np.sum(xb[:, 1:] * db[:, 1:], axis=1)
        coef = (rho0 + db[:, 0]) / (xb[:, 0] + 1.0)
        rho1 = db[:, 1:] - coef[:, None] * xb[:, 1:]
        t = np.linalg.norm(rho1, axis=1) - rho0
        with np.errstate(divide="ignore"):
            return np.where(t > 0, 1.0 / np.where(t > 0, t, 1.0), np.inf)

    def scaling(self, s, z):
        return _SocScaling(s, z)

    def jordan(self, u, v):
        out = np.empty_like(u)
        out[:, 0] = np.sum(u * v, axis=1)
        out[:, 1:] = u[:, :1] * v[:, 1:] + v[:, :1] * u[:, 1:]
        return out

    @staticmethod
    def inverse_product(u, d):
        det = u[:, 0] ** 2 - np.sum(u[:, 1:] ** 2, axis=1)
        x0 = (u[:, 0] * d[:, 0] - np.sum(u[:, 1:] * d[:, 1:], axis=1)) / det
        out = np.empty_like(d)
        out[:, 0] = x0
        out[:, 1:] = (d[:, 1:] - x0[:, None] * u[:, 1:]) / u[:, :1]
        return out


class _SocScaling:
    """Nesterov-Todd scaling W (symmetric) with W z = W^{-1} s = lambda."""

    def __init__(self, s, z):
        sres = np.sqrt(np.maximum(s[:, 0] ** 2 - np.sum(s[:, 1:] ** 2, axis=1), 1e-300))
        zres = np.sqrt(np.maximum(z[:, 0] ** 2 - np.sum(z[:, 1:] ** 2, axis=1), 1e-300))
        sb = s / sres[:, None]
        zb = z / zres[:, None]
        gamma = np.sqrt((1.0 + np.sum(sb * zb, axis=1)) / 2.0)
        wb = np.empty_like(s)
        wb[:, 0] = (sb[:, 0] + zb[:, 0]) / (2 * gamma)
        wb[:, 1:] = (sb[:, 1:] - zb[:, 1:]) / (2 * gamma)[:, None]
        self.eta = np.sqrt(sres / zres)
        self.wb = wb
        self.lam = self.W(z)

    def lam_vec(self):
        return self.lam

    def lam_div(self, d):
        return SocBlock.inverse_product(self.lam, d)

    def _apply(self, v, sign, factor):
        wb = self.wb
        if v.ndim == 3:
            w0 = wb[:, 0][:, None]
            w1 = wb[:, 1:][:, :, None]
            v0 = v[:, 0, :]
            v1 = v[:, 1:, :]
            dot = np.sum(w1 * v1, axis=1)
            out = np.empty_like(v)
            out[:, 0, :] = w0 * v0 + sign * dot
            out[:, 1:, :] = v1 + (sign * v0 + dot / (1.0 + w0))[:, None, :] * w1
            return out * factor[:, None, None]
        w0 = wb[:, 0]
        w1 = wb[:, 1:]
        v0 = v[:, 0]
        v1 = v[:, 1:]
        dot = np.sum(w1 * v1, axis=1)
        out = np.empty_like(v)
        out[:, 0] = w0 * v0 + sign * dot
        out[:, 1:] = v1 + (sign * v0 + dot / (1.0 + w0))[:, None] * w1
        return out * factor[:, None]

    def W(self, v):
        return self._apply(v, 1.0, self.eta)

    def Winv(self, v):
        return self._apply(v, -1.0, 1.0 / self.eta)

    WT = W
    WinvT = Winv


class PsdBlock:
    """Real symmetric PSD cone of side p, stored as svec."""

    kind = "psd"

    def __init__(self, side: int):
        if side < 1:
            raise ValueError("PSD cone needs side >= 1")
        self.side = side
        self.dim = svec_dim(side)
        self.degree = side

    def identity(self):
        return svec(np.eye(self.side))

    def margin(self, x):
        return -np.linalg.eigvalsh(smat(x, self.side))[:, 0]

    def max_step(self, x, d):
        lam, Q = np.linalg.eigh(smat(x, self.side))
        lam = np.maximum(lam, 1e-300)
        Linv = Q.transpose(0, 2, 1) / np.sqrt(lam)[:, :, None]
        M = Linv @ smat(d, self.side) @ Linv.transpose(0, 2, 1)
        mmin = np.linalg.eigvalsh(M)[:, 0]
        with np.errstate(divide="ignore"):
            return np.where(mmin < 0, -1.0 / np.where(mmin < 0, mmin, -1.0), np.inf)

    def scaling(self, s, z):
        return _PsdScaling(s, z, self.side)

    def max_step_scaled(self, lam, d):
        """Step to the boundary from diag(lam) (eigenvalues, shape (B, p)) along d."""
        isq = 1.0 / np.sqrt(np.maximum(lam, 1e-300))
        M = smat(d, self.side) * isq[:, :, None] * isq[:, None, :]
        ok = np.all(np.isfinite(M), axis=(1, 2))
        M[~ok] = 0.0
        mmin = np.linalg.eigvalsh(M)[:, 0]
        # a broken direction gets a zero step
        mmin[~ok] = -np.inf
        with np.errstate(divide="ignore"):
            return np.where(mmin < 0, -1.0 / np.where(mmin < 0, mmin, -1.0), np.inf)

    def jordan(self, u, v):
        U = smat(u, self.side)
        V = smat(v, self.side)
        P = U @ V
        return svec(0.5 * (P + P.transpose(0, 2, 1)))


class _PsdScaling:
    """W(Z) = R^T Z R and W^{-T}(S) = R^{-1} S R^{-T}, both equal to diag(lambda)."""

    def __init__(self, s, z, p):
        self.p = p
        S, Z = smat(s, p), smat(z, p)
        try:
            Ls = np.linalg.cholesky(S)
            Lz = np.linalg.cholesky(Z)
        except np.linalg.LinAlgError:
            Ls, Lz = _eig_factor(S), _eig_factor(Z)
        U, lam, Vt = np.linalg.svd(Lz.transpose(0, 2, 1) @ Ls)
        lam = np.maximum(lam, 1e-300)
        isq = 1.0 / np.sqrt(lam)
        # S = Ls Ls^T, Z = Lz Lz^T, Lz^T Ls = U diag(lam) V^T
        self.R = (Ls @ Vt.transpose(0, 2, 1)) * isq[:, None, :]
        self.Rinv = isq[:, :, None] * (U.transpose(0, 2, 1) @ Lz.transpose(0, 2, 1))
        self.lam = lam
        rows, cols, _ = _svec_index(p)
        self._pair = 0.5 * (lam[:, rows] + lam[:, cols])
        self._diag = rows == cols

    def lam_vec(self):
        out = np.zeros((self.lam.shape[0], svec_dim(self.p)))
        out[:, self._diag] = self.lam
        return out

    def lam_div(self, d):
        return d / self._pair

    def _congruence(self, v, M):
        # returns svec(M^T mat(v) M)
        p = self.p
        if v.ndim == 3:
            X = smat(np.moveaxis(v, 1, 2), p)  # (B, k, p, p)
            Y = M.transpose(0, 2, 1)[:, None] @ X @ M[:, None]
            return np.moveaxis(svec(Y), 2, 1)
        X = smat(v, p)
        return svec(M.transpose(0, 2, 1) @ X @ M)

    def W(self, v):
        return self._congruence(v, self.R)

    def WT(self, v):
        return self._congruence(v, self.R.transpose(0, 2, 1))

    def Winv(self, v):
        return self._congruence(v, self.Rinv)

    def WinvT(self, v):
        return self._congruence(v, self.Rinv.transpose(0, 2, 1))


def _eig_factor(X):
    lam, Q = np.linalg.eigh(X)
    return Q * np.sqrt(np.maximum(lam, 1e-300))[:, None, :]


def _bcast(w, v):
    return w[:, :, None] if v.ndim == 3 else w
