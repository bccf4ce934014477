import numpy as np
import pytest

from swipt_noma.conic import (
    ConeSpec,
    ConicProblem,
    ProblemBuilder,
    Status,
    kkt_residuals,
    realify_hermitian_block,
    schur_2x2_as_rotated_soc,
    solve,
    solve_batch,
)
from swipt_noma.conic.cones import smat, svec

cp = pytest.importorskip("cvxpy")


def _lp(upper=3.0, lower=-1.0):
    b = ProblemBuilder()
    x = b.scalar("x")
    b.nonneg(upper - x, x - lower)
    b.maximize(x)
    return b.build()


def _max_eig(C):
    p = C.shape[0]
    b = ProblemBuilder()
    X = b.symmetric("X", p)
    b.psd(X)
    b.equal(X.trace() - 1.0)
    b.maximize(X.inner(C))
    return b.build()


def _random_mixed(rng, n=5, p=3):
    """Ball, LMI, halfspace and rotated cone; returns (builder problem, cvxpy value)."""
    b = ProblemBuilder()
    xs = [b.scalar(f"x{i}") for i in range(n)]
    C = rng.normal(size=n)
    b.soc(3.0, *xs)
    S = b.symmetric("S", p)
    b.psd(S)
    Ms = [(lambda M: M + M.T)(rng.normal(size=(p, p))) for _ in range(n)]
    for i in range(p):
        for j in range(i + 1):
            E = np.zeros((p, p))
            E[i, j] = E[j, i] = 1.0
            w = 1.0 if i == j else 0.5
            b.equal(S.inner(E) * w - (1.0 if i == j else 0.0) - sum(Ms[k][i, j] * xs[k] for k in range(n)))
    a = rng.normal(size=n)
    b.nonneg(1.0 - sum(a[k] * xs[k] for k in range(n)))
    b.rsoc(xs[0] + 2.0, xs[1] + 2.0, xs[2])
    b.maximize(sum(C[k] * xs[k] for k in range(n)))

    x = cp.Variable(n)
    cons = [
        cp.norm(x) <= 3,
        np.eye(p) + sum(x[k] * Ms[k] for k in range(n)) >> 0,
        a @ x <= 1,
        cp.SOC(x[0] + x[1] + 4, cp.hstack([x[0] - x[1], 2 * x[2]])),
    ]
    prob = cp.Problem(cp.Maximize(C @ x), cons)
    prob.solve(solver="CLARABEL")
    return b.build(), prob.value


class TestMicroProblems:
    def test_lp(self):
        sol = solve(_lp())
        assert sol.status is Status.OPTIMAL
        assert abs(sol.objective - 3.0) <= 1e-8

    def test_max_eigenvalue_sdp(self):
        rng = np.random.default_rng(3)
        M = rng.normal(size=(4, 4))
        C = M + M.T
        sol = solve(_max_eig(C))
        assert sol.status is Status.OPTIMAL
        assert abs(sol.objective - np.linalg.eigvalsh(C)[-1]) <= 1e-8

    def test_rotated_cone_geometric_mean(self):
        b = ProblemBuilder()
        t = b.scalar("t")
        b.rsoc(2.0, 8.0, t)
        b.maximize(t)
        sol = solve(b.build())
        assert abs(sol.objective - 4.0) <= 1e-8

    def test_schur_helper_matches_lmi(self):
        # [[a, v], [v, b]] >= 0 with a = 1, b = 9 allows v up to 3
        b = ProblemBuilder()
        v = b.scalar("v")
        b.add(schur_2x2_as_rotated_soc(1.0, 9.0, v))
        b.maximize(v)
        assert abs(solve(b.build()).objective - 3.0) <= 1e-8

    def test_hermitian_variable(self):
        # max Re(h^H W h) over trace-one Hermitian PSD W is ||h||^2
        h = np.array([1.0 + 1.0j, 0.5 - 2.0j])
        b = ProblemBuilder()
        W = b.hermitian("W", 2)
        b.psd(W)
        b.nonneg(1.0 - W.trace())
        b.maximize(W.inner(np.outer(h, h.conj())))
        prob = b.build()
        sol = solve(prob)
        assert abs(sol.objective - np.vdot(h, h).real) <= 1e-7
        Wv = W.value(sol.x[prob.var_names["W"]])
        np.testing.assert_allclose(Wv, Wv.conj().T, atol=1e-12)


class TestCertificates:
    def test_infeasible(self):
        b = ProblemBuilder()
        x = b.scalar("x")
        b.nonneg(x - 1.0, -x)
        b.maximize(x)
        assert solve(b.build()).status is Status.INFEASIBLE

    def test_unbounded(self):
        b = ProblemBuilder()
        x = b.scalar("x")
        b.nonneg(x)
        b.maximize(x)
        assert solve(b.build()).status is Status.UNBOUNDED

    def test_status_is_enum_when_iterations_run_out(self):
        sol = solve(_max_eig(np.diag([1.0, 2.0, 3.0])), max_iter=1)
        assert isinstance(sol.status, Status)
        assert sol.status is Status.NUMERICAL_TROUBLE


class TestAgainstReference:
    def test_random_mixed_cones(self):
        rng = np.random.default_rng(0)
        probs, refs = zip(*[_random_mixed(rng) for _ in range(40)])
        sols = solve_batch(list(probs))
        for prob, sol, ref in zip(probs, sols, refs):
            assert sol.status is Status.OPTIMAL
            assert abs(sol.objective - ref) <= 1e-6 * (1 + abs(ref))
            assert max(kkt_residuals(prob, sol.x, sol.y, sol.z)) <= 1e-7

    def test_batch_equals_single(self):
        rng = np.random.default_rng(1)
        probs = [_random_mixed(rng)[0] for _ in range(5)]
        for a, b in zip(solve_batch(probs), [solve(p) for p in probs]):
            assert abs(a.objective - b.objective) <= 1e-8


class TestHelpers:
    def test_svec_roundtrip(self):
        rng = np.random.default_rng(2)
        M = rng.normal(size=(2, 3, 3))
        S = M + M.transpose(0, 2, 1)
        np.testing.assert_allclose(smat(svec(S), 3), S, atol=1e-14)
        # svec preserves the trace inner product
        assert np.isclose(svec(S)[0] @ svec(S)[1], np.trace(S[0] @ S[1]))

    def test_realify_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            realify_hermitian_block(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_realify_spectrum_doubles(self):
        H = np.array([[2.0, 1j], [-1j, 3.0]])
        lam = np.linalg.eigvalsh(H)
        np.testing.assert_allclose(np.linalg.eigvalsh(realify_hermitian_block(H)), np.repeat(lam, 2), atol=1e-12)

    def test_cone_spec_validation(self):
        with pytest.raises(ValueError):
            ConeSpec("cube", 2)
        with pytest.raises(ValueError):
            ConeSpec("rsoc", 1)

    def test_problem_shape_check(self):
        with pytest.raises(ValueError):
            ConicProblem(c=np.zeros(2), F=np.zeros((3, 2)), f=np.zeros(3), cones=(ConeSpec("nonneg", 2),))
