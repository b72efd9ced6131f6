import numpy as np
import pytest

from dfmhd.bases import ModeIndex, eval_hdiv2d, make_space
from dfmhd.kernels import (
    Transform,
    assemble_curlcurl_operator,
    assemble_form,
    assemble_velocity_operator,
    evaluate_field,
    magnetic_space,
    velocity_space,
)
from dfmhd.orthopoly import ParameterError
from dfmhd.problems import manufactured_2d
from dfmhd.solvers import (
    CGConfig,
    ConvergenceError,
    SpectralCoefficients,
    cg_solve,
    mass_operator,
    project_div0,
    solve_magnetic,
    solve_velocity,
)

OPERATORS = {
    "velocity2d": lambda: assemble_velocity_operator(10.0, 10, 2),
    "velocity3d": lambda: assemble_velocity_operator(10.0, 6, 3),
    "curlcurl2d": lambda: assemble_curlcurl_operator(10.0, 10, 2),
    "curlcurl3d": lambda: assemble_curlcurl_operator(10.0, 6, 3),
    "mass_h1": lambda: mass_operator("velocity", 10, 2),
    "mass_hdiv": lambda: mass_operator("magnetic", 6, 3),
}


@pytest.mark.parametrize("name", sorted(OPERATORS))
def test_forward_apply_recovery(name):
    A = OPERATORS[name]()
    x_true = np.random.default_rng(0).standard_normal(A.shape[0])
    x, rep = cg_solve(A, A @ x_true)
    assert rep.converged
    assert np.max(np.abs(x - x_true)) <= 1e-10


def test_zero_rhs_gives_zero_without_iterations():
    A = OPERATORS["velocity2d"]()
    x, rep = cg_solve(A, np.zeros(A.shape[0]))
    assert np.array_equal(x, np.zeros(A.shape[0])) and rep.iterations == 0 and rep.converged


def test_identity_like_operator_terminates_quickly():
    n = 30
    A = np.diag(np.linspace(1.0, 2.0, n))
    b = np.random.default_rng(1).standard_normal(n)
    x, rep = cg_solve(A, b, CGConfig(preconditioner="none"))
    assert rep.converged and rep.iterations <= 2 * n
    assert np.allclose(A @ x, b, atol=1e-12)


def test_residual_trace_is_recorded_and_decays():
    # CG minimizes the energy norm of the error; the 2-norm of the residual
    # may rise on single iterations, so only the envelope is checked
    A = OPERATORS["velocity3d"]()
    b = A @ np.random.default_rng(2).standard_normal(A.shape[0])
    _, rep = cg_solve(A, b, CGConfig(record_trace=True))
    t = np.array(rep.trace)
    assert len(t) == rep.iterations and np.all(np.isfinite(t))
    assert t[-1] <= 10 * max(1e-12 * np.linalg.norm(b), 1e-14)
    block = 10
    env = [t[i:i + block].max() for i in range(0, len(t) - block, block)]
    assert all(b2 <= b1 for b1, b2 in zip(env, env[1:]))


def test_error_paths():
    A = OPERATORS["velocity2d"]()
    with pytest.raises(ValueError):
        cg_solve(A, np.full(A.shape[0], np.nan))
    with pytest.raises(ValueError):
        cg_solve(A, np.ones(A.shape[0] + 1))
    with pytest.raises(ParameterError):
        CGConfig(rtol=0.0)
    with pytest.raises(ParameterError):
        CGConfig(maxiter=0)
    with pytest.raises(ParameterError):
        CGConfig(preconditioner="ilu")
    x, rep = cg_solve(A, np.ones(A.shape[0]), CGConfig(maxiter=1))
    assert not rep.converged
    with pytest.raises(ConvergenceError) as info:
        solve_velocity(10.0, np.ones(A.shape[0]), 10, 2, CGConfig(maxiter=1))
    assert info.value.report is not None and not info.value.report.converged


def test_galerkin_orthogonality_and_energy_bound():
    N, kappa = 12, 5.0
    A = assemble_velocity_operator(kappa, N, 2)
    rng = np.random.default_rng(3)
    rhs = rng.standard_normal(A.shape[0])
    u, rep = solve_velocity(kappa, rhs, N, 2)
    r = rhs - A @ u.vector
    tol = 10 * 1e-12 * np.linalg.norm(rhs)
    for _ in range(10):
        v = rng.standard_normal(A.shape[0])
        v /= np.linalg.norm(v)
        assert abs(r @ v) <= tol
    assert u.vector @ (A @ u.vector) <= rhs @ u.vector + tol * np.linalg.norm(u.vector)


def test_solve_velocity_examples():
    N, kappa = 10, 3.0
    u, rep = solve_velocity(kappa, np.zeros(velocity_space(N, 2).dimension), N, 2)
    assert np.array_equal(u.vector, 0 * u.vector)
    A = assemble_velocity_operator(kappa, N, 2)
    e = np.zeros(A.shape[0])
    e[0] = 1.0
    u, _ = solve_velocity(kappa, A @ e, N, 2)
    assert np.max(np.abs(u.vector - e)) <= 1e-10
    assert isinstance(u, SpectralCoefficients) and len(u.families) == 1
    with pytest.raises(ParameterError):
        solve_velocity(-1.0, A @ e, N, 2)


def test_solve_magnetic_examples():
    N, kappa = 8, 2.0
    dim = magnetic_space(N, 3).dimension
    B, _ = solve_magnetic(kappa, np.zeros(dim), N, 3)
    assert np.array_equal(B.vector, np.zeros(dim))
    A = assemble_curlcurl_operator(kappa, N, 3)
    x_true = np.random.default_rng(4).standard_normal(dim)
    B, _ = solve_magnetic(kappa, A @ x_true, N, 3)
    assert np.max(np.abs(B.vector - x_true)) <= 1e-10
    assert len(B.families) == 5
    rhs = np.random.default_rng(5).standard_normal(magnetic_space(10, 2).dimension)
    B2, _ = solve_magnetic(kappa, rhs, 10, 2)
    T = Transform(magnetic_space(10, 2))
    v = evaluate_field(B2.vector, T)
    assert np.max(np.abs(evaluate_field(B2.vector, T, "div"))) <= 1e-12 * np.abs(v).max()
    with pytest.raises(ParameterError):
        solve_magnetic(0.0, rhs, 10, 2)


def test_oseen_problem_converges_exponentially():
    # u = curl of a smooth bubble stream function solves
    # -lap u + u = f with f computed analytically
    import sympy as sp

    x, y = sp.symbols("x y")
    s = (1 - x ** 2) ** 2 * (1 - y ** 2) ** 2 * sp.exp(x / 2) * sp.sin(y + 0.3)
    u = [sp.diff(s, y), -sp.diff(s, x)]
    f = [-sp.diff(c, x, 2) - sp.diff(c, y, 2) + c for c in u]
    uf = sp.lambdify((x, y), u, "numpy")
    gf = sp.lambdify((x, y), [[sp.diff(c, v) for v in (x, y)] for c in u], "numpy")
    ff = sp.lambdify((x, y), f, "numpy")
    errors = []
    for N in (6, 8, 10, 12, 14, 16):
        T = Transform(velocity_space(N, 2))
        X = T.points()
        sol, _ = solve_velocity(1.0, T.test(np.array(ff(*X))), N, 2)
        fs = T.evaluate(sol.vector, grad=True)
        e = fs.value - np.array(uf(*X))
        ge = fs.grad - np.array(gf(*X))
        errors.append(np.sqrt(T.inner(e, e) + T.inner(ge, ge)))
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert errors[-1] < 1e-3 * errors[0]


def test_project_div0_recovers_basis_function():
    N = 8
    space = make_space("Hdiv2D", N)
    idx = space.linearize_index(ModeIndex("interior", (2, 3)))

    def sampler(X):
        out = np.zeros((2,) + X[0].shape)
        for i in np.ndindex(X[0].shape):
            out[(slice(None),) + i] = eval_hdiv2d(2, 3, (X[0][i], X[1][i]))
        return out

    c, _ = project_div0(sampler, space)
    e = np.zeros(space.dimension)
    e[idx] = 1.0
    assert np.max(np.abs(c.vector - e)) <= 1e-10


@pytest.mark.parametrize("kind,N", [("H1_2D", 12), ("H1_3D", 9), ("Hdiv2D", 20), ("Hdiv3D", 10)])
def test_project_div0_recovers_in_span_field(kind, N):
    space = make_space(kind, N)
    T = Transform(space)
    c_true = np.random.default_rng(6).standard_normal(space.dimension)
    samples = T.evaluate(c_true).value
    c, _ = project_div0(lambda X: samples, space, transform=T)
    assert np.max(np.abs(c.vector - c_true)) <= 1e-10
    assert np.max(np.abs(T.evaluate(c.vector).value - samples)) <= 1e-10 * np.abs(samples).max()


def test_projection_of_manufactured_field():
    prob = manufactured_2d()
    errs = []
    for N in (8, 12, 16, 20):
        space = velocity_space(N, 2)
        T = Transform(space)
        c, _ = project_div0(lambda X: prob.u(0.0, X), space, transform=T)
        v = T.evaluate(c.vector, grad=True)
        assert np.max(np.abs(np.einsum("ii...->...", v.grad))) <= 1e-12 * max(1.0, np.abs(v.grad).max())
        e = v.value - prob.u(0.0, T.points())
        errs.append(np.sqrt(T.inner(e, e)))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_cached_mass_operator_matches_generic_form():
    M = mass_operator("magnetic", 6, 2)
    D = assemble_form(magnetic_space(6, 2), "mass")
    assert np.allclose(M.todense(), D.todense())
