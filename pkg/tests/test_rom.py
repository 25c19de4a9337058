import numpy as np
import pytest
from scipy.optimize import fsolve

from ddrom.closure.ansatz import QuadraticAnsatz
from ddrom.config import SolverConfig
from ddrom.errors import NewtonConvergenceError, SingularJacobianError
from ddrom.operators.assembly import BoundarySpec, ReducedOperatorSet, assemble
from ddrom.rom import newton as rom_newton
from ddrom.rom import solver as rom_solver
from ddrom.rom.archive import load_trajectory, save_trajectory
from ddrom.rom.newton import SolverContext, damped_newton, newton_solve, state_residual
from ddrom.rom.residual import RomState, polynomial_jacobian, residual, time_derivative
from ddrom.rom.solver import build_context, solve_steady, solve_unsteady


def make_opset(n_u, n_p, n_nut=1, **arrays):
    shapes = {
        "M": (n_u, n_u),
        "B": (n_u, n_u),
        "B_T": (n_u, n_u),
        "H": (n_u, n_p),
        "D": (n_p, n_p),
        "N": (n_p, n_u),
        "C": (n_u, n_u, n_u),
        "G": (n_p, n_u, n_u),
        "C_T1": (n_u, n_nut, n_u),
        "C_T2": (n_u, n_nut, n_u),
        "C_T3": (n_p, n_nut, n_u),
        "C_T4": (n_p, n_nut, n_u),
        "L": (n_p,),
    }
    values = {name: np.zeros(shape) for name, shape in shapes.items()}
    values.update(arrays)
    values.setdefault("E_k", (np.zeros((n_u, n_u)),))
    values.setdefault("D_k", (np.zeros(n_u),))
    return ReducedOperatorSet(
        **values,
        lid_trace=np.zeros((2, n_u)),
        lid_lengths=np.ones(1),
        lid_shape=np.ones(1),
        dims=(n_u, n_p, n_nut),
        mu=np.zeros(0),
    )


def random_system(rng, n_u=3, n_p=2, n_nut=2):
    R = rng.standard_normal((n_u, n_u))
    return make_opset(
        n_u,
        n_p,
        n_nut,
        M=np.eye(n_u),
        B=-np.eye(n_u) - 0.1 * R @ R.T,
        B_T=0.05 * rng.standard_normal((n_u, n_u)),
        H=0.3 * rng.standard_normal((n_u, n_p)),
        D=2.0 * np.eye(n_p),
        N=0.1 * rng.standard_normal((n_p, n_u)),
        C=0.2 * rng.standard_normal((n_u, n_u, n_u)),
        G=0.1 * rng.standard_normal((n_p, n_u, n_u)),
        C_T1=0.1 * rng.standard_normal((n_u, n_nut, n_u)),
        C_T2=0.1 * rng.standard_normal((n_u, n_nut, n_u)),
        C_T3=0.1 * rng.standard_normal((n_p, n_nut, n_u)),
        C_T4=0.1 * rng.standard_normal((n_p, n_nut, n_u)),
        L=np.zeros(n_p),
        E_k=(0.1 * np.eye(n_u),),
        D_k=(0.05 * np.ones(n_u),),
    )


def loop_residual(x, a_dot, g, tau, ops, nu, penalty):
    n_u, n_p, n_nut = ops.dims
    a, b = x[:n_u], x[n_u:]
    out = np.zeros(n_u + n_p)
    for i in range(n_u):
        s = 0.0
        for j in range(n_u):
            s += -ops.M[i, j] * a_dot[j] + nu * (ops.B[i, j] + ops.B_T[i, j]) * a[j]
            s -= penalty * ops.E_k[0][i, j] * a[j]
            for k in range(n_u):
                s -= ops.C[i, j, k] * a[j] * a[k]
        for q in range(n_nut):
            for k in range(n_u):
                s += (ops.C_T1[i, q, k] + ops.C_T2[i, q, k]) * g[q] * a[k]
        for q in range(n_p):
            s -= ops.H[i, q] * b[q]
        out[i] = s + penalty * ops.D_k[0][i] + tau[i]
    for i in range(n_p):
        s = -ops.L[i] + tau[n_u + i]
        for q in range(n_p):
            s += ops.D[i, q] * b[q]
        for j in range(n_u):
            s -= nu * ops.N[i, j] * a[j]
            for k in range(n_u):
                s += ops.G[i, j, k] * a[j] * a[k]
        for q in range(n_nut):
            for k in range(n_u):
                s -= (ops.C_T3[i, q, k] + ops.C_T4[i, q, k]) * g[q] * a[k]
        out[n_u + i] = s
    return out


def test_zero_operators_give_zero_residual():
    ops = make_opset(2, 2, 1)
    state = RomState(a=np.array([0.3, -1.0]), b=np.array([2.0, 0.5]))
    r = residual(state, np.ones(2), np.ones(1), np.zeros(2), np.zeros(2), ops, BoundarySpec(), 0.7)
    assert not np.any(r)


def test_residual_matches_loop_evaluation():
    rng = np.random.default_rng(0)
    ops = random_system(rng, n_u=2, n_p=2, n_nut=2)
    boundary = BoundarySpec(tau=3.0)
    x, a_dot = rng.standard_normal(4), rng.standard_normal(2)
    g, tau = rng.random(2), rng.standard_normal(4)
    state = RomState.from_vector(x, 2)
    r = residual(state, a_dot, g, tau[:2], tau[2:], ops, boundary, 0.4)
    np.testing.assert_allclose(r, loop_residual(x, a_dot, g, tau, ops, 0.4, 3.0), atol=1e-12)


def test_jacobian_at_frozen_eddy_viscosity_matches_central_differences():
    rng = np.random.default_rng(12)
    ops = random_system(rng)
    boundary = BoundarySpec(tau=2.0)
    x = rng.standard_normal(5)
    g = rng.random(2)
    history = [rng.standard_normal(3)]

    def fun(y):
        state = RomState.from_vector(y, 3)
        a_dot = time_derivative(state.a, history, "first-order", 0.1)
        return residual(state, a_dot, g, np.zeros(3), np.zeros(2), ops, boundary, 0.3)

    J = polynomial_jacobian(RomState.from_vector(x, 3), 1.0 / 0.1, ops, boundary, 0.3, g)
    h = 1e-6
    central = np.column_stack([(fun(x + h * e) - fun(x - h * e)) / (2 * h) for e in np.eye(5)])
    np.testing.assert_allclose(J, central, atol=1e-7)
    assert not np.allclose(J, polynomial_jacobian(RomState.from_vector(x, 3), 10.0, ops, boundary, 0.3))


def test_time_derivative_schemes():
    a = np.array([1.0, -2.0])
    assert not np.any(time_derivative(a, [a, a], "second-order", 0.1))
    slope = np.array([0.5, 3.0])
    line = [slope * t for t in (0.0, 0.1, 0.2)]
    for scheme in ("first-order", "second-order"):
        np.testing.assert_allclose(
            time_derivative(line[2], [line[1], line[0]], scheme, 0.1), slope, rtol=1e-13
        )

    rng = np.random.default_rng(1)
    a2, a1, a0 = rng.standard_normal((3, 4))
    np.testing.assert_allclose(
        time_derivative(a2, [a1, a0], "second-order", 0.3), (3 * a2 - 4 * a1 + a0) / 0.6, rtol=1e-14
    )
    # first step of a second-order run
    np.testing.assert_allclose(time_derivative(a2, [a1], "second-order", 0.3), (a2 - a1) / 0.3)
    with pytest.raises(ValueError):
        time_derivative(a2, [], "first-order", 0.3)


def linear_context(rng, tol=1e-9):
    ops = make_opset(
        3,
        2,
        1,
        M=np.eye(3),
        B=-2.0 * np.eye(3),
        H=0.2 * rng.standard_normal((3, 2)),
        D=np.eye(2),
        N=0.2 * rng.standard_normal((2, 3)),
        L=rng.standard_normal(2),
        D_k=(rng.standard_normal(3),),
    )
    return SolverContext(opset=ops, boundary=BoundarySpec(tau=1.0), nu=1.0, config=SolverConfig(tol=tol))


def test_newton_solves_linear_system_in_one_iteration():
    context = linear_context(np.random.default_rng(2))
    result = newton_solve(RomState.zeros(3, 2), context, np.zeros(1))
    assert result.converged
    assert result.iterations == 1
    assert np.linalg.norm(state_residual(result.state, context, np.zeros(1))) <= 1e-9

    again = newton_solve(result.state, context, np.zeros(1))
    assert again.iterations == 0
    np.testing.assert_array_equal(again.state.vector, result.state.vector)


def test_newton_converges_quadratically():
    config = SolverConfig(tol=1e-13)
    x, iterations, norms = damped_newton(
        np.array([1.0]), lambda x: x**2 - 2.0, lambda x: np.array([[2.0 * x[0]]]), config
    )
    assert x[0] == pytest.approx(np.sqrt(2.0), abs=1e-14)
    assert iterations == len(norms) - 1
    ratios = [norms[k + 1] / norms[k] ** 2 for k in range(len(norms) - 1) if norms[k] > 1e-7]
    assert len(ratios) >= 3
    assert max(ratios) < 1.0


def test_finite_differences_only_see_network_dependence(mocker):
    rng = np.random.default_rng(13)
    g = np.array([0.2, 0.1])
    context = SolverContext(
        opset=random_system(rng), boundary=BoundarySpec(tau=1.0), nu=0.5, turbulence=lambda a, mu: g
    )
    spy = mocker.spy(rom_newton, "_network_columns")
    result = newton_solve(RomState.zeros(3, 2), context, np.zeros(1))
    assert spy.call_count >= 1
    assert not np.any(spy.spy_return)
    assert result.residual_norm <= context.config.tol


def test_singular_jacobian_is_reported():
    with pytest.raises(SingularJacobianError) as error:
        damped_newton(np.array([0.0]), lambda x: x**2 + 1.0, lambda x: np.array([[2.0 * x[0]]]), SolverConfig())
    assert error.value.residual == 1.0
    np.testing.assert_array_equal(error.value.iterate, [0.0])


def test_non_convergence_carries_best_iterate():
    config = SolverConfig(tol=1e-14, max_iter=2)
    with pytest.raises(NewtonConvergenceError) as error:
        damped_newton(np.array([1.0]), lambda x: x**2 - 2.0, lambda x: np.array([[2.0 * x[0]]]), config)
    assert error.value.iterations == 2
    assert error.value.iterate[0] == pytest.approx(np.sqrt(2.0), abs=1e-2)
    assert error.value.residual > 1e-14


def bernoulli_context(scheme, dt):
    # -a' - a - a^2 = 0, i.e. a(t) = a0 e^-t / (1 + a0 - a0 e^-t)
    ops = make_opset(1, 1, 1, M=np.eye(1), B=-np.eye(1), C=np.ones((1, 1, 1)), D=np.eye(1))
    config = SolverConfig(tol=1e-13, scheme=scheme, dt=dt, horizon=1.0)
    return SolverContext(opset=ops, boundary=BoundarySpec(), nu=1.0, config=config)


@pytest.mark.parametrize("scheme,order", [("second-order", 1.9), ("first-order", 0.9)])
def test_observed_time_scheme_order(scheme, order):
    a0 = 0.5
    exact = a0 * np.exp(-1.0) / (1.0 + a0 - a0 * np.exp(-1.0))
    errors = []
    for dt in (0.01, 0.005):
        traj = solve_unsteady([], bernoulli_context(scheme, dt), RomState(a=[a0], b=[0.0]), quiet=True)
        assert traj.times[-1] == pytest.approx(1.0)
        errors.append(abs(traj.a[-1, 0] - exact))
    assert np.log2(errors[0] / errors[1]) >= order


def test_baseline_matches_independent_integrator():
    rng = np.random.default_rng(3)
    ops = random_system(rng)
    boundary = BoundarySpec(tau=1.0)
    nu, dt = 0.5, 0.01
    config = SolverConfig(tol=1e-12, dt=dt, horizon=1.0, scheme="second-order")
    context = SolverContext(opset=ops, boundary=boundary, nu=nu, config=config)
    a0 = np.array([0.3, -0.2, 0.1])
    traj = solve_unsteady([0.5], context, RomState(a=a0, b=np.zeros(2)), quiet=True)
    assert traj.n_steps == 100
    assert traj.all_converged

    xs = [np.concatenate([a0, np.zeros(2)])]
    zeros_g, zeros_tau = np.zeros(2), np.zeros(5)
    for n in range(100):
        prev = [x[:3] for x in xs[-1:-3:-1]]

        def step(x):
            if len(prev) == 1:
                a_dot = (x[:3] - prev[0]) / dt
            else:
                a_dot = (3 * x[:3] - 4 * prev[0] + prev[1]) / (2 * dt)
            return loop_residual(x, a_dot, zeros_g, zeros_tau, ops, nu, 1.0)

        xs.append(fsolve(step, xs[-1], xtol=1e-14))
        np.testing.assert_allclose(np.concatenate([traj.a[n + 1], traj.b[n + 1]]), xs[-1], atol=1e-10)


def test_converged_steps_satisfy_tolerance():
    rng = np.random.default_rng(4)
    ops = random_system(rng)
    config = SolverConfig(dt=0.02, horizon=0.4)
    gmap = np.array([[0.1, 0.0, 0.2], [0.0, 0.3, 0.1]])
    context = SolverContext(
        opset=ops,
        boundary=BoundarySpec(tau=1.0),
        nu=0.5,
        config=config,
        turbulence=lambda a, mu: 0.05 + (gmap @ a) ** 2,
        closure=lambda a, g, mu: 0.01 * np.tanh(np.concatenate([a, g])[:5]) * mu[0],
    )
    traj = solve_unsteady([0.7], context, RomState(a=[0.2, 0.1, -0.1], b=[0.0, 0.0]), quiet=True)
    for n in range(traj.n_steps):
        if not traj.converged[n]:
            continue
        history = [traj.a[n]] + ([traj.a[n - 1]] if n > 0 else [])
        mu_n = np.array([traj.times[n], 0.7])
        r = state_residual(traj.state(n + 1), context, mu_n, history, config.dt)
        assert np.linalg.norm(r) <= config.tol


def test_networks_see_the_time_of_the_previous_node():
    rng = np.random.default_rng(5)
    ops = random_system(rng)
    stamps = set()

    def turbulence(a, mu):
        stamps.add(round(float(mu[0]), 12))
        assert mu[1] == 0.25
        return np.zeros(2)

    config = SolverConfig(dt=0.1, horizon=0.5)
    context = SolverContext(opset=ops, boundary=BoundarySpec(), nu=0.5, config=config, turbulence=turbulence)
    solve_unsteady([0.25], context, RomState.zeros(3, 2), quiet=True)
    assert stamps == {0.0, 0.1, 0.2, 0.3, 0.4}


def test_zero_network_outputs_reproduce_baseline_exactly():
    rng = np.random.default_rng(6)
    ops = random_system(rng)
    config = SolverConfig(dt=0.05, horizon=0.5)
    initial = RomState(a=[0.3, 0.1, -0.2], b=[0.0, 0.0])
    base = SolverContext(opset=ops, boundary=BoundarySpec(), nu=0.5, config=config)
    zeroed = SolverContext(
        opset=ops,
        boundary=BoundarySpec(),
        nu=0.5,
        config=config,
        turbulence=lambda a, mu: np.zeros(2),
        closure=lambda a, g, mu: np.zeros(5),
    )
    first = solve_unsteady([], base, initial, quiet=True)
    second = solve_unsteady([], zeroed, initial, quiet=True)
    np.testing.assert_array_equal(first.a, second.a)
    np.testing.assert_array_equal(first.b, second.b)

    frozen = SolverContext(
        opset=make_opset(3, 2, 2, M=np.eye(3), D=np.eye(2)), boundary=BoundarySpec(), nu=0.5, config=config
    )
    still = solve_unsteady([], frozen, initial, quiet=True)
    np.testing.assert_allclose(still.a, np.tile(initial.a, (still.times.size, 1)), atol=1e-15)


def test_failed_step_is_flagged_and_run_continues(mocker):
    rng = np.random.default_rng(7)
    context = SolverContext(
        opset=random_system(rng), boundary=BoundarySpec(), nu=0.5, config=SolverConfig(dt=0.1, horizon=0.3)
    )
    real = rom_solver.newton_solve
    calls = []

    def flaky(initial, context, mu, history, dt):
        calls.append(mu[0])
        if len(calls) == 2:
            raise NewtonConvergenceError("stalled", 0.5, np.full(5, 0.125), 50)
        return real(initial, context, mu, history, dt)

    mocker.patch("ddrom.rom.solver.newton_solve", side_effect=flaky)
    traj = solve_unsteady([], context, RomState.zeros(3, 2), quiet=True)
    assert traj.converged == (True, False, True)
    np.testing.assert_array_equal(traj.a[2], np.full(3, 0.125))
    assert traj.residuals[1] == 0.5
    assert traj.iterations[1] == 50
    assert len(calls) == 3


def test_penalty_reduces_lid_mismatch(channel_snapshots, channel_bases):
    grid = channel_snapshots.grid
    frame = channel_snapshots.frames[-1]
    mismatches = []
    for tau in (1.0, 10.0, 1e3):
        boundary = BoundarySpec(tau=tau)
        ops = assemble(channel_bases["u"], channel_bases["p"], channel_bases["nut"], grid, boundary, (4, 4, 4))
        initial = RomState(a=channel_bases["u"].project(frame.u, 4), b=channel_bases["p"].project(frame.p, 4))
        context = SolverContext(opset=ops, boundary=boundary, nu=0.1)
        result = solve_steady([], context, initial)
        mismatches.append(ops.trace_mismatch(result.a, boundary))
    assert mismatches[1] <= mismatches[0] + 1e-12
    assert mismatches[2] <= mismatches[1] + 1e-12


def test_build_context_wiring():
    rng = np.random.default_rng(8)
    ops = random_system(rng)
    with pytest.raises(ValueError):
        build_context(ops, BoundarySpec(), 0.5, SolverConfig(closure="dd"))
    with pytest.raises(ValueError):
        build_context(ops, BoundarySpec(), 0.5, SolverConfig(closure="quadratic"))

    plain = build_context(ops, BoundarySpec(), 0.5, SolverConfig())
    assert plain.closure is None and plain.turbulence is None

    ansatz = QuadraticAnsatz(A_tilde=np.eye(5), B_tilde=np.zeros((5, 5, 5)), n_u=3, n_p=2)
    context = build_context(ops, BoundarySpec(), 0.5, SolverConfig(closure="quadratic"), ansatz=ansatz)
    a = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(context.correction(a, np.zeros(2), np.zeros(1)), [1.0, 2.0, 3.0, 0.0, 0.0])


def test_steady_solve_is_deterministic():
    context = linear_context(np.random.default_rng(9))
    first = solve_steady([0.1], context, RomState.zeros(3, 2))
    second = solve_steady([0.1], context, RomState.zeros(3, 2))
    np.testing.assert_array_equal(first.vector, second.vector)
    assert isinstance(first, RomState)
    assert first.iterations == second.iterations
    assert first.residual_norm <= context.config.tol


def test_trajectory_archive_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    context = SolverContext(
        opset=random_system(rng), boundary=BoundarySpec(), nu=0.5, config=SolverConfig(dt=0.1, horizon=0.3)
    )
    traj = solve_unsteady([0.02], context, RomState(a=[0.1, 0.2, 0.3], b=[0.0, 0.0]), quiet=True)
    save_trajectory(traj, tmp_path / "traj", {"mode": "none"})
    loaded = load_trajectory(tmp_path / "traj")
    np.testing.assert_array_equal(loaded.a, traj.a)
    np.testing.assert_array_equal(loaded.b, traj.b)
    np.testing.assert_array_equal(loaded.times, traj.times)
    assert loaded.converged == traj.converged
    assert loaded.iterations == traj.iterations
