import numpy as np
import pytest

from conftest import random_pd_gram
from sparsedrift.estimate import (
    GramSystem,
    LassoConfig,
    brute_force_lasso,
    build_gram,
    cross_validate,
    default_lambda_grid,
    empirical_covariance,
    gram_blocks,
    lasso_ou,
    lasso_path,
    lasso_solve,
    mle_solve,
    ou_row_systems,
    soft_threshold,
)
from sparsedrift.model import DriftBasis, cosine_basis, generate_sparse_param, ou_linear_basis
from sparsedrift import rng
from sparsedrift.simulate import Trajectory, simulate_linear, simulate_ou_exact


def _constant_field_basis(u: np.ndarray) -> DriftBasis:
    zero = lambda x: np.zeros_like(x)
    const = lambda x, u=u: u.copy()
    return DriftBasis(d=u.size, p=1, family="custom", fields=(zero, const), lipschitz=(0.0, 0.0))


# ---------------------------------------------------------------------------
# Gram assembly
# ---------------------------------------------------------------------------


def test_build_gram_constant_field_closed_form():
    u = np.array([1.0, -2.0, 0.5])
    basis = _constant_field_basis(u)
    gen = np.random.default_rng(0)
    states = gen.normal(size=(11, 3))
    traj = Trajectory(states=states, delta_n=0.1)
    gs = build_gram(traj, basis)
    assert gs.gram[0, 0] == pytest.approx(np.dot(u, u), rel=1e-12)
    dx = np.diff(states, axis=0)
    assert gs.linear[0] == pytest.approx(2.0 / traj.n * np.sum(dx @ u), rel=1e-12)


def test_build_gram_zero_states_cosine():
    basis = cosine_basis(4, 3, 1.0)
    traj = Trajectory(states=np.zeros((9, 4)), delta_n=0.05)
    gs = build_gram(traj, basis)
    assert np.allclose(gs.gram, 4.0)  # cos(0)^2 summed over d coordinates
    assert np.allclose(gs.linear, 0.0)  # phi0(0) = 0 and zero increments


def test_gram_quadratic_identity_many_thetas():
    gen = rng.stream(1, rng.PARAM)
    theta0 = generate_sparse_param(8, 0.5, gen)
    basis = cosine_basis(3, 8, 0.4)
    traj, _ = simulate_linear(basis, theta0, 0.0, 120, 0.02, substeps=4, seed=1)
    gs = build_gram(traj, basis)
    drift_of = basis.drift_fn
    dx = traj.increments()
    check = np.random.default_rng(2)
    for _ in range(100):
        th = check.normal(size=8) * check.uniform(0.1, 4.0)
        direct = float(np.sum(np.square(dx + traj.delta_n * drift_of(th)(traj.states[:-1]))) / traj.T)
        assert gs.contrast_value(th) == pytest.approx(direct, rel=1e-10)


def test_gram_quadratic_identity_protocol_scale():
    # d=10, p=30, T=7 instance: quadratic form vs direct summation
    gen = rng.stream(5, rng.PARAM)
    theta0 = generate_sparse_param(30, 0.7, gen)
    basis = cosine_basis(10, 30, 0.3)
    traj, _ = simulate_linear(basis, theta0, 0.0, 700, 0.01, substeps=5, seed=5, burn_in=70)
    gs = build_gram(traj, basis)
    dx = traj.increments()
    check = np.random.default_rng(6)
    for _ in range(10):
        th = check.normal(size=30)
        direct = float(
            np.sum(np.square(dx + traj.delta_n * basis.drift_fn(th)(traj.states[:-1]))) / traj.T
        )
        assert gs.contrast_value(th) == pytest.approx(direct, rel=1e-10)
    # the true parameter's contrast in particular
    direct0 = float(
        np.sum(np.square(dx + traj.delta_n * basis.drift_fn(theta0.values)(traj.states[:-1]))) / traj.T
    )
    assert gs.contrast_value(theta0.values) == pytest.approx(direct0, rel=1e-10)


def test_gram_psd_and_symmetric():
    gen = rng.stream(7, rng.PARAM)
    theta0 = generate_sparse_param(6, 0.5, gen)
    basis = cosine_basis(2, 6, 0.4)
    traj, _ = simulate_linear(basis, theta0, 0.0, 60, 0.05, substeps=2, seed=3)
    gs = build_gram(traj, basis)
    assert np.max(np.abs(gs.gram - gs.gram.T)) < 1e-12
    assert np.min(np.linalg.eigvalsh(gs.gram)) >= -1e-10


def test_gram_blocks_merge_equals_full():
    basis = cosine_basis(2, 4, 0.5)
    traj, _ = simulate_linear(basis, np.array([2.0, 0.0, 0.0, 2.5]), 0.0, 50, 0.05, seed=9)
    full = build_gram(traj, basis)
    blocks = gram_blocks(traj, basis, 5)
    merged = blocks.system()
    assert np.max(np.abs(full.gram - merged.gram)) < 1e-12
    assert np.max(np.abs(full.linear - merged.linear)) < 1e-12
    assert full.constant == pytest.approx(merged.constant, rel=1e-12)


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def test_soft_threshold():
    assert soft_threshold(5.0, 2.0) == 3.0
    assert soft_threshold(-1.0, 2.0) == 0.0
    assert soft_threshold(3.3, 0.0) == 3.3
    assert np.allclose(soft_threshold(np.array([4.0, -4.0]), 1.0), [3.0, -3.0])
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.5)


def test_lasso_null_solution_threshold():
    gen = np.random.default_rng(21)
    for _ in range(10):
        gs = random_pd_gram(gen, 5)
        lam = float(np.max(np.abs(gs.linear)))
        res = lasso_solve(gs, lam)
        assert np.all(res.theta_hat == 0.0)
        assert res.converged


def test_lasso_zero_lambda_matches_mle():
    gen = np.random.default_rng(22)
    for _ in range(10):
        gs = random_pd_gram(gen, 6)
        res = lasso_solve(gs, 0.0, LassoConfig(tol=1e-12))
        mle = mle_solve(gs)
        assert np.max(np.abs(res.theta_hat - mle.theta_hat)) < 1e-8


def test_lasso_matches_brute_force_p2():
    gen = np.random.default_rng(23)
    for _ in range(20):
        gs = random_pd_gram(gen, 2)
        lam = float(gen.uniform(0.05, 1.0))
        bf = brute_force_lasso(gs, lam)
        cd = lasso_solve(gs, lam, LassoConfig(tol=1e-12))
        assert np.max(np.abs(bf - cd.theta_hat)) < 1e-6


def test_lasso_kkt_certificate_and_objective_descent():
    gen = np.random.default_rng(24)
    cfg = LassoConfig()
    for _ in range(20):
        gs = random_pd_gram(gen, 7)
        lam = float(gen.uniform(0.0, 1.0))
        res = lasso_solve(gs, lam, cfg)
        assert res.converged
        assert res.kkt_residual <= 10 * cfg.tol * max(1.0, np.max(np.abs(gs.linear)))
        trace = np.asarray(res.objective_trace)
        slack = 1e-12 * np.maximum(1.0, np.abs(trace[:-1]))
        assert np.all(np.diff(trace) <= slack)


def test_lasso_rejects_nan_and_negative_lambda():
    gs = random_pd_gram(np.random.default_rng(0), 3)
    with pytest.raises(ValueError):
        lasso_solve(gs, -0.1)
    with pytest.raises(ValueError):
        lasso_solve(gs, float("nan"))
    with pytest.raises(ValueError):
        GramSystem(gram=np.full((2, 2), np.nan), linear=np.zeros(2), constant=0.0, delta_n=0.1)


def test_lasso_pinned_zero_columns():
    g = np.diag([1.0, 0.0, 2.0])
    gs = GramSystem(gram=g, linear=np.array([-1.0, 0.3, -2.0]), constant=0.0, delta_n=0.5)
    res = lasso_solve(gs, 0.1)
    assert res.pinned == (1,)
    assert res.theta_hat[1] == 0.0
    assert res.converged


def test_lasso_nonconvergence_flagged_not_raised():
    gen = np.random.default_rng(25)
    gs = random_pd_gram(gen, 8)
    res = lasso_solve(gs, 0.01, LassoConfig(tol=1e-15, max_sweeps=2))
    assert res.sweeps_used == 2
    assert not res.converged


def test_warm_start_agrees_with_cold():
    gen = np.random.default_rng(26)
    gs = random_pd_gram(gen, 6)
    cfg = LassoConfig(tol=1e-11)
    cold = lasso_solve(gs, 0.3, cfg)
    warm = lasso_solve(gs, 0.3, cfg, warm_start=gen.normal(size=6))
    assert np.max(np.abs(cold.theta_hat - warm.theta_hat)) < 1e-8


def test_mle_identity_example():
    gs = GramSystem(gram=np.eye(3), linear=np.array([-2.0, 0.0, 0.0]), constant=0.0, delta_n=1.0)
    res = mle_solve(gs)
    assert np.allclose(res.theta_hat, [1.0, 0.0, 0.0], atol=1e-12)
    assert not res.rank_deficient


def test_mle_singular_consistent_system():
    g = np.array([[1.0, 1.0], [1.0, 1.0]])
    gs = GramSystem(gram=g, linear=np.array([-2.0, -2.0]), constant=0.0, delta_n=0.5)
    res = mle_solve(gs)
    resid = 2 * gs.delta_n * (g @ res.theta_hat) + gs.linear
    assert np.max(np.abs(resid)) < 1e-8
    assert res.rank_deficient
    # minimum-norm solution of theta_1 + theta_2 = 2
    assert np.allclose(res.theta_hat, [1.0, 1.0], atol=1e-10)


# ---------------------------------------------------------------------------
# Brute force oracle
# ---------------------------------------------------------------------------


def _grid_refine_oracle(gs: GramSystem, lam: float) -> np.ndarray:
    """Iteratively refined grid search down to step <= 1e-4 on [-5, 5]^p."""
    lo = np.full(gs.p, -5.0)
    hi = np.full(gs.p, 5.0)
    pts = 21
    for _ in range(7):
        axes = [np.linspace(lo[j], hi[j], pts) for j in range(gs.p)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij")).reshape(gs.p, -1).T
        vals = (
            gs.constant
            + mesh @ gs.linear
            + gs.delta_n * np.einsum("ij,jk,ik->i", mesh, gs.gram, mesh)
            + lam * np.sum(np.abs(mesh), axis=1)
        )
        best = mesh[np.argmin(vals)]
        step = (hi - lo) / (pts - 1)
        lo = np.maximum(best - step, -5.0)
        hi = np.minimum(best + step, 5.0)
    assert np.max((hi - lo) / (pts - 1)) <= 1e-4
    return best


def test_brute_force_scalar_closed_form():
    gs = GramSystem(gram=np.array([[1.0]]), linear=np.array([-4.0]), constant=0.0, delta_n=1.0)
    assert brute_force_lasso(gs, 2.0)[0] == pytest.approx(1.0, abs=1e-12)
    # lambda = 0 reduces to least squares
    assert brute_force_lasso(gs, 0.0)[0] == pytest.approx(2.0, abs=1e-12)


def test_brute_force_rejects_large_p():
    gs = random_pd_gram(np.random.default_rng(1), 4)
    with pytest.raises(ValueError):
        brute_force_lasso(gs, 0.1)


def test_brute_force_matches_refined_grid_search():
    gen = np.random.default_rng(27)
    checked = 0
    while checked < 200:
        p = int(gen.integers(2, 4))
        gs = random_pd_gram(gen, p)
        lam = float(gen.uniform(0.05, 1.0))
        if np.max(np.abs(np.linalg.solve(2 * gs.delta_n * gs.gram, -gs.linear))) > 4.0:
            continue  # keep the optimum inside the search box
        bf = brute_force_lasso(gs, lam)
        oracle = _grid_refine_oracle(gs, lam)
        assert np.max(np.abs(bf - oracle)) < 2e-4
        checked += 1


# ---------------------------------------------------------------------------
# Path
# ---------------------------------------------------------------------------


def test_path_starts_at_zero_above_threshold():
    gs = random_pd_gram(np.random.default_rng(28), 5)
    lam_max = float(np.max(np.abs(gs.linear)))
    grid = np.geomspace(lam_max * 1.01, lam_max * 0.01, 10)
    path = lasso_path(gs, grid)
    assert np.all(path[0].theta_hat == 0.0)


def test_path_l1_monotone_and_matches_cold():
    gen = np.random.default_rng(29)
    for _ in range(5):
        gs = random_pd_gram(gen, 6)
        grid = default_lambda_grid(gs, num=12, ratio=0.01)
        path = lasso_path(gs, grid)
        norms = [np.sum(np.abs(r.theta_hat)) for r in path]
        assert np.all(np.diff(norms) >= -1e-9)
        for idx in (0, len(grid) - 1):
            cold = lasso_solve(gs, float(grid[idx]))
            assert np.max(np.abs(path[idx].theta_hat - cold.theta_hat)) < 1e-8


def test_path_requires_descending_grid():
    gs = random_pd_gram(np.random.default_rng(30), 3)
    with pytest.raises(ValueError):
        lasso_path(gs, [0.1, 0.2])


# ---------------------------------------------------------------------------
# Interaction-matrix estimation
# ---------------------------------------------------------------------------


def test_empirical_covariance_examples():
    x = np.array([2.0, -1.0])
    traj = Trajectory(states=np.vstack([x, np.zeros(2)]), delta_n=0.1)
    assert np.allclose(empirical_covariance(traj), np.outer(x, x))
    e1 = np.zeros((6, 3))
    e1[:, 0] = 1.0
    traj2 = Trajectory(states=e1, delta_n=0.1)
    expected = np.zeros((3, 3))
    expected[0, 0] = 1.0
    assert np.allclose(empirical_covariance(traj2), expected)


def test_empirical_covariance_long_run_near_stationary():
    a_mat = np.diag([1.0, 2.0])
    traj = simulate_ou_exact(a_mat, 50_000, 0.05, seed=31)
    c_emp = empirical_covariance(traj)
    c_inf = np.diag([0.5, 0.25])
    x = traj.states[:-1]
    prods = np.einsum("ti,tj->tij", x, x)
    batch = prods[: 100 * (x.shape[0] // 100)].reshape(100, -1, 2, 2).mean(axis=1)
    se = batch.std(axis=0, ddof=1) / np.sqrt(batch.shape[0])
    assert np.all(np.abs(c_emp - c_inf) <= 3 * se + 1e-12)


def test_lasso_ou_zero_at_large_lambda():
    traj = simulate_ou_exact(np.diag([1.0, 2.0]), 200, 0.05, seed=32)
    lam = max(float(np.max(np.abs(s.linear))) for s in ou_row_systems(traj))
    res = lasso_ou(traj, lam)
    assert np.all(res.A_hat == 0.0)


def test_lasso_ou_scalar_regression_oracle():
    traj = simulate_ou_exact(np.array([[0.5]]), 10_000, 0.05, seed=33)
    res = lasso_ou(traj, 0.0, LassoConfig(tol=1e-12))
    # unpenalized row problem reduces to scalar least squares
    x = traj.states[:-1, 0]
    dx = np.diff(traj.states[:, 0])
    direct = -np.sum(x * dx) / (traj.delta_n * np.sum(x * x))
    assert res.A_hat[0, 0] == pytest.approx(direct, abs=1e-9)
    # asymptotic sd of the drift estimator is sqrt(2 a / T)
    se = np.sqrt(2 * 0.5 / traj.T)
    assert abs(res.A_hat[0, 0] - 0.5) <= 3 * se


def test_lasso_ou_equals_stacked_basis_solution():
    gen = np.random.default_rng(34)
    for trial in range(3):
        d = int(gen.integers(2, 4))
        a_mat = np.diag(gen.uniform(0.5, 2.0, size=d)) + 0.2 * gen.normal(size=(d, d))
        a_mat += (0.3 - min(np.linalg.eigvals(a_mat).real.min(), 0.0)) * np.eye(d)
        traj = simulate_ou_exact(a_mat, 400, 0.05, seed=35 + trial)
        lam = 0.05
        cfg = LassoConfig(tol=1e-12)
        rowwise = lasso_ou(traj, lam, cfg)
        stacked = lasso_solve(build_gram(traj, ou_linear_basis(d)), lam, cfg)
        assert np.max(np.abs(rowwise.vec() - stacked.theta_hat)) < 1e-9


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


def test_cv_single_element_grid():
    basis = cosine_basis(2, 3, 0.5)
    traj, _ = simulate_linear(basis, np.array([2.0, 0.0, 0.0]), 0.0, 60, 0.05, seed=36)
    cv = cross_validate(traj, basis, [0.37], folds=3)
    assert cv.lambda_star == 0.37


def test_cv_short_block_warning_flag():
    basis = cosine_basis(2, 8, 0.5)
    traj, _ = simulate_linear(basis, np.zeros(8), 0.0, 20, 0.05, seed=37)
    cv = cross_validate(traj, basis, [0.5, 0.1], folds=4)
    assert cv.short_blocks


def test_cv_pure_noise_prefers_largest_lambda():
    zero = lambda x: np.zeros_like(x)
    noise_basis = DriftBasis(d=2, p=1, family="custom", fields=(zero, zero), lipschitz=(0.0, 0.0))
    fit_basis = cosine_basis(2, 6, 0.5)
    solver = LassoConfig(max_sweeps=500, tol=1e-7)
    wins = 0
    for rep in range(50):
        traj, _ = simulate_linear(noise_basis, np.array([0.0]), 0.0, 200, 0.5, substeps=1, seed=1000 + rep)
        gs = build_gram(traj, fit_basis)
        lam_max = float(np.max(np.abs(gs.linear)))
        grid = np.geomspace(1.5 * lam_max, 0.05 * lam_max, 6)
        cv = cross_validate(traj, fit_basis, grid, folds=5, config=solver)
        wins += cv.lambda_star == cv.lambdas[0]
    assert wins >= 40  # sparsest model wins on noise in >= 80% of runs


def test_cv_rejects_bad_inputs():
    basis = cosine_basis(2, 3, 0.5)
    traj, _ = simulate_linear(basis, np.zeros(3), 0.0, 30, 0.05, seed=38)
    with pytest.raises(ValueError):
        cross_validate(traj, basis, [0.1], folds=1)
    with pytest.raises(ValueError):
        cross_validate(traj, basis, [], folds=3)
    with pytest.raises(ValueError):
        cross_validate(traj, basis, [0.0, 0.1], folds=3)
