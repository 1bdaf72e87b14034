"""Tests for the estimation pipeline: coefficients, the iteration map, the
fixed-point solver, certification events, density plug-in and error metrics."""

import json

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

import fracdrift as fd
from fracdrift.basis import IntervalSupport, basis_constants, project_function, trig_basis
from fracdrift.estimator import (
    DensityModel,
    DensityProjectionEstimator,
    EstimatorConfig,
    FixedPointDriftEstimator,
    OracleDriftEstimator,
    analytic_jacobian_bound,
    delta_event_check,
    density_projection,
    export_curve_csv,
    fixed_point_solve,
    oracle_hat_b,
    pathwise_coefficients,
    phi_m_step,
    phi_m_step_with_drift,
    practical_estimate,
    weighted_l2_error,
    F_m_apply,
    F_m_jacobian,
)
from fracdrift.integrals import skorokhod_integral
from fracdrift.sde import fou_stationary_density

SUPPORT = IntervalSupport(-1.0, 1.0)


@pytest.fixture(scope="module")
def contraction_setup(linear_drift, known_density_factory):
    """Ensemble and objects in the certified-contraction regime."""
    grid = fd.TimeGrid(0.05, 64)
    ensemble = fd.simulate_ensemble(fd.SdeConfig(
        drift=linear_drift, sigma=1.0, H=0.7, grid=grid, n_paths=200, seed=60_001,
    ))
    basis = trig_basis(SUPPORT, 3)
    kernel = fd.KernelGrid(grid, 0.7)
    density = known_density_factory(SUPPORT)
    config = EstimatorConfig(c_bound=20.0, l_target=0.5)
    return ensemble, basis, kernel, density, config


class TestPathwiseCoefficients:
    def test_constant_element_formula(self, small_ensemble):
        basis = trig_basis(IntervalSupport(-6.0, 6.0), 1)  # support covers path range
        got = pathwise_coefficients(small_ensemble, basis).values[0]
        lam = 12.0
        increments = small_ensemble.values[:, -1] - small_ensemble.values[:, 0]
        expected = np.sqrt(1 / lam) * increments.sum() / (
            small_ensemble.n_paths * small_ensemble.grid.t_max
        )
        assert got == pytest.approx(expected, rel=1e-12)

    def test_path_permutation_invariance(self, small_ensemble):
        basis = trig_basis(SUPPORT, 3)
        flipped = fd.SdeEnsemble(
            grid=small_ensemble.grid, values=small_ensemble.values[::-1].copy(),
            H=small_ensemble.H, sigma=small_ensemble.sigma,
            drift_id=small_ensemble.drift_id, master_seed=small_ensemble.master_seed,
            path_seeds=small_ensemble.path_seeds[::-1].copy(),
        )
        a = pathwise_coefficients(small_ensemble, basis).values
        b = pathwise_coefficients(flipped, basis).values
        assert np.max(np.abs(a - b)) < 1e-12

    def test_oracle_coefficients_unbiased_for_weighted_projection(
            self, big_ensemble, big_kernel, linear_drift, known_density_factory):
        support = IntervalSupport(-2.0, 2.0)
        basis = trig_basis(support, 3)
        density = known_density_factory(support)
        target = project_function(
            lambda x: linear_drift.b0(x) * density.evaluate(x), basis
        ).values
        n_used = 1000
        T = big_ensemble.grid.t_max
        per_path = np.empty((n_used, basis.m))
        for i in range(n_used):
            p = big_ensemble.path(i)
            for j in range(1, basis.m + 1):
                per_path[i, j - 1] = skorokhod_integral(
                    p, basis.element(j), linear_drift.b0_prime,
                    big_ensemble.sigma, big_kernel,
                ) / T
        mean = per_path.mean(axis=0)
        se = per_path.std(axis=0, ddof=1) / np.sqrt(n_used)
        assert np.all(np.abs(mean - target) < 4 * se)


def brute_force_F(theta, ensemble, kernel):
    """Direct triple-loop rendition of the correction map."""
    basis = theta.basis
    n = kernel.grid.n_steps
    dt = kernel.grid.dt
    a = ensemble.sigma**2 * kernel.H * (2 * kernel.H - 1)
    out = np.zeros(basis.m)
    for i in range(ensemble.n_paths):
        x = ensemble.values[i]
        psi = theta.values @ basis.derivs(x)
        cum = cumulative_trapezoid(psi, dx=dt, initial=0.0)
        derivs = basis.derivs(x[:n])
        for j in range(basis.m):
            acc = 0.0
            for k in range(n):
                for l in range(k + 1):
                    acc += derivs[j, k] * np.exp(cum[k] - cum[l]) * kernel.weight_matrix[k, l]
            out[j] += acc
    return a / (ensemble.n_paths * ensemble.grid.t_max) * out


class TestCorrectionMap:
    @pytest.fixture(scope="class")
    def tiny(self, linear_drift):
        grid = fd.TimeGrid(1.0, 32)
        ensemble = fd.simulate_ensemble(fd.SdeConfig(
            drift=linear_drift, sigma=1.0, H=0.7, grid=grid, n_paths=2, seed=42,
        ))
        return ensemble, trig_basis(IntervalSupport(-1.5, 1.5), 3), fd.KernelGrid(grid, 0.7)

    def test_first_component_always_zero(self, tiny):
        ensemble, basis, kernel = tiny
        theta = fd.CoefficientVector(np.array([0.4, -0.2, 0.1]), basis)
        assert F_m_apply(theta, ensemble, kernel)[0] == 0.0

    def test_zero_coefficients_reduce_to_plain_kernel_integral(self, tiny):
        ensemble, basis, kernel = tiny
        theta = fd.CoefficientVector(np.zeros(3), basis)
        got = F_m_apply(theta, ensemble, kernel)
        a = ensemble.sigma**2 * kernel.H * (2 * kernel.H - 1)
        expected = np.zeros(3)
        for i in range(ensemble.n_paths):
            x = ensemble.values[i]
            for j in range(3):
                el = basis.element(j + 1)
                expected[j] += fd.kernel_double_integral(
                    lambda s, t, _el=el: _el.derivative(
                        np.interp(t, ensemble.grid.times(), x)
                    ),
                    kernel,
                )
        expected *= a / (ensemble.n_paths * ensemble.grid.t_max)
        assert np.max(np.abs(got - expected)) < 1e-10 * max(1.0, np.max(np.abs(expected)))

    def test_matches_brute_force(self, tiny):
        ensemble, basis, kernel = tiny
        theta = fd.CoefficientVector(np.array([0.3, -0.4, 0.25]), basis)
        fast = F_m_apply(theta, ensemble, kernel)
        slow = brute_force_F(theta, ensemble, kernel)
        assert np.max(np.abs(fast - slow)) <= 1e-10 * np.max(np.abs(slow))


class TestJacobian:
    @pytest.fixture(scope="class")
    def setup(self, linear_drift):
        grid = fd.TimeGrid(1.0, 48)
        ensemble = fd.simulate_ensemble(fd.SdeConfig(
            drift=linear_drift, sigma=1.0, H=0.7, grid=grid, n_paths=3, seed=7,
        ))
        return ensemble, trig_basis(IntervalSupport(-1.5, 1.5), 4), fd.KernelGrid(grid, 0.7)

    def test_constant_row_and_column_vanish(self, setup):
        ensemble, basis, kernel = setup
        theta = fd.CoefficientVector(np.array([0.1, 0.2, -0.1, 0.05]), basis)
        jac = F_m_jacobian(theta, ensemble, kernel)
        assert np.all(jac[0] == 0.0)
        assert np.all(jac[:, 0] == 0.0)

    def test_matches_central_differences(self, setup):
        ensemble, basis, kernel = setup
        rng = np.random.default_rng(11)
        x_grid = basis.support.grid(2048)
        for _ in range(5):
            raw = rng.normal(size=4)
            sup = np.max(np.abs(raw @ basis.derivs(x_grid)))
            theta = fd.CoefficientVector(raw * (2.0 * rng.uniform(0.2, 1.0) / sup), basis)
            jac = F_m_jacobian(theta, ensemble, kernel)
            h = 1e-5 * np.linalg.norm(theta.values) + 1e-7
            fd_jac = np.empty_like(jac)
            for l in range(4):
                up, dn = theta.values.copy(), theta.values.copy()
                up[l] += h
                dn[l] -= h
                fd_jac[:, l] = (
                    F_m_apply(fd.CoefficientVector(up, basis), ensemble, kernel)
                    - F_m_apply(fd.CoefficientVector(dn, basis), ensemble, kernel)
                ) / (2 * h)
            assert np.max(np.abs(jac - fd_jac)) <= 1e-4 * np.max(np.abs(jac))

    def test_operator_norm_below_analytic_bound(self, setup):
        ensemble, basis, kernel = setup
        rng = np.random.default_rng(13)
        x_grid = basis.support.grid(4096)
        r_m = basis_constants(basis)["R_m"]
        for _ in range(5):
            theta = fd.CoefficientVector(rng.normal(scale=0.2, size=4), basis)
            own_sup = np.max(np.abs(theta.values @ basis.derivs(x_grid)))
            bound = analytic_jacobian_bound(
                ensemble.sigma, kernel.H, ensemble.grid.t_max, r_m, own_sup
            )
            norm = np.linalg.norm(F_m_jacobian(theta, ensemble, kernel), 2)
            assert norm <= bound * (1 + 1e-9)


class TestPhiStep:
    def test_dimension_one_converges_in_one_step(self, contraction_setup):
        ensemble, _, kernel, density, config = contraction_setup
        basis1 = trig_basis(SUPPORT, 1)
        I_bar = pathwise_coefficients(ensemble, basis1)
        result = fixed_point_solve(config, I_bar, ensemble, kernel, density)
        assert result.converged
        assert result.iterations == 1
        assert result.residuals[0] == 0.0
        assert np.array_equal(result.theta_star.values, I_bar.values)

    def test_idempotent_at_fixed_point(self, contraction_setup):
        ensemble, basis, kernel, density, config = contraction_setup
        I_bar = pathwise_coefficients(ensemble, basis)
        result = fixed_point_solve(config, I_bar, ensemble, kernel, density)
        nxt = phi_m_step(result.theta_star, I_bar, ensemble, kernel)
        assert np.linalg.norm(nxt.values - result.theta_star.values) <= config.tol

    def test_oracle_relation_two_code_paths(self, linear_drift):
        grid = fd.TimeGrid(1.0, 64)
        ensemble = fd.simulate_ensemble(fd.SdeConfig(
            drift=linear_drift, sigma=1.0, H=0.7, grid=grid, n_paths=5, seed=17,
        ))
        basis = trig_basis(IntervalSupport(-1.5, 1.5), 5)
        kernel = fd.KernelGrid(grid, 0.7)
        I_bar = pathwise_coefficients(ensemble, basis)
        via_step = phi_m_step_with_drift(I_bar, ensemble, kernel, linear_drift)
        via_skorokhod = oracle_hat_b(ensemble, basis, kernel, linear_drift)
        scale = np.max(np.abs(via_skorokhod.values))
        assert np.max(np.abs(via_step.values - via_skorokhod.values)) <= 1e-10 * scale


class TestFixedPointSolve:
    def test_default_start_is_pathwise_coefficients(self, contraction_setup):
        ensemble, basis, kernel, density, config = contraction_setup
        I_bar = pathwise_coefficients(ensemble, basis)
        res = fixed_point_solve(config, I_bar, ensemble, kernel, density)
        assert res.converged
        assert res.iterations <= config.max_iter

    def test_residuals_nonincreasing_in_contraction_regime(self, contraction_setup):
        ensemble, basis, kernel, density, config = contraction_setup
        I_bar = pathwise_coefficients(ensemble, basis)
        res = fixed_point_solve(config, I_bar, ensemble, kernel, density)
        assert res.delta_l_holds
        diffs = np.diff(res.residuals)
        assert np.all(diffs <= 1e-15)

    def test_residual_ratios_below_jacobian_bound(self, contraction_setup):
        ensemble, basis, kernel, density, config = contraction_setup
        I_bar = pathwise_coefficients(ensemble, basis)
        res = fixed_point_solve(config, I_bar, ensemble, kernel, density)
        assert res.delta_l_holds
        assert res.contraction_estimate <= res.analytic_jacobian_bound

    def test_path_permutation_changes_solution_below_1e12(self, contraction_setup):
        ensemble, basis, kernel, density, config = contraction_setup
        flipped = fd.SdeEnsemble(
            grid=ensemble.grid, values=ensemble.values[::-1].copy(), H=ensemble.H,
            sigma=ensemble.sigma, drift_id=ensemble.drift_id,
            master_seed=ensemble.master_seed, path_seeds=ensemble.path_seeds[::-1].copy(),
        )
        a = fixed_point_solve(config, pathwise_coefficients(ensemble, basis),
                              ensemble, kernel, density)
        b = fixed_point_solve(config, pathwise_coefficients(flipped, basis),
                              flipped, kernel, density)
        assert np.linalg.norm(a.theta_star.values - b.theta_star.values) <= 1e-12

    def test_picard_a_posteriori_bound(self, contraction_setup, linear_drift):
        # One-step form with the certified analytic modulus; guaranteed on
        # the certified event and asserted on every converged run.
        ensemble, basis, kernel, density, config = contraction_setup
        I_bar = pathwise_coefficients(ensemble, basis)
        res = fixed_point_solve(config, I_bar, ensemble, kernel, density)
        assert res.converged and res.delta_l_holds
        theta_hat = oracle_hat_b(ensemble, basis, kernel, linear_drift)
        stepped = phi_m_step(theta_hat, I_bar, ensemble, kernel)
        ell = res.analytic_jacobian_bound
        lhs = np.linalg.norm(res.theta_star.values - stepped.values)
        rhs = ell / (1 - ell) * np.linalg.norm(stepped.values - theta_hat.values)
        assert lhs <= rhs + 1e-12

    def test_mean_value_lipschitz_on_random_pairs(self, contraction_setup):
        ensemble, basis, kernel, density, config = contraction_setup
        I_bar = pathwise_coefficients(ensemble, basis)
        rng = np.random.default_rng(3)
        for _ in range(4):
            t1 = fd.CoefficientVector(rng.normal(scale=0.3, size=3), basis)
            t2 = fd.CoefficientVector(rng.normal(scale=0.3, size=3), basis)
            lhs = np.linalg.norm(
                phi_m_step(t1, I_bar, ensemble, kernel).values
                - phi_m_step(t2, I_bar, ensemble, kernel).values
            )
            sup_norm = max(
                np.linalg.norm(F_m_jacobian(
                    fd.CoefficientVector(t1.values + s * (t2.values - t1.values), basis),
                    ensemble, kernel), 2)
                for s in np.linspace(0.0, 1.0, 11)
            )
            assert lhs <= sup_norm * np.linalg.norm(t1.values - t2.values) * (1 + 1e-6)

    def test_start_outside_derivative_ball_rejected(self, contraction_setup):
        ensemble, basis, kernel, density, config = contraction_setup
        I_bar = pathwise_coefficients(ensemble, basis)
        wild = fd.CoefficientVector(np.array([0.0, 50.0, 50.0]), basis)
        with pytest.raises(ValueError, match="c_bound"):
            fixed_point_solve(config, I_bar, ensemble, kernel, density, theta0=wild)

    def test_nonconvergence_flagged_distinct_from_truncation(self, contraction_setup):
        ensemble, basis, kernel, density, _ = contraction_setup
        tight = EstimatorConfig(c_bound=20.0, l_target=0.5, max_iter=1, tol=1e-16)
        I_bar = pathwise_coefficients(ensemble, basis)
        res = fixed_point_solve(tight, I_bar, ensemble, kernel, density)
        assert not res.converged
        assert not res.truncated  # events still hold in this regime


class TestDeltaEvents:
    def test_analytic_route_holds_for_small_horizon(self, contraction_setup):
        ensemble, basis, kernel, density, config = contraction_setup
        r_m = basis_constants(basis)["R_m"]
        bound = analytic_jacobian_bound(
            ensemble.sigma, kernel.H, ensemble.grid.t_max, r_m, config.c_bound
        )
        assert bound <= config.l_target * density.min_on(SUPPORT)
        theta = pathwise_coefficients(ensemble, basis)
        diag = delta_event_check([theta], config, ensemble, kernel, density)
        assert diag.delta_l_holds

    def test_dimension_one_contraction_always_holds(self, contraction_setup):
        ensemble, _, kernel, density, config = contraction_setup
        basis1 = trig_basis(SUPPORT, 1)
        theta = pathwise_coefficients(ensemble, basis1)
        diag = delta_event_check([theta], config, ensemble, kernel, density)
        assert diag.delta_l_holds
        assert diag.analytic_jacobian_bound == 0.0

    def test_growing_horizon_flips_contraction_event(self, linear_drift,
                                                     known_density_factory):
        density = known_density_factory(SUPPORT)
        config = EstimatorConfig(c_bound=2.0, l_target=0.5)
        flags = []
        for T in (0.05, 1.0):
            grid = fd.TimeGrid(T, 32)
            ensemble = fd.simulate_ensemble(fd.SdeConfig(
                drift=linear_drift, sigma=1.0, H=0.7, grid=grid, n_paths=10, seed=5,
            ))
            kernel = fd.KernelGrid(grid, 0.7)
            basis = trig_basis(SUPPORT, 3)
            theta = pathwise_coefficients(ensemble, basis)
            flags.append(delta_event_check([theta], config, ensemble, kernel, density).delta_l_holds)
        assert flags == [True, False]

    def test_numerical_derivative_fallback(self, contraction_setup):
        ensemble, basis, kernel, density, config = contraction_setup
        f, _ = fou_stationary_density(1.0, 1.0, 0.7)
        no_deriv = DensityModel.known(f, SUPPORT)  # no derivative info
        theta = pathwise_coefficients(ensemble, basis)
        with_d = delta_event_check([theta], config, ensemble, kernel, density)
        without_d = delta_event_check([theta], config, ensemble, kernel, no_deriv)
        assert without_d.deriv_sup_represented == pytest.approx(
            with_d.deriv_sup_represented, rel=0.05
        )

    def test_empirical_jacobian_fallback_can_rescue(self, contraction_setup,
                                                    known_density_factory):
        # Make the analytic route fail via a huge c_bound, then let the
        # empirical Jacobian certify the contraction at the iterate.
        ensemble, basis, kernel, density, _ = contraction_setup
        config = EstimatorConfig(c_bound=300.0, l_target=0.5)
        theta = pathwise_coefficients(ensemble, basis)
        plain = delta_event_check([theta], config, ensemble, kernel, density)
        assert not plain.delta_l_holds
        rescued = delta_event_check([theta], config, ensemble, kernel, density,
                                    use_empirical_jacobian=True)
        assert rescued.delta_l_holds
        assert rescued.empirical_jacobian_norm is not None


class TestOracleEstimator:
    def test_risk_decreases_with_ensemble_size(self, linear_drift, known_density_factory):
        grid = fd.TimeGrid(1.0, 128)
        kernel = fd.KernelGrid(grid, 0.7)
        basis = trig_basis(SUPPORT, 5)
        density = known_density_factory(SUPPORT)
        medians = []
        for n_paths in (25, 200):
            risks = []
            for rep in range(7):
                ensemble = fd.simulate_ensemble(fd.SdeConfig(
                    drift=linear_drift, sigma=1.0, H=0.7, grid=grid,
                    n_paths=n_paths, seed=40_000 + 131 * rep + n_paths,
                ))
                coeffs = oracle_hat_b(ensemble, basis, kernel, linear_drift)
                risks.append(weighted_l2_error(
                    lambda x: coeffs.evaluate(x) / density.evaluate(x),
                    linear_drift.b0, density, SUPPORT,
                ))
            medians.append(np.median(risks))
        assert medians[1] < medians[0]


class TestDensityProjection:
    def test_average_invariance_under_duplicated_paths(self, small_ensemble):
        basis = trig_basis(SUPPORT, 4)
        single = fd.SdeEnsemble(
            grid=small_ensemble.grid, values=small_ensemble.values[:1].copy(),
            H=small_ensemble.H, sigma=small_ensemble.sigma,
            drift_id=small_ensemble.drift_id, master_seed=small_ensemble.master_seed,
            path_seeds=small_ensemble.path_seeds[:1].copy(),
        )
        double = fd.SdeEnsemble(
            grid=small_ensemble.grid,
            values=np.vstack([small_ensemble.values[:1]] * 2),
            H=small_ensemble.H, sigma=small_ensemble.sigma,
            drift_id=small_ensemble.drift_id, master_seed=small_ensemble.master_seed,
            path_seeds=np.concatenate([small_ensemble.path_seeds[:1]] * 2),
        )
        a = density_projection(single, basis).values
        b = density_projection(double, basis).values
        assert np.max(np.abs(a - b)) < 1e-15

    def test_constant_coefficient_captures_occupation_mass(self, big_ensemble):
        support = IntervalSupport(-3.0, 3.0)  # covers nearly all the mass
        basis = trig_basis(support, 1)
        coeff = density_projection(big_ensemble, basis).values[0]
        assert coeff == pytest.approx(np.sqrt(1.0 / 6.0), rel=0.02)

    def test_recovers_stationary_density(self, big_ensemble):
        from scipy.integrate import simpson

        f, _ = fou_stationary_density(1.0, 1.0, 0.7)
        support = IntervalSupport(-2.0, 2.0)
        basis = trig_basis(support, 15)
        coeffs = density_projection(big_ensemble, basis)
        x = support.grid(4001)
        err = np.sqrt(simpson((coeffs.evaluate(x) - f(x)) ** 2, x=x))
        assert err <= 0.05


class TestPracticalEstimate:
    def test_known_mode_is_bitwise_fixed_point_solve(self, contraction_setup):
        ensemble, basis, kernel, density, config = contraction_setup
        via_practical = practical_estimate(
            ensemble, basis, kernel, config, "known", known_density=density
        )
        I_bar = pathwise_coefficients(ensemble, basis)
        direct = fixed_point_solve(config, I_bar, ensemble, kernel, density)
        assert np.array_equal(via_practical.theta_star.values, direct.theta_star.values)
        assert via_practical.residuals == direct.residuals
        assert via_practical.truncated == direct.truncated

    def test_plug_in_density_costs_risk_in_median(self, linear_drift,
                                                  known_density_factory):
        grid = fd.TimeGrid(0.05, 64)
        basis = trig_basis(SUPPORT, 3)
        kernel = fd.KernelGrid(grid, 0.7)
        density = known_density_factory(SUPPORT)
        config = EstimatorConfig(c_bound=20.0, l_target=0.5)
        diffs = []
        for rep in range(11):
            ensemble = fd.simulate_ensemble(fd.SdeConfig(
                drift=linear_drift, sigma=1.0, H=0.7, grid=grid, n_paths=100,
                seed=88_000 + rep,
            ))
            known = practical_estimate(ensemble, basis, kernel, config, "known",
                                       known_density=density)
            est = practical_estimate(ensemble, basis, kernel, config, "estimated")
            diffs.append(
                weighted_l2_error(est.evaluate, linear_drift.b0, density, SUPPORT)
                - weighted_l2_error(known.evaluate, linear_drift.b0, density, SUPPORT)
            )
        assert np.median(diffs) >= 0.0

    def test_truncating_configuration_reports_zero_function(self, linear_drift,
                                                            known_density_factory):
        grid = fd.TimeGrid(1.0, 64)
        ensemble = fd.simulate_ensemble(fd.SdeConfig(
            drift=linear_drift, sigma=1.0, H=0.7, grid=grid, n_paths=50, seed=5,
        ))
        basis = trig_basis(SUPPORT, 5)
        kernel = fd.KernelGrid(grid, 0.7)
        density = known_density_factory(SUPPORT)
        config = EstimatorConfig(c_bound=2.0, l_target=0.5)
        res = practical_estimate(ensemble, basis, kernel, config, "known",
                                 known_density=density)
        assert not res.delta_l_holds
        assert res.truncated
        x = SUPPORT.grid(33)
        assert np.all(res.evaluate(x) == 0.0)
        assert np.any(res.raw_evaluate(x) != 0.0)

    def test_negative_raw_density_recorded_as_warning(self, linear_drift):
        grid = fd.TimeGrid(0.5, 32)
        ensemble = fd.simulate_ensemble(fd.SdeConfig(
            drift=linear_drift, sigma=1.0, H=0.7, grid=grid, n_paths=2, seed=21,
        ))
        basis = trig_basis(IntervalSupport(-2.5, 2.5), 7)
        kernel = fd.KernelGrid(grid, 0.7)
        config = EstimatorConfig(c_bound=50.0, l_target=0.5)
        res = practical_estimate(ensemble, basis, kernel, config, "estimated")
        assert any("non-positive" in w for w in res.warnings)


class TestWeightedError:
    def test_zero_for_equal_functions(self, known_density_factory):
        density = known_density_factory(SUPPORT)
        assert weighted_l2_error(np.sin, np.sin, density, SUPPORT) == 0.0

    def test_constant_difference_closed_form(self):
        kappa = 0.35
        density = DensityModel.known(
            lambda x: np.full_like(np.asarray(x, dtype=float), kappa), SUPPORT
        )
        c = 0.8
        got = weighted_l2_error(
            lambda x: np.full_like(x, c), lambda x: np.zeros_like(x), density, SUPPORT
        )
        assert got == pytest.approx(c**2 * kappa**2 * SUPPORT.length, rel=1e-10)

    def test_pythagorean_decomposition(self, contraction_setup, linear_drift):
        ensemble, basis, kernel, density, config = contraction_setup
        I_bar = pathwise_coefficients(ensemble, basis)
        res = fixed_point_solve(config, I_bar, ensemble, kernel, density)
        theta = res.theta_star.values
        projection = project_function(
            lambda x: linear_drift.b0(x) * density.evaluate(x), basis
        )
        bias = weighted_l2_error(
            lambda x: projection.evaluate(x) / density.evaluate(x),
            linear_drift.b0, density, SUPPORT,
        )
        total = weighted_l2_error(res.raw_evaluate, linear_drift.b0, density, SUPPORT)
        decomposition = bias + np.sum((theta - projection.values) ** 2)
        assert total == pytest.approx(decomposition, rel=1e-6)


class TestSklearnApi:
    def test_get_set_params_round_trip(self):
        est = FixedPointDriftEstimator(m=7, support=(-2.0, 2.0), c_bound=5.0)
        params = est.get_params()
        assert params["m"] == 7
        clone = FixedPointDriftEstimator().set_params(**params)
        assert clone.get_params() == params

    def test_sklearn_clone(self):
        from sklearn.base import clone

        est = FixedPointDriftEstimator(m=3, support=(-1.0, 1.0))
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_fit_predict_fixed_point(self, contraction_setup):
        ensemble, _, _, density, _ = contraction_setup
        est = FixedPointDriftEstimator(
            m=3, support=(-1.0, 1.0), c_bound=20.0, density_mode="known",
            known_density=density,
        )
        est.fit(ensemble)
        x = np.linspace(-0.8, 0.8, 9)
        pred = est.predict(x)
        assert pred.shape == x.shape
        assert est.coef_.shape == (3,)
        assert est.n_iter_ >= 1
        # in this regime the estimate tracks the linear drift loosely
        assert np.corrcoef(pred, -x)[0, 1] > 0.9

    def test_fit_rejects_non_ensemble(self):
        with pytest.raises(TypeError):
            FixedPointDriftEstimator().fit(np.zeros((3, 4)))

    def test_oracle_wrapper(self, contraction_setup, linear_drift):
        ensemble, _, _, density, _ = contraction_setup
        est = OracleDriftEstimator(drift=linear_drift, m=3, support=(-1.0, 1.0),
                                   density=density)
        est.fit(ensemble)
        pred = est.predict([0.0, 0.5])
        assert pred.shape == (2,)

    def test_density_wrapper_flooring(self, small_ensemble):
        est = DensityProjectionEstimator(m=5, support=(-1.0, 1.0), density_floor=1e-3)
        est.fit(small_ensemble)
        vals = est.predict(np.linspace(-1, 1, 21))
        assert np.all(vals >= 1e-3)


class TestResultSerialization:
    def test_json_round_trip(self, contraction_setup, tmp_path):
        ensemble, basis, kernel, density, config = contraction_setup
        res = practical_estimate(ensemble, basis, kernel, config, "known",
                                 known_density=density)
        path = tmp_path / "estimate.json"
        res.save_json(path)
        doc = json.loads(path.read_text())
        assert doc["coefficients"] == [float(v) for v in res.theta_star.values]
        assert doc["m"] == 3
        assert doc["truncated"] == res.truncated
        assert doc["residuals"] == [float(r) for r in res.residuals]

    def test_curve_export(self, contraction_setup, linear_drift, tmp_path):
        ensemble, basis, kernel, density, config = contraction_setup
        res = practical_estimate(ensemble, basis, kernel, config, "known",
                                 known_density=density)
        path = tmp_path / "curve.csv"
        export_curve_csv(res, linear_drift.b0, path, points=65)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x,b_estimate,b_true,f"
        assert len(lines) == 66
        table = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.all(np.isfinite(table))
        assert table[0, 0] == -1.0 and table[-1, 0] == 1.0
