import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from forkvol import (
    ModelSpec,
    ParameterSet,
    egarch_filter,
    expected_abs_z,
    simulate,
    std_t_log_density,
)
from forkvol.egarch import FilterDivergenceError


def t_density(z, nu):
    """Unit-variance Student-t density, written from the definition."""
    c = gamma_fn((nu + 1) / 2) / (gamma_fn(nu / 2) * math.sqrt(math.pi * (nu - 2)))
    return c * (1 + z * z / (nu - 2)) ** (-(nu + 1) / 2)


class TestExpectedAbsZ:
    def test_nu_3_closed_form_collapses_to_2_over_pi(self):
        assert expected_abs_z(3) == pytest.approx(2 / math.pi, abs=1e-12)

    @pytest.mark.parametrize("nu", [3, 4, 5, 8, 20])
    def test_matches_quadrature(self, nu):
        oracle, _ = quad(lambda z: 2 * z * t_density(z, nu), 0, np.inf)
        assert expected_abs_z(nu) == pytest.approx(oracle, abs=1e-8)

    def test_gaussian_limit(self):
        assert expected_abs_z(1e6) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-4)

    def test_nu_at_most_2_rejected(self):
        with pytest.raises(ValueError):
            expected_abs_z(2.0)


class TestStdTLogDensity:
    def test_value_at_zero_nu_5(self):
        # Gamma(3) / (Gamma(2.5) * sqrt(3*pi))
        expected = math.log(gamma_fn(3.0) / (gamma_fn(2.5) * math.sqrt(3 * math.pi)))
        assert std_t_log_density(0.0, 5) == pytest.approx(expected, abs=1e-12)
        assert std_t_log_density(0.0, 5) == pytest.approx(-0.713210, abs=1e-5)

    @given(z=st.floats(-50, 50), nu=st.floats(2.1, 100))
    def test_symmetry(self, z, nu):
        assert std_t_log_density(z, nu) == std_t_log_density(-z, nu)

    @pytest.mark.parametrize("nu", [3, 5, 10])
    def test_density_integrates_to_one(self, nu):
        total, _ = quad(lambda z: math.exp(std_t_log_density(z, nu)), -np.inf, np.inf)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_unit_variance(self, ):
        for nu in (3, 5, 12):
            var, _ = quad(lambda z: z * z * math.exp(std_t_log_density(z, nu)), -np.inf, np.inf)
            assert var == pytest.approx(1.0, abs=1e-7)


def oracle_filter(returns, D, mu, omega, alpha, gamma, beta, delta_var, nu, lv0=None):
    """Step-by-step recursion scripted independently with plain floats."""
    eps = [r - mu for r in returns]
    if lv0 is None:
        m = sum(eps) / len(eps)
        lv0 = math.log(sum((e - m) ** 2 for e in eps) / len(eps))
    e_abs = 2 * math.sqrt(nu - 2) * gamma_fn((nu + 1) / 2) / (
        math.sqrt(math.pi) * (nu - 1) * gamma_fn(nu / 2)
    )
    log_var, sigma, z = [], [], []
    for t in range(len(returns)):
        if t == 0:
            lv = lv0
        else:
            lv = (omega + alpha * (abs(z[t - 1]) - e_abs) + gamma * z[t - 1]
                  + beta * log_var[t - 1] + delta_var * D[t])
        log_var.append(lv)
        s = math.exp(0.5 * lv)
        sigma.append(s)
        z.append(eps[t] / s)
    ll = sum(
        math.log(t_density(zt, nu)) - 0.5 * lv for zt, lv in zip(z, log_var)
    )
    return np.array(sigma), np.array(z), ll


class TestFilter:
    def test_degenerate_recursion_constant_sigma(self):
        p = ParameterSet(mu=0.0, omega=-7.0, alpha=0.0, gamma=0.0, beta=0.0, nu=5)
        out = egarch_filter(np.array([0.01, -0.02, 0.005]), p, initial_log_var=-7.0)
        assert np.allclose(out.path.sigma, math.exp(-3.5), atol=1e-15)

    def test_three_observation_oracle(self):
        returns = [0.012, -0.034, 0.02]
        D = [0.0, 1.0, 0.0]
        p = ParameterSet(mu=0.0, omega=-0.2, alpha=0.1, gamma=0.2, beta=0.9,
                         delta_event_var=0.3, nu=5)
        out = egarch_filter(np.array(returns), p, regressor=np.array(D))
        sigma_o, z_o, ll_o = oracle_filter(returns, D, 0.0, -0.2, 0.1, 0.2, 0.9, 0.3, 5)
        np.testing.assert_allclose(out.path.sigma, sigma_o, rtol=0, atol=1e-12)
        np.testing.assert_allclose(out.path.z, z_o, rtol=0, atol=1e-12)
        assert out.log_likelihood == pytest.approx(ll_o, abs=1e-10)

    def test_unconditional_log_variance_arithmetic(self):
        # omega/(1-beta) at the headline persistence estimates
        assert -0.1298 / (1 - 0.9826) == pytest.approx(-7.4598, abs=5e-4)

    def test_divergent_parameters_raise_named_error(self):
        p = ParameterSet(mu=0.0, omega=300.0, alpha=5.0, gamma=5.0, beta=0.999, nu=5)
        rng = np.random.default_rng(0)
        with pytest.raises(FilterDivergenceError):
            egarch_filter(rng.normal(0, 5, 200), p)

    def test_mean_dummy_and_index_terms_subtract(self):
        rng = np.random.default_rng(1)
        n = 50
        idx = rng.normal(0, 0.02, n)
        D = (np.arange(n) % 7 == 0).astype(float)
        p = ParameterSet(mu=0.001, omega=-0.5, alpha=0.1, gamma=0.1, beta=0.85,
                         delta_event_mean=0.02, delta_index=0.9, nu=5)
        r = rng.normal(0, 0.03, n)
        out = egarch_filter(r, p, regressor=D, index_returns=idx, dummy_in_mean=True)
        np.testing.assert_allclose(out.residuals, r - 0.001 - 0.02 * D - 0.9 * idx, atol=1e-15)

    def test_sign_asymmetry_with_positive_gamma(self):
        p = ParameterSet(mu=0.0, omega=-0.2, alpha=0.1, gamma=0.25, beta=0.9, nu=5)
        for c in (0.5, 1.0, 3.0):
            up = egarch_filter(np.array([c, 0.0]), p, initial_log_var=0.0)
            dn = egarch_filter(np.array([-c, 0.0]), p, initial_log_var=0.0)
            assert up.path.log_var[1] > dn.path.log_var[1]

    def test_variance_dummy_raises_event_day_sigma(self):
        rng = np.random.default_rng(2)
        r = rng.normal(0, 0.03, 100)
        D = (np.arange(100) % 10 == 0).astype(float)
        base = ParameterSet(mu=0.0, omega=-0.7, alpha=0.1, gamma=0.1, beta=0.9,
                            delta_event_var=0.4, nu=5)
        with_d = egarch_filter(r, base, regressor=D, initial_log_var=-7.0)
        without = egarch_filter(r, base.replace(delta_event_var=0.0), regressor=D,
                                initial_log_var=-7.0)
        event_days = np.where(D == 1)[0][1:]  # day 0 shares the seed
        assert np.all(with_d.path.sigma[event_days] > without.path.sigma[event_days])


class TestSimulate:
    def test_same_seed_bit_identical(self):
        p = ParameterSet(mu=0.0, omega=-7.0, alpha=0.05, gamma=0.1, beta=0.9, nu=5)
        a = simulate(p, 500, seed=42)
        b = simulate(p, 500, seed=42)
        assert np.array_equal(a.returns, b.returns)
        assert np.array_equal(a.path.sigma, b.path.sigma)

    def test_iid_case_matches_unconditional_variance(self):
        # alpha=gamma=0, beta=0: returns are i.i.d. scaled-t with var e^omega
        p = ParameterSet(mu=0.0, omega=-7.0, alpha=0.0, gamma=0.0, beta=0.0, nu=5)
        sim = simulate(p, 100_000, seed=3)
        assert np.var(sim.returns) == pytest.approx(math.exp(-7.0), rel=0.02)

    def test_standardized_t_kurtosis_near_six(self):
        p = ParameterSet(mu=0.0, omega=-7.0, alpha=0.0, gamma=0.0, beta=0.0, nu=5)
        sim = simulate(p, 400_000, seed=4)
        z = sim.path.z
        k = np.mean((z - z.mean()) ** 4) / np.var(z) ** 2 - 3
        assert k == pytest.approx(6.0, rel=0.25)  # slow-converging 8th-moment stat

    def test_filter_round_trip_bit_exact(self):
        p = ParameterSet(mu=0.001, omega=-0.15, alpha=0.05, gamma=0.2, beta=0.97,
                         delta_event_var=0.2, nu=5)
        D = (np.arange(800) % 40 == 0).astype(float)
        sim = simulate(p, 800, seed=5, regressor=D)
        out = egarch_filter(sim.returns, p, regressor=D, initial_log_var=sim.initial_log_var)
        assert np.array_equal(out.path.sigma, sim.path.sigma)
        assert np.array_equal(out.path.z, sim.path.z)

    @settings(deadline=None, max_examples=25)
    @given(
        mu=st.floats(-0.01, 0.01),
        omega=st.floats(-1.0, -0.01),
        alpha=st.floats(-0.3, 0.3),
        gamma=st.floats(-0.4, 0.4),
        beta=st.floats(-0.95, 0.98),
        delta=st.floats(-0.5, 0.5),
        seed=st.integers(0, 2**31),
    )
    def test_round_trip_property(self, mu, omega, alpha, gamma, beta, delta, seed):
        p = ParameterSet(mu=mu, omega=omega, alpha=alpha, gamma=gamma, beta=beta,
                         delta_event_var=delta, nu=5)
        D = (np.arange(300) % 30 == 0).astype(float)
        sim = simulate(p, 300, seed=seed, regressor=D)
        out = egarch_filter(sim.returns, p, regressor=D, initial_log_var=sim.initial_log_var)
        assert np.array_equal(out.path.sigma, sim.path.sigma)

    def test_horizon_zero_rejected(self):
        p = ParameterSet(omega=-7.0, beta=0.0, nu=5)
        with pytest.raises(ValueError):
            simulate(p, 0, seed=1)

    def test_loglik_peaks_near_truth(self):
        truth = ParameterSet(mu=0.001, omega=-0.15, alpha=0.05, gamma=0.2, beta=0.97,
                             delta_event_var=0.2, nu=5)
        D = (np.arange(5000) % 50 == 0).astype(float)
        hits = 0
        trials = 0
        for seed in range(10):
            sim = simulate(truth, 5000, seed=seed, regressor=D)
            ll_true = egarch_filter(sim.returns, truth, regressor=D).log_likelihood
            for name in ("mu", "omega", "alpha", "gamma", "delta_event_var"):
                bumped = truth.replace(**{name: getattr(truth, name) + 0.1})
                try:
                    ll_bumped = egarch_filter(sim.returns, bumped, regressor=D).log_likelihood
                except FilterDivergenceError:
                    ll_bumped = -math.inf
                trials += 1
                hits += ll_true > ll_bumped
        assert hits / trials >= 0.95


class TestModelSpec:
    def test_count_regressor_requires_variance_location(self):
        with pytest.raises(ValueError):
            ModelSpec(dummy_location="mean", regressor_kind="count")

    def test_param_names_for_reported_specs(self):
        assert ModelSpec(include_index=False, dummy_location="mean").param_names() == [
            "mu", "delta_event_mean", "omega", "alpha", "gamma", "beta",
        ]
        assert ModelSpec(include_index=True, dummy_location="variance").param_names() == [
            "mu", "delta_index", "omega", "alpha", "gamma", "beta", "delta_event_var",
        ]

    def test_invariants_on_parameter_set(self):
        with pytest.raises(ValueError):
            ParameterSet(beta=1.0)
        with pytest.raises(ValueError):
            ParameterSet(beta=0.5, nu=2.0)
