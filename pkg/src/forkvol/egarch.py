"""EGARCH(1,1) with Student-t innovations and event regressors.

The model:

    R(t)      = mu + delta_event_mean * D(t) + delta_index * R_idx(t) + eps(t)
    eps(t)    = sigma(t) * z(t),   z(t) ~ standardized Student-t(nu)
    ln s2(t)  = omega + alpha * (|z(t-1)| - E|z|) + gamma * z(t-1)
                + beta * ln s2(t-1) + delta_event_var * D(t)

D(t) is a deterministic event regressor (indicator or count). The event
term may sit in the mean equation, the log-variance equation, or neither.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

__all__ = [
    "ParameterSet",
    "ModelSpec",
    "VolatilityPath",
    "FilterOutput",
    "SimulationResult",
    "expected_abs_z",
    "std_t_log_density",
    "egarch_filter",
    "simulate",
]


class FilterDivergenceError(ValueError):
    """Raised when the variance recursion produces a non-finite value."""

    def __init__(self, index):
        self.index = index
        super().__init__(
            f"non-finite conditional variance at observation {index}; "
            "parameters likely divergent"
        )


@dataclass(frozen=True)
class ParameterSet:
    """Coefficients of the model. Optional terms are None when absent."""

    mu: float = 0.0
    omega: float = 0.0
    alpha: float = 0.0
    gamma: float = 0.0
    beta: float = 0.0
    delta_event_mean: float | None = None
    delta_index: float | None = None
    delta_event_var: float | None = None
    nu: float = 5.0

    def __post_init__(self):
        if not abs(self.beta) < 1.0:
            raise ValueError(f"|beta| must be < 1, got {self.beta}")
        if not self.nu > 2.0:
            raise ValueError(f"nu must be > 2, got {self.nu}")

    def replace(self, **kwargs) -> "ParameterSet":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ModelSpec:
    """Which terms enter the model.

    dummy_location: 'none', 'mean' or 'variance'.
    regressor_kind: 'dummy' (0/1 indicator) or 'count' (events per day);
    'count' is only meaningful in the variance equation.
    """

    include_index: bool = False
    dummy_location: str = "variance"
    regressor_kind: str = "dummy"
    nu: float = 5.0
    estimate_nu: bool = False

    def __post_init__(self):
        if self.dummy_location not in ("none", "mean", "variance"):
            raise ValueError(f"bad dummy_location {self.dummy_location!r}")
        if self.regressor_kind not in ("dummy", "count"):
            raise ValueError(f"bad regressor_kind {self.regressor_kind!r}")
        if self.regressor_kind == "count" and self.dummy_location != "variance":
            raise ValueError("regressor_kind='count' requires dummy_location='variance'")
        if not self.nu > 2.0:
            raise ValueError(f"nu must be > 2, got {self.nu}")

    def slug(self) -> str:
        parts = [self.dummy_location if self.dummy_location != "none" else "plain"]
        if self.regressor_kind == "count":
            parts.append("count")
        parts.append("crix" if self.include_index else "nocrix")
        return "_".join(parts)

    def param_names(self) -> list[str]:
        names = ["mu"]
        if self.dummy_location == "mean":
            names.append("delta_event_mean")
        if self.include_index:
            names.append("delta_index")
        names += ["omega", "alpha", "gamma", "beta"]
        if self.dummy_location == "variance":
            names.append("delta_event_var")
        if self.estimate_nu:
            names.append("nu")
        return names


@dataclass(frozen=True)
class VolatilityPath:
    sigma: np.ndarray
    z: np.ndarray
    log_var: np.ndarray


@dataclass(frozen=True)
class FilterOutput:
    path: VolatilityPath
    loglik_terms: np.ndarray
    log_likelihood: float
    residuals: np.ndarray
    initial_log_var: float


@dataclass(frozen=True)
class SimulationResult:
    returns: np.ndarray
    path: VolatilityPath
    initial_log_var: float
    seed: int


def expected_abs_z(nu: float) -> float:
    """E|z| for the unit-variance Student-t with nu degrees of freedom.

    2 * sqrt(nu-2) * Gamma((nu+1)/2) / (sqrt(pi) * (nu-1) * Gamma(nu/2)).
    """
    if not nu > 2.0:
        raise ValueError(f"nu must be > 2, got {nu}")
    log_val = (
        math.log(2.0)
        + 0.5 * math.log(nu - 2.0)
        + gammaln((nu + 1.0) / 2.0)
        - 0.5 * math.log(math.pi)
        - math.log(nu - 1.0)
        - gammaln(nu / 2.0)
    )
    return float(math.exp(log_val))


def std_t_log_density(z, nu: float):
    """Log density of the standardized (unit-variance) Student-t at z."""
    if not nu > 2.0:
        raise ValueError(f"nu must be > 2, got {nu}")
    z = np.asarray(z, dtype=float)
    const = (
        gammaln((nu + 1.0) / 2.0)
        - gammaln(nu / 2.0)
        - 0.5 * math.log(math.pi * (nu - 2.0))
    )
    out = const - ((nu + 1.0) / 2.0) * np.log1p(z * z / (nu - 2.0))
    return float(out) if out.ndim == 0 else out


def _recursion_py(eps, dvar, omega, alpha, gamma, beta, delta_var, e_abs, lv0):
    n = eps.shape[0]
    log_var = np.empty(n)
    sigma = np.empty(n)
    z = np.empty(n)
    lv = lv0
    for t in range(n):
        if t > 0:
            lv = (
                omega
                + alpha * (abs(z[t - 1]) - e_abs)
                + gamma * z[t - 1]
                + beta * log_var[t - 1]
                + delta_var * dvar[t]
            )
        log_var[t] = lv
        s = math.exp(0.5 * lv)
        sigma[t] = s
        z[t] = eps[t] / s
    return log_var, sigma, z


def _simulate_recursion_py(
    z_draw, dvar, idx, omega, alpha, gamma, beta, delta_var, e_abs, lv0,
    mu, delta_mean, delta_idx, use_mean_dummy, use_idx,
):
    # The recursion is driven by the z a filter would recover from the
    # emitted returns (same op order as egarch_filter), so the round trip
    # filter(simulate(theta)) is bit-exact rather than 1-ulp close.
    n = z_draw.shape[0]
    log_var = np.empty(n)
    sigma = np.empty(n)
    z = np.empty(n)
    returns = np.empty(n)
    lv = lv0
    for t in range(n):
        if t > 0:
            lv = (
                omega
                + alpha * (abs(z[t - 1]) - e_abs)
                + gamma * z[t - 1]
                + beta * log_var[t - 1]
                + delta_var * dvar[t]
            )
        log_var[t] = lv
        s = math.exp(0.5 * lv)
        sigma[t] = s
        r = mu + s * z_draw[t]
        if use_mean_dummy:
            r = r + delta_mean * dvar[t]
        if use_idx:
            r = r + delta_idx * idx[t]
        returns[t] = r
        # reconstruct z exactly as the filter will
        eps = r - mu
        if use_mean_dummy:
            eps = eps - delta_mean * dvar[t]
        if use_idx:
            eps = eps - delta_idx * idx[t]
        z[t] = eps / s
    return log_var, sigma, z, returns


try:  # pragma: no cover - exercised implicitly
    from numba import njit

    # numpy error model: sigma underflow gives inf/nan (caught afterwards)
    # instead of raising mid-recursion
    _recursion = njit(cache=True, error_model="numpy")(_recursion_py)
    _simulate_recursion = njit(cache=True, error_model="numpy")(_simulate_recursion_py)
except ImportError:  # pragma: no cover
    _recursion = _recursion_py
    _simulate_recursion = _simulate_recursion_py


def _mean_residuals(returns, params, regressor, index_returns, spec_dummy_in_mean):
    eps = returns - params.mu
    if spec_dummy_in_mean and params.delta_event_mean is not None:
        eps = eps - params.delta_event_mean * regressor
    if params.delta_index is not None:
        if index_returns is None:
            raise ValueError("delta_index set but no index returns supplied")
        eps = eps - params.delta_index * index_returns
    return eps


def egarch_filter(
    returns,
    params: ParameterSet,
    *,
    regressor=None,
    index_returns=None,
    dummy_in_mean: bool = False,
    initial_log_var: float | None = None,
) -> FilterOutput:
    """Run the variance recursion over observed returns.

    The recursion is seeded at ln(sample variance of the mean-equation
    residuals) unless ``initial_log_var`` overrides it; z(0) is treated as
    zero, so sigma(1) equals the seed exactly. Per-observation likelihood
    terms use the standardized-t density with the ln(sigma) Jacobian.
    """
    returns = np.ascontiguousarray(returns, dtype=float)
    n = returns.shape[0]
    if n == 0:
        raise ValueError("empty return series")
    if regressor is None:
        regressor = np.zeros(n)
    regressor = np.ascontiguousarray(regressor, dtype=float)
    if regressor.shape[0] != n:
        raise ValueError("regressor length mismatch")
    if index_returns is not None:
        index_returns = np.ascontiguousarray(index_returns, dtype=float)
        if index_returns.shape[0] != n:
            raise ValueError("index return length mismatch")

    eps = _mean_residuals(returns, params, regressor, index_returns, dummy_in_mean)

    if initial_log_var is None:
        v = float(np.var(eps))
        if v <= 0.0:
            raise ValueError("degenerate residuals: zero sample variance")
        lv0 = math.log(v)
    else:
        lv0 = float(initial_log_var)

    delta_var = params.delta_event_var if params.delta_event_var is not None else 0.0
    e_abs = expected_abs_z(params.nu)
    log_var, sigma, z = _recursion(
        eps, regressor, params.omega, params.alpha, params.gamma,
        params.beta, delta_var, e_abs, lv0,
    )
    finite = np.isfinite(log_var) & np.isfinite(sigma) & np.isfinite(z)
    if not finite.all():
        raise FilterDivergenceError(int(np.argmin(finite)))

    with np.errstate(over="ignore", invalid="ignore"):
        terms = std_t_log_density(z, params.nu) - 0.5 * log_var
    return FilterOutput(
        path=VolatilityPath(sigma=sigma, z=z, log_var=log_var),
        loglik_terms=terms,
        log_likelihood=float(np.sum(terms)),
        residuals=eps,
        initial_log_var=lv0,
    )


def draw_standardized_t(rng: np.random.Generator, nu: float, size: int) -> np.ndarray:
    """i.i.d. draws from the unit-variance Student-t."""
    return rng.standard_t(nu, size) * math.sqrt((nu - 2.0) / nu)


def simulate(
    params: ParameterSet,
    horizon: int,
    seed: int,
    *,
    regressor=None,
    index_returns=None,
    dummy_in_mean: bool = False,
    initial_log_var: float | None = None,
) -> SimulationResult:
    """Simulate the process forward with a seeded generator.

    Seeded at the unconditional log-variance omega/(1-beta) unless
    overridden. Identical seed and inputs give bit-identical output.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if regressor is None:
        regressor = np.zeros(horizon)
    regressor = np.ascontiguousarray(regressor, dtype=float)
    if regressor.shape[0] != horizon:
        raise ValueError("regressor length mismatch")
    if index_returns is not None:
        index_returns = np.ascontiguousarray(index_returns, dtype=float)
        if index_returns.shape[0] != horizon:
            raise ValueError("index return length mismatch")

    lv0 = (
        params.omega / (1.0 - params.beta)
        if initial_log_var is None
        else float(initial_log_var)
    )
    rng = np.random.default_rng(seed)
    z_draw = draw_standardized_t(rng, params.nu, horizon)
    delta_var = params.delta_event_var if params.delta_event_var is not None else 0.0
    e_abs = expected_abs_z(params.nu)

    use_mean_dummy = dummy_in_mean and params.delta_event_mean is not None
    delta_mean = params.delta_event_mean if use_mean_dummy else 0.0
    use_idx = params.delta_index is not None
    if use_idx and index_returns is None:
        raise ValueError("delta_index set but no index returns supplied")
    idx = index_returns if use_idx else np.zeros(horizon)

    log_var, sigma, z, returns = _simulate_recursion(
        z_draw, regressor, idx, params.omega, params.alpha, params.gamma,
        params.beta, delta_var, e_abs, lv0,
        params.mu, delta_mean, params.delta_index if use_idx else 0.0,
        use_mean_dummy, use_idx,
    )

    return SimulationResult(
        returns=returns,
        path=VolatilityPath(sigma=sigma, z=z, log_var=log_var),
        initial_log_var=lv0,
        seed=seed,
    )
