"""QMLE fitting of the EGARCH event models with robust inference.

The optimizer works in an unconstrained reparameterization (beta through
tanh, nu through 2 + exp when estimated) from a deterministic multi-start
grid, so fits are reproducible without a seed. Standard errors come from
the sandwich covariance H^-1 S H^-1 built from central-difference scores
and Hessian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.stats import t as student_t

from .egarch import FilterOutput, ModelSpec, ParameterSet, egarch_filter

__all__ = [
    "FitResult",
    "HypothesisOutcome",
    "EstimationError",
    "fit",
    "robust_se",
    "information_criteria",
    "test_hypotheses",
]

SIGNIFICANCE_LEVELS = (0.10, 0.05, 0.01)


class EstimationError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class FitResult:
    spec: ModelSpec
    params: ParameterSet
    param_names: list[str]
    estimates: np.ndarray
    robust_se: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    log_likelihood: float
    n_obs: int
    ic: dict
    sigma_path: np.ndarray
    std_residuals: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    beta_boundary_warning: bool = False
    initial_log_var: float = 0.0

    @property
    def k(self) -> int:
        return len(self.param_names)

    def to_dict(self, include_paths: bool = True) -> dict:
        out = {
            "spec": {
                "include_index": self.spec.include_index,
                "dummy_location": self.spec.dummy_location,
                "regressor_kind": self.spec.regressor_kind,
                "nu": self.spec.nu,
                "estimate_nu": self.spec.estimate_nu,
            },
            "param_names": list(self.param_names),
            "estimates": [float(v) for v in self.estimates],
            "robust_se": [float(v) for v in self.robust_se],
            "t_values": [float(v) for v in self.t_values],
            "p_values": [float(v) for v in self.p_values],
            "log_likelihood": float(self.log_likelihood),
            "n_obs": int(self.n_obs),
            "ic": {k: float(v) for k, v in self.ic.items()},
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "gradient_norm": float(self.gradient_norm),
            "beta_boundary_warning": bool(self.beta_boundary_warning),
            "initial_log_var": float(self.initial_log_var),
        }
        if include_paths:
            out["sigma_path"] = [float(v) for v in self.sigma_path]
        return out

    def to_table(self) -> str:
        """Aligned coefficient table; standard errors reported in percent."""
        header = f"{'Parameter':<18}{'Estimate':>12}{'Std. Error (in %)':>20}{'t value':>12}{'p value':>10}"
        lines = [header, "-" * len(header)]
        for name, est, se, t, p in zip(
            self.param_names, self.estimates, self.robust_se, self.t_values, self.p_values
        ):
            lines.append(
                f"{name:<18}{est:>12.4f}{100.0 * se:>20.4f}{t:>12.3f}{p:>10.3f}"
            )
        lines.append("-" * len(header))
        lines.append(f"{'Log likelihood':<18}{self.log_likelihood:>12.4f}")
        lines.append(f"{'Observations':<18}{self.n_obs:>12d}")
        for name in ("akaike", "bayes", "shibata", "hannan_quinn"):
            lines.append(f"{name:<18}{self.ic[name]:>12.5f}")
        return "\n".join(lines)


@dataclass(frozen=True)
class HypothesisOutcome:
    name: str
    coefficient: float
    p_value: float
    reject_at: tuple[float, ...]


def information_criteria(log_likelihood: float, k: int, n: int) -> dict:
    """Per-observation Akaike, Bayes, Shibata and Hannan-Quinn values."""
    if n <= 2 * k:
        raise ValueError(f"need n > 2k, got n={n}, k={k}")
    ll = log_likelihood
    return {
        "akaike": (-2.0 * ll + 2.0 * k) / n,
        "bayes": (-2.0 * ll + k * math.log(n)) / n,
        "shibata": (-2.0 * ll + n * math.log((n + 2.0 * k) / n)) / n,
        "hannan_quinn": (-2.0 * ll + 2.0 * k * math.log(math.log(n))) / n,
    }


# ---------------------------------------------------------------------------
# parameter packing / transforms


def _pack(values: dict, names: list[str]) -> np.ndarray:
    """Natural-space values -> unconstrained optimizer vector."""
    theta = []
    for name in names:
        v = values[name]
        if name == "beta":
            theta.append(math.atanh(v))
        elif name == "nu":
            theta.append(math.log(v - 2.0))
        else:
            theta.append(v)
    return np.array(theta)


def _unpack(theta: np.ndarray, names: list[str], fixed_nu: float) -> ParameterSet:
    kwargs = {"nu": fixed_nu}
    for name, v in zip(names, theta):
        if name == "beta":
            kwargs["beta"] = math.tanh(v)
        elif name == "nu":
            kwargs["nu"] = 2.0 + math.exp(v)
        else:
            kwargs[name] = v
    return ParameterSet(**kwargs)


def _natural(theta: np.ndarray, names: list[str]) -> np.ndarray:
    out = np.array(theta, dtype=float)
    for i, name in enumerate(names):
        if name == "beta":
            out[i] = math.tanh(theta[i])
        elif name == "nu":
            out[i] = 2.0 + math.exp(theta[i])
    return out


def _params_from_natural(values: np.ndarray, names: list[str], fixed_nu: float) -> ParameterSet:
    kwargs = {"nu": fixed_nu}
    for name, v in zip(names, values):
        kwargs[name] = float(v)
    return ParameterSet(**kwargs)


def _select_regressor(regressors, spec: ModelSpec, n: int) -> np.ndarray:
    if spec.dummy_location == "none" or regressors is None:
        return np.zeros(n)
    if isinstance(regressors, (np.ndarray, list, tuple)):
        values = regressors
    else:
        values = regressors.count if spec.regressor_kind == "count" else regressors.dummy
    values = np.asarray(values, dtype=float)
    if values.shape[0] != n:
        raise ValueError("regressors not aligned with returns")
    return values


def _loglik_terms(values, names, spec, returns, index_returns, regressor, fixed_nu):
    """Per-observation log-likelihood at a natural-space parameter vector.

    Returns -inf terms for invalid/divergent parameters so the optimizer
    treats them as a penalty rather than an exception.
    """
    try:
        params = _params_from_natural(values, names, fixed_nu)
        out = egarch_filter(
            returns,
            params,
            regressor=regressor,
            index_returns=index_returns,
            dummy_in_mean=spec.dummy_location == "mean",
        )
    except (ValueError, ArithmeticError):
        return None
    if not np.all(np.isfinite(out.loglik_terms)):
        return None
    return out


def _start_grid(returns, index_returns, spec: ModelSpec, n_starts: int) -> list[dict]:
    """Deterministic multi-start values built around moment-based guesses."""
    resid = returns - float(np.mean(returns))
    if spec.include_index and index_returns is not None:
        # crude market-beta guess so omega sees residual, not raw, variance
        b = float(np.cov(returns, index_returns)[0, 1] / np.var(index_returns))
        resid = returns - b * index_returns - float(np.mean(returns - b * index_returns))
    sample_var = max(float(np.var(resid)), 1e-12)

    base = {
        "mu": float(np.mean(returns)),
        "alpha": 0.05,
        "gamma": 0.1,
        "beta": 0.9,
        "delta_event_mean": 0.0,
        "delta_index": 1.0 if spec.include_index else 0.0,
        "delta_event_var": 0.0,
        "nu": spec.nu,
    }
    base["omega"] = (1.0 - base["beta"]) * math.log(sample_var)

    perturbations = [
        {},
        {"beta": 0.97, "gamma": 0.2},
        {"beta": 0.8, "alpha": 0.15, "gamma": 0.0},
        {"beta": 0.5, "gamma": -0.1, "alpha": 0.1},
        {"beta": 0.95, "alpha": 0.0, "gamma": 0.3, "mu": 0.0},
        {"beta": 0.99, "alpha": 0.05, "gamma": 0.1},
        {"beta": 0.9, "gamma": 0.1, "mu": base["mu"] * 2.0},
    ]
    starts = []
    for pert in perturbations[:n_starts]:
        start = dict(base)
        start.update(pert)
        start["omega"] = (1.0 - start["beta"]) * math.log(sample_var)
        starts.append(start)
    return starts


def fit(
    returns,
    index_returns=None,
    regressors=None,
    spec: ModelSpec = ModelSpec(),
    *,
    n_starts: int = 5,
    min_obs: int = 300,
) -> FitResult:
    """Maximize the model log-likelihood over the free parameters.

    Deterministic multi-start then BFGS polish in the unconstrained space;
    the best start by log-likelihood wins (ties broken by start index).
    """
    returns = np.ascontiguousarray(returns, dtype=float)
    n = returns.shape[0]
    if n < min_obs:
        raise EstimationError(f"need at least {min_obs} observations, got {n}")
    if spec.include_index:
        if index_returns is None:
            raise EstimationError("spec includes the index but no index returns given")
        index_returns = np.ascontiguousarray(index_returns, dtype=float)
    else:
        index_returns = None
    regressor = _select_regressor(regressors, spec, n)
    names = spec.param_names()

    # mean (not total) log-likelihood keeps finite-difference noise well
    # below the convergence thresholds
    def negll(theta):
        out = _loglik_terms(
            _natural(theta, names), names, spec, returns, index_returns, regressor, spec.nu
        )
        if out is None:
            return 1e6
        return -out.log_likelihood / n

    def grad_norm_at(theta):
        k = theta.shape[0]
        g = np.empty(k)
        for j in range(k):
            h = 1e-6 * max(1.0, abs(theta[j]))
            up, dn = theta.copy(), theta.copy()
            up[j] += h
            dn[j] -= h
            g[j] = (negll(up) - negll(dn)) / (2.0 * h)
        return float(np.linalg.norm(g))

    best = None
    failures = []
    for start_idx, start_values in enumerate(_start_grid(returns, index_returns, spec, n_starts)):
        theta0 = _pack(start_values, names)
        try:
            res = optimize.minimize(negll, theta0, method="BFGS",
                                    options={"gtol": 1e-9, "maxiter": 500})
            # simplex + quasi-Newton polish: catches premature BFGS stops
            res_nm = optimize.minimize(negll, res.x, method="Nelder-Mead",
                                       options={"xatol": 1e-10, "fatol": 1e-13,
                                                "maxiter": 4000})
            res2 = optimize.minimize(negll, res_nm.x, method="BFGS",
                                     options={"gtol": 1e-9, "maxiter": 200})
            if res2.fun > res_nm.fun:
                res2 = res_nm
            if res2.fun <= res.fun:
                res = res2
        except (ValueError, ArithmeticError) as exc:
            failures.append(f"start {start_idx}: {exc}")
            continue
        if not np.isfinite(res.fun) or res.fun >= 1e5:
            failures.append(f"start {start_idx}: objective not finite")
            continue
        candidate = (res.fun, start_idx, res)
        if best is None or candidate[:2] < best[:2]:
            best = candidate
    if best is None:
        raise EstimationError("all optimizer starts failed", {"failures": failures})

    fun, start_idx, res = best
    theta_hat = res.x
    grad_norm = grad_norm_at(theta_hat)
    natural_hat = _natural(theta_hat, names)
    params_hat = _params_from_natural(natural_hat, names, spec.nu)
    out = egarch_filter(
        returns,
        params_hat,
        regressor=regressor,
        index_returns=index_returns,
        dummy_in_mean=spec.dummy_location == "mean",
    )
    converged = grad_norm < 1e-6
    beta_idx = names.index("beta")
    boundary = abs(theta_hat[beta_idx]) > 7.0

    se = robust_se(
        natural_hat, names, spec, returns, index_returns, regressor
    )
    t_values = natural_hat / se
    dof = n - len(names)
    p_values = 2.0 * student_t.sf(np.abs(t_values), dof)
    ic = information_criteria(out.log_likelihood, len(names), n)

    return FitResult(
        spec=spec,
        params=params_hat,
        param_names=names,
        estimates=natural_hat,
        robust_se=se,
        t_values=t_values,
        p_values=p_values,
        log_likelihood=out.log_likelihood,
        n_obs=n,
        ic=ic,
        sigma_path=out.path.sigma,
        std_residuals=out.path.z,
        converged=converged,
        iterations=int(getattr(res, "nit", 0)),
        gradient_norm=grad_norm,
        beta_boundary_warning=boundary,
        initial_log_var=out.initial_log_var,
    )


def _per_obs_loglik(values, names, spec, returns, index_returns, regressor):
    out = _loglik_terms(values, names, spec, returns, index_returns, regressor, spec.nu)
    if out is None:
        raise EstimationError("log-likelihood not finite during differentiation")
    return out.loglik_terms


def robust_se(
    estimates,
    names,
    spec: ModelSpec,
    returns,
    index_returns,
    regressor,
) -> np.ndarray:
    """Sandwich standard errors at the estimate, in natural parameter space.

    H is the central-difference Hessian of the mean per-observation
    log-likelihood; S the mean outer product of per-observation scores.
    Steps are cbrt(eps) * max(1, |theta_k|).
    """
    theta = np.asarray(estimates, dtype=float)
    k = theta.shape[0]
    n = len(returns)
    h = np.cbrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(theta))

    def ll_obs(values):
        return _per_obs_loglik(values, names, spec, returns, index_returns, regressor)

    # Near-unstable fits can diverge under the default step in some
    # directions; shrink the offending coordinate's step until both
    # one-sided evaluations stay finite.
    for j in range(k):
        for _ in range(4):
            up, dn = theta.copy(), theta.copy()
            up[j] += h[j]
            dn[j] -= h[j]
            try:
                ll_obs(up)
                ll_obs(dn)
                break
            except EstimationError:
                h[j] /= 10.0
        else:
            raise EstimationError(
                "log-likelihood not finite during differentiation"
            )

    # per-observation scores, central differences
    scores = np.empty((n, k))
    for j in range(k):
        up, dn = theta.copy(), theta.copy()
        up[j] += h[j]
        dn[j] -= h[j]
        scores[:, j] = (ll_obs(up) - ll_obs(dn)) / (2.0 * h[j])
    S = scores.T @ scores / n

    # Hessian of the mean log-likelihood, central differences
    def mean_ll(values):
        return float(np.mean(ll_obs(values)))

    H = np.empty((k, k))
    f0 = mean_ll(theta)
    for j in range(k):
        for m in range(j, k):
            if j == m:
                up, dn = theta.copy(), theta.copy()
                up[j] += h[j]
                dn[j] -= h[j]
                H[j, j] = (mean_ll(up) - 2.0 * f0 + mean_ll(dn)) / h[j] ** 2
            else:
                pp, pm, mp, mm = theta.copy(), theta.copy(), theta.copy(), theta.copy()
                pp[[j, m]] += [h[j], h[m]]
                pm[j] += h[j]
                pm[m] -= h[m]
                mp[j] -= h[j]
                mp[m] += h[m]
                mm[[j, m]] -= [h[j], h[m]]
                H[j, m] = H[m, j] = (
                    mean_ll(pp) - mean_ll(pm) - mean_ll(mp) + mean_ll(mm)
                ) / (4.0 * h[j] * h[m])

    try:
        H_inv = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        raise EstimationError(
            "Hessian not invertible; parameter at boundary or not identified"
        ) from None
    cov = H_inv @ S @ H_inv / n
    diag = np.diag(cov)
    if np.any(diag <= 0):
        raise EstimationError("sandwich covariance has non-positive diagonal")
    return np.sqrt(diag)


def test_hypotheses(result: FitResult) -> list[HypothesisOutcome]:
    """Two-sided t-tests of the event coefficients against zero."""
    outcomes = []
    mapping = [("delta_event_mean", "H1_mean"), ("delta_event_var", "H2_variance")]
    for coef_name, hyp_name in mapping:
        if coef_name not in result.param_names:
            continue
        i = result.param_names.index(coef_name)
        p = float(result.p_values[i])
        reject = tuple(a for a in SIGNIFICANCE_LEVELS if p < a)
        outcomes.append(
            HypothesisOutcome(
                name=hyp_name,
                coefficient=float(result.estimates[i]),
                p_value=p,
                reject_at=reject,
            )
        )
    if not outcomes:
        raise EstimationError("no event coefficient in the fitted spec")
    return outcomes
