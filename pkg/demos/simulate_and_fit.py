"""Simulate an EGARCH(1,1)-t series with an event effect in the variance
equation, then recover the parameters by QMLE and test the event hypothesis.

Run:  python3 demos/simulate_and_fit.py
"""
import numpy as np

from forkvol import ModelSpec, ParameterSet, fit, simulate
from forkvol.estimation import test_hypotheses

truth = ParameterSet(
    mu=0.001, omega=-0.15, alpha=0.05, gamma=0.2, beta=0.97,
    delta_event_var=0.2, nu=5.0,
)

T = 5000
event_days = (np.arange(T) % 50 == 25).astype(float)
sim = simulate(truth, T, seed=0, regressor=event_days)
print(f"simulated {T} observations, {int(event_days.sum())} event days")
print(f"conditional sigma range: {sim.path.sigma.min():.4f} .. "
      f"{sim.path.sigma.max():.4f}")

spec = ModelSpec(include_index=False, dummy_location="variance", nu=5.0)
result = fit(sim.returns, regressors=event_days, spec=spec)

print()
print(result.to_table())
print()
true_map = {"mu": truth.mu, "omega": truth.omega, "alpha": truth.alpha,
            "gamma": truth.gamma, "beta": truth.beta,
            "delta_event_var": truth.delta_event_var}
for name, est, se in zip(result.param_names, result.estimates, result.robust_se):
    dev = (est - true_map[name]) / se
    print(f"{name:>18}: estimate {est:+.5f}  truth {true_map[name]:+.5f}  "
          f"({dev:+.2f} robust SE)")

print()
for outcome in test_hypotheses(result):
    levels = ", ".join(f"{a:.2f}" for a in outcome.reject_at) or "none"
    print(f"{outcome.name}: coefficient {outcome.coefficient:+.4f}, "
          f"p = {outcome.p_value:.4f}, rejects at: {levels}")
