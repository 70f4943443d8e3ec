"""Walk through the bundled fork calendar: build event regressors on a date
axis, classify same-day clusters, and run the Welch group comparisons on a
simple absolute-return volatility proxy.

Run:  python3 demos/event_calendar_walkthrough.py
"""
from datetime import date, timedelta

import numpy as np

from forkvol import (
    ParameterSet,
    bundled_calendar,
    build_regressors,
    classify_clusters,
    filter_hard,
    simulate,
)
from forkvol.grouptests import delayed_effect_suite, multiplicity_suite

calendar = bundled_calendar("all")
hard = filter_hard(calendar)
print(f"bundled calendar: {len(calendar)} fork events, {len(hard)} hard forks")

# a daily axis spanning the calendar
start, end = calendar[0].date, calendar[-1].date
dates = tuple(start + timedelta(days=i) for i in range((end - start).days + 1))

regs = build_regressors(calendar, dates)
print(f"event days on the axis: {int(regs.dummy.sum())} "
      f"(max same-day count {int(regs.count.max())})")

clusters = classify_clusters(calendar, window_days=3)
followed = sum(c.is_followed for c in clusters)
print(f"{len(clusters)} dated events; {followed} followed by another fork "
      f"within 3 days")

# synthetic volatility proxy so the demo needs no market data:
# |returns| from a seeded EGARCH simulation on the same axis
truth = ParameterSet(mu=0.0, omega=-0.2, alpha=0.1, gamma=0.15, beta=0.95,
                     delta_event_var=0.15, nu=5.0)
sim = simulate(truth, len(dates), seed=9, regressor=regs.dummy)
vol_by_date = {d: abs(r) for d, r in zip(dates, sim.returns)}

print("\nsame-day multiplicity comparisons (Welch):")
for name, res in multiplicity_suite(vol_by_date, clusters).items():
    if res is None:
        print(f"  {name}: not enough observations")
    else:
        print(f"  {name}: diff {res.difference:+.5f}, t = {res.t_value:+.3f}, "
              f"df = {res.df:.1f}, p = {res.p_value:.3f}")

print("\ndelayed-effect profile (events with a subsequent fork):")
for row in delayed_effect_suite(vol_by_date, clusters, horizon=3)["subsequent"]:
    t = "--" if row.t_value is None else f"{row.t_value:+.3f}"
    print(f"  lag {row.lag}: avg vol {row.avg_vol:.5f} (n={row.n}, t vs day 0: {t})")
