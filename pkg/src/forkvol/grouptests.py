"""Welch two-sample comparisons of event-day volatility.

Covers the same-day multiplicity suite (one vs two vs three vs multiple
forks per day) and the delayed-effect suite (event-day volatility vs the
1st/2nd/3rd following day, split by whether a subsequent fork occurs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np
from scipy.stats import t as student_t

__all__ = [
    "WelchResult",
    "welch_test",
    "multiplicity_suite",
    "delayed_effect_suite",
]


@dataclass(frozen=True)
class WelchResult:
    mean_1: float
    mean_2: float
    difference: float
    std_error_1: float
    std_error_2: float
    t_value: float
    df: float
    p_value: float
    n_1: int
    n_2: int

    def to_dict(self) -> dict:
        return {
            "mean_1": self.mean_1,
            "mean_2": self.mean_2,
            "difference": self.difference,
            "std_error_1": self.std_error_1,
            "std_error_2": self.std_error_2,
            "t_value": self.t_value,
            "df": self.df,
            "p_value": self.p_value,
            "n_1": self.n_1,
            "n_2": self.n_2,
        }


def welch_test(sample_1, sample_2) -> WelchResult:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom."""
    x = np.asarray(sample_1, dtype=float)
    y = np.asarray(sample_2, dtype=float)
    n1, n2 = x.shape[0], y.shape[0]
    if n1 < 2 or n2 < 2:
        raise ValueError(f"both samples need >= 2 observations, got {n1} and {n2}")
    m1, m2 = float(np.mean(x)), float(np.mean(y))
    v1, v2 = float(np.var(x, ddof=1)), float(np.var(y, ddof=1))
    se1, se2 = math.sqrt(v1 / n1), math.sqrt(v2 / n2)
    pooled = v1 / n1 + v2 / n2
    if pooled == 0.0:
        if m1 != m2:
            raise ValueError("zero variance in both samples with unequal means")
        # defined limit: identical constants compare equal
        return WelchResult(m1, m2, 0.0, 0.0, 0.0, 0.0, float(n1 + n2 - 2), 1.0, n1, n2)
    df = pooled**2 / (
        (v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1)
    )
    t = (m1 - m2) / math.sqrt(pooled)
    p = 2.0 * float(student_t.sf(abs(t), df))
    return WelchResult(m1, m2, m1 - m2, se1, se2, t, df, p, n1, n2)


def _vols_by_multiplicity(vol_by_date: dict, clusters) -> dict[int, list[float]]:
    groups: dict[int, list[float]] = {}
    for label in clusters:
        v = vol_by_date.get(label.event_date)
        if v is None:
            continue
        groups.setdefault(label.same_day_count, []).append(float(v))
    return groups


def multiplicity_suite(vol_by_date: dict, clusters) -> dict[str, WelchResult | None]:
    """The four same-day multiplicity comparisons.

    Keys: one_vs_two, one_vs_three, two_vs_three, one_vs_multiple. A
    comparison with an undersized group is reported as None; the others
    still run.
    """
    groups = _vols_by_multiplicity(vol_by_date, clusters)
    one = groups.get(1, [])
    two = groups.get(2, [])
    three = groups.get(3, [])
    multiple = [v for c, vs in groups.items() if c >= 2 for v in vs]

    comparisons = {
        "one_vs_two": (one, two),
        "one_vs_three": (one, three),
        "two_vs_three": (two, three),
        "one_vs_multiple": (one, multiple),
    }
    out: dict[str, WelchResult | None] = {}
    for name, (a, b) in comparisons.items():
        if len(a) < 2 or len(b) < 2:
            out[name] = None
            continue
        try:
            out[name] = welch_test(a, b)
        except ValueError:
            out[name] = None
    return out


@dataclass(frozen=True)
class DelayedEffectRow:
    lag: int
    avg_vol: float
    std_error: float
    t_value: float | None
    p_value: float | None
    n: int


def _lagged_vols(vol_by_date: dict, event_dates, lag: int) -> list[float]:
    vols = []
    for d in event_dates:
        v = vol_by_date.get(d + timedelta(days=lag))
        if v is not None:
            vols.append(float(v))
    return vols


def delayed_effect_suite(
    vol_by_date: dict, clusters, horizon: int = 3
) -> dict[str, list[DelayedEffectRow] | None]:
    """Event-day volatility vs each of the following ``horizon`` days.

    Events are split into the 'no_subsequent' and 'subsequent' branches by
    their cluster label; within each branch, lag-0 volatility is compared
    to lag-l volatility with a pooled two-sample Welch test. Row 0 carries
    the event-day average itself (no test).
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    branches = {
        "no_subsequent": [c.event_date for c in clusters if not c.is_followed],
        "subsequent": [c.event_date for c in clusters if c.is_followed],
    }
    out: dict[str, list[DelayedEffectRow] | None] = {}
    for name, event_dates in branches.items():
        base = _lagged_vols(vol_by_date, event_dates, 0)
        if len(base) < 2:
            out[name] = None
            continue
        rows = [
            DelayedEffectRow(
                lag=0,
                avg_vol=float(np.mean(base)),
                std_error=float(np.std(base, ddof=1) / math.sqrt(len(base))),
                t_value=None,
                p_value=None,
                n=len(base),
            )
        ]
        usable = True
        for lag in range(1, horizon + 1):
            lagged = _lagged_vols(vol_by_date, event_dates, lag)
            if len(lagged) < 2:
                usable = False
                break
            res = welch_test(base, lagged)
            rows.append(
                DelayedEffectRow(
                    lag=lag,
                    avg_vol=res.mean_2,
                    std_error=res.std_error_2,
                    t_value=res.t_value,
                    p_value=res.p_value,
                    n=len(lagged),
                )
            )
        out[name] = rows if usable else None
    return out
