"""Price-to-return transforms and descriptive statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from datetime import date

import numpy as np

__all__ = ["ReturnSeries", "DescriptiveStats", "to_returns", "describe", "jarque_bera"]


@dataclass(frozen=True)
class ReturnSeries:
    dates: tuple[date, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.dates) != self.values.shape[0]:
            raise ValueError("dates/values length mismatch")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite return values")

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class DescriptiveStats:
    n: int
    mean: float
    std_dev: float
    min: float
    max: float
    skewness: float
    excess_kurtosis: float
    jarque_bera: float
    jb_p_value: float

    def to_dict(self) -> dict:
        return asdict(self)

    # row order mirrors the descriptive table of the pipeline's text report
    ROW_ORDER = (
        "n", "mean", "std_dev", "min", "max",
        "skewness", "excess_kurtosis", "jarque_bera", "jb_p_value",
    )


def to_returns(prices, dates=None, method: str = "log") -> ReturnSeries:
    """Daily returns from a positive price sequence; first date is dropped."""
    prices = np.asarray(prices, dtype=float)
    if prices.shape[0] < 2:
        raise ValueError("need at least 2 prices to form returns")
    if np.any(prices <= 0):
        raise ValueError("prices must be strictly positive")
    if method == "log":
        values = np.diff(np.log(prices))
    elif method == "simple":
        values = prices[1:] / prices[:-1] - 1.0
    else:
        raise ValueError(f"unknown return method {method!r}")
    if dates is None:
        dates = tuple(date.fromordinal(i + 1) for i in range(prices.shape[0]))
    return ReturnSeries(dates=tuple(dates)[1:], values=values)


def jarque_bera(skewness: float, excess_kurtosis: float, n: int) -> tuple[float, float]:
    """JB = n/6 * (S^2 + K_ex^2 / 4); p from chi-square(2), i.e. exp(-JB/2)."""
    if n < 4:
        raise ValueError(f"need n >= 4, got {n}")
    stat = n / 6.0 * (skewness**2 + excess_kurtosis**2 / 4.0)
    # chi2(2) survival function has the closed form exp(-x/2)
    p = math.exp(-stat / 2.0)
    return stat, p


def describe(series) -> DescriptiveStats:
    """Moment summary of a return series.

    Skewness and kurtosis use population moments (no bias correction);
    std_dev uses the n-1 denominator.
    """
    values = series.values if isinstance(series, ReturnSeries) else np.asarray(series, float)
    n = values.shape[0]
    if n < 4:
        raise ValueError(f"need at least 4 observations, got {n}")
    mean = float(np.mean(values))
    centered = values - mean
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        raise ValueError("zero-variance series")
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    skew = m3 / m2**1.5
    ex_kurt = m4 / m2**2 - 3.0
    jb, jb_p = jarque_bera(skew, ex_kurt, n)
    return DescriptiveStats(
        n=n,
        mean=mean,
        std_dev=float(np.std(values, ddof=1)),
        min=float(np.min(values)),
        max=float(np.max(values)),
        skewness=skew,
        excess_kurtosis=ex_kurt,
        jarque_bera=jb,
        jb_p_value=jb_p,
    )
