"""Event-impact analysis of volatility with EGARCH(1,1)-t models.

Pipeline: daily close prices -> returns -> descriptive statistics, event
regressors, QMLE fits of EGARCH models with event terms in the mean or
log-variance equation, robust (sandwich) inference, information-criterion
model choice, and Welch group comparisons of event-day volatility.
"""

from .egarch import (
    ModelSpec,
    ParameterSet,
    VolatilityPath,
    egarch_filter,
    expected_abs_z,
    simulate,
    std_t_log_density,
)
from .estimation import (
    FitResult,
    HypothesisOutcome,
    fit,
    information_criteria,
    test_hypotheses,
)
from .events import (
    ClusterLabel,
    EventRecord,
    EventRegressors,
    build_regressors,
    bundled_calendar,
    classify_clusters,
    filter_hard,
    read_events,
)
from .grouptests import WelchResult, delayed_effect_suite, multiplicity_suite, welch_test
from .ingestion import Panel, PricePoint, align, fetch_prices, read_prices, write_prices
from .timeseries import DescriptiveStats, ReturnSeries, describe, jarque_bera, to_returns

__version__ = "0.1.0"

__all__ = [
    "ModelSpec", "ParameterSet", "VolatilityPath", "egarch_filter",
    "expected_abs_z", "simulate", "std_t_log_density",
    "FitResult", "HypothesisOutcome", "fit", "information_criteria",
    "test_hypotheses",
    "ClusterLabel", "EventRecord", "EventRegressors", "build_regressors",
    "bundled_calendar", "classify_clusters", "filter_hard", "read_events",
    "WelchResult", "delayed_effect_suite", "multiplicity_suite", "welch_test",
    "Panel", "PricePoint", "align", "fetch_prices", "read_prices", "write_prices",
    "DescriptiveStats", "ReturnSeries", "describe", "jarque_bera", "to_returns",
]
