from datetime import date, timedelta

import numpy as np
import pytest

from forkvol import EventRegressors, ParameterSet, simulate


def day_axis(n, start=date(2015, 1, 1)):
    return tuple(start + timedelta(days=i) for i in range(n))


@pytest.fixture
def recovery_truth():
    return ParameterSet(
        mu=0.001, omega=-0.15, alpha=0.05, gamma=0.2, beta=0.97,
        delta_event_var=0.2, nu=5.0,
    )


def event_pattern(n, every=50):
    return (np.arange(n) % every == 0).astype(float)


def regressors_for(n, every=50, start=date(2015, 1, 1)):
    d = event_pattern(n, every)
    return EventRegressors(dates=day_axis(n, start), dummy=d, count=d)


@pytest.fixture
def simulated_panel(recovery_truth):
    n = 2000
    d = event_pattern(n)
    sim = simulate(recovery_truth, n, seed=7, regressor=d)
    return sim, regressors_for(n)
