import numpy as np
import pytest
from scipy.special import expit

from tmle2.tsm.models import TsmData, TsmState, outcome_model, treatment_model


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def make_tsm_data(n=300, seed=7, w_values=None):
    """Synthetic (W, A, Y) draws from the study DGP, optionally discrete-W."""
    r = np.random.default_rng(seed)
    if w_values is None:
        w = r.uniform(-1.0, 1.0, n)
    else:
        w = r.choice(np.asarray(w_values, dtype=float), size=n)
    a = (r.random(n) < expit(2 * w - w**2)).astype(float)
    y = (r.random(n) < expit(w + a / 2)).astype(float)
    return TsmData(w=w, a=a, y=y)


def make_state(data, g_fn, q_fn):
    return TsmState(qw=data.w, gbar=treatment_model(g_fn), qbar=outcome_model(q_fn))


@pytest.fixture
def tsm_toy():
    """Discrete-W test bed with distinct state and HAL models."""
    data = make_tsm_data(n=320, seed=11, w_values=[-0.8, -0.3, 0.1, 0.5, 0.9])
    state = make_state(
        data,
        lambda w: expit(2 * w - w**2 + 0.3),
        lambda w, a: expit(w + np.asarray(a, float) / 2 + 0.2 - 0.3 * np.asarray(a, float) * w),
    )
    hal = make_state(
        data,
        lambda w: expit(2 * w - w**2 - 0.1),
        lambda w, a: expit(w + np.asarray(a, float) / 2 + 0.1 * w),
    )
    return data, state, hal
