from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aloha_packetization.errors import DomainError
from aloha_packetization.lambertw import BRANCH_POINT, TOL_DOMAIN, evaluate, exp_w0, lambert_w0


def fixed_point_w(x, iters=2000):
    # w = x * e^{-w} converges for x in (-1/e, 0] on the principal branch
    w = 0.0
    for _ in range(iters):
        w = x * math.exp(-w)
    return w


def test_examples():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(BRANCH_POINT) == pytest.approx(-1.0, abs=1e-12)
    assert lambert_w0(-0.2) == pytest.approx(fixed_point_w(-0.2), abs=1e-12)
    assert lambert_w0(-0.2) == pytest.approx(-0.259171101819, abs=1e-12)


def test_exp_examples():
    assert exp_w0(0.0) == 1.0
    assert exp_w0(BRANCH_POINT) == pytest.approx(1 / math.e, rel=1e-12)
    assert exp_w0(-0.2) == pytest.approx(0.771690974, abs=1e-9)


def test_round_trip_1000():
    rng = np.random.default_rng(1)
    x = rng.uniform(BRANCH_POINT, 0.0, 1000)
    w = lambert_w0(x)
    assert np.all(np.abs(w * np.exp(w) - x) <= 1e-12 * np.abs(x))


def test_consistency_with_ratio():
    x = -np.geomspace(1e-6, -BRANCH_POINT, 500)
    assert np.max(np.abs(exp_w0(x) - x / lambert_w0(x))) <= 1e-12


def test_monotone():
    x = np.linspace(BRANCH_POINT, 0.0, 5001)
    assert np.all(np.diff(lambert_w0(x)) > 0)


def test_positive_arguments():
    for x in (0.5, 1.0, math.e, 100.0):
        w = lambert_w0(x)
        assert w * math.exp(w) == pytest.approx(x, rel=1e-13)


def test_clamp_and_domain():
    assert lambert_w0(BRANCH_POINT - 0.5 * TOL_DOMAIN) == pytest.approx(-1.0, abs=1e-6)
    with pytest.raises(DomainError):
        lambert_w0(-0.5)
    with pytest.raises(DomainError):
        exp_w0(np.array([-0.1, -0.4]))


def test_batch_independence():
    x = np.linspace(BRANCH_POINT, 0.0, 257)
    full = lambert_w0(x)
    for i in (0, 3, 100, 256):
        assert lambert_w0(float(x[i])) == full[i]


def test_evaluate_record():
    e = evaluate(-0.2)
    assert e.w == pytest.approx(-0.259171101819)


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=BRANCH_POINT, max_value=0.0))
def test_round_trip_property(x):
    w = lambert_w0(x)
    assert -1.0 <= w <= 0.0
    assert abs(w * math.exp(w) - x) <= 1e-12 * max(abs(x), 1e-300)
