import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ehduty.errors import ConfigError, DomainError
from ehduty.model import (
    AreaSpec,
    DutyCycleConfig,
    Report,
    best_information,
    deploy_uniform,
    event_information,
    positions_array,
    sensing_power,
)

dist = st.floats(0, 50, allow_nan=False)


@pytest.mark.parametrize(
    "d, eta, expected",
    [(0, 1, 1.0), (2, 1, math.exp(-2)), (4, 1, 0.0183156)],
)
def test_sensing_power_values(d, eta, expected):
    assert sensing_power(d, eta) == pytest.approx(expected, rel=1e-5)


def test_dmax_threshold_rounds_to_published_value():
    assert round(sensing_power(4, 1), 3) == 0.018


@pytest.mark.parametrize(
    "d, eta, psi, expected",
    [(0, 1, 1, 1.0), (2, 1, 1, math.exp(-2)), (1, 1, 2, 2 * math.exp(-1))],
)
def test_event_information_values(d, eta, psi, expected):
    assert event_information(d, eta, psi) == pytest.approx(expected, rel=1e-12)


def test_bad_domain_rejected():
    with pytest.raises(DomainError):
        sensing_power(-1, 1)
    with pytest.raises(DomainError):
        sensing_power(1, 0)
    with pytest.raises(DomainError):
        event_information(1, 1, 0)


@given(dist, dist)
def test_sensing_power_monotone(d1, d2):
    lo, hi = sorted((d1, d2))
    assert sensing_power(hi, 1.0) <= sensing_power(lo, 1.0)


@given(dist, dist, st.floats(0.01, 5))
def test_sensing_power_multiplicative(d1, d2, eta):
    assert sensing_power(d1 + d2, eta) == pytest.approx(sensing_power(d1, eta) * sensing_power(d2, eta), rel=1e-9, abs=1e-300)


def test_best_information_examples():
    assert best_information([]) == 0
    assert best_information([0.3]) == 0.3
    assert best_information([0.1, 0.5, 0.2]) == 0.5
    assert best_information([Report(0, 0, 0.4), Report(1, 0, 0.7)]) == 0.7


infos = st.lists(st.floats(0, 1, allow_nan=False), max_size=20)


@given(infos, infos)
def test_best_information_set_properties(a, b):
    assert best_information(a) == best_information(list(reversed(a)))
    assert best_information(a + a) == best_information(a)
    assert best_information(a + b) >= max(best_information(a), best_information(b))
    assert best_information(a + b) == max(best_information(a), best_information(b))


def test_deploy_reproducible():
    area = AreaSpec(20, 20)
    a = deploy_uniform(10, area, np.random.default_rng(7))
    b = deploy_uniform(10, area, np.random.default_rng(7))
    assert a == b


def test_deploy_bounds_and_full_battery():
    area = AreaSpec(20, 20)
    devices = deploy_uniform(250, area, np.random.default_rng(1), e_max=100)
    assert all(area.contains(d.position) for d in devices)
    assert all(d.battery == 100 for d in devices)
    assert [d.id for d in devices] == list(range(250))


def test_deploy_mean_within_three_sigma():
    n = 10_000
    xs = positions_array(deploy_uniform(n, AreaSpec(20, 20), np.random.default_rng(3)))[:, 0]
    sigma = 20 / math.sqrt(12) / math.sqrt(n)
    assert abs(xs.mean() - 10) < 3 * sigma


def test_duty_cycle_validation_and_window():
    with pytest.raises(ConfigError):
        DutyCycleConfig(3, 2)
    with pytest.raises(ConfigError):
        DutyCycleConfig(1, 4, offset=4)
    duty = DutyCycleConfig(2, 4, offset=1)
    assert [duty.is_on(t) for t in range(8)] == [False, True, True, False] * 2
