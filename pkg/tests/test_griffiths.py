import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnumlab.griffiths import (
    MeasureEntry,
    MeasureSequence,
    OverflowGuardError,
    coin_sequence,
    concentration_check,
    one_sided_derivatives,
    point_mass_sequence,
    rate_function,
    rate_function_csv,
    tail_table_csv,
    two_point_sequence,
)

Y = np.linspace(-1.0, 1.0, 41)
NS = list(range(20, 201, 20))


def test_measure_validation():
    with pytest.raises(ValueError):
        MeasureEntry(3, [0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        MeasureEntry(3, [0.0, 1.0], [-0.5, 1.5])
    e = MeasureEntry(2, [0.0], [1.0])
    with pytest.raises(ValueError):
        MeasureSequence((e, e))


def test_json_round_trip():
    seq = coin_sequence([4, 8])
    doc = json.dumps(seq.to_json())
    back = MeasureSequence.from_json(doc)
    assert np.allclose(back.entries[1].masses, seq.entries[1].masses)


def test_fair_coins():
    est = rate_function(coin_sequence(NS), Y)
    assert np.max(np.abs(est.f - np.log(np.cosh(Y)))) < 1e-12
    assert all(est.convex)
    d = one_sided_derivatives(est)
    assert abs(d.a_minus) < 1e-6 and abs(d.a_plus) < 1e-6
    assert d.monotone


@pytest.mark.parametrize("bias", [-0.7, 0.3, 1.2])
def test_tilted_coins(bias):
    est = rate_function(coin_sequence(NS, bias), Y)
    exact = np.log(np.cosh(Y + bias) / np.cosh(bias))
    assert np.max(np.abs(est.f - exact)) < 1e-10
    d = one_sided_derivatives(est)
    assert d.a_minus == pytest.approx(math.tanh(bias), abs=1e-4)
    assert d.a_plus == pytest.approx(math.tanh(bias), abs=1e-4)


def test_point_mass():
    est = rate_function(point_mass_sequence([5, 10, 20], 0.3), Y)
    assert np.allclose(est.f, 0.3 * Y)
    d = one_sided_derivatives(est)
    assert d.a_minus == pytest.approx(0.3, abs=1e-12)
    assert d.a_plus == pytest.approx(0.3, abs=1e-12)
    rep = concentration_check(point_mass_sequence([5, 10, 20], 0.3), 0.3, 0.3, 0.05)
    assert np.all(rep.tails == 0) and rep.c_fit == 0.0 and rep.decaying


def test_two_point():
    seq = two_point_sequence(list(range(10, 51, 10)))
    est = rate_function(seq, Y)
    d = one_sided_derivatives(est)
    assert d.a_minus == pytest.approx(-1.0, abs=1e-3)
    assert d.a_plus == pytest.approx(1.0, abs=1e-3)
    assert np.max(np.abs(est.f - np.abs(Y))[np.abs(Y) >= 0.2]) < 1e-3


def test_coin_concentration():
    rep = concentration_check(coin_sequence(NS), 0.0, 0.0, 0.1)
    assert rep.slope < 0
    assert rep.c_fit <= math.exp(-0.005)
    # Hoeffding: P(|S_n| > eps n) <= 2 exp(-n eps^2 / 2)
    assert np.all(rep.tails <= 2 * np.exp(-rep.ns * 0.01 / 2))


def test_overflow_guard():
    e = MeasureEntry(1, [1e308, -1e308], [0.5, 0.5])
    with pytest.raises(OverflowGuardError):
        e.log_mgf([10.0])


def test_bad_inputs():
    with pytest.raises(ValueError):
        rate_function(coin_sequence([10]), np.array([0.0, 0.5]))
    est = rate_function(coin_sequence([10, 20]), Y)
    with pytest.raises(ValueError):
        one_sided_derivatives(est, (0.1, 0.2))


def test_csv_exports():
    seq = coin_sequence([10, 20])
    est = rate_function(seq, np.linspace(-0.5, 0.5, 5))
    lines = rate_function_csv(est).splitlines()
    assert lines[0] == "y,f_10,f_20,f_extrapolated"
    assert len(lines) == 6
    tails = tail_table_csv(concentration_check(seq, 0, 0, 0.1)).splitlines()
    assert tails[0] == "n,tail,epsilon"


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6),
       st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6),
       st.integers(1, 50))
def test_random_measures_convex_and_normalized(points, raw, n):
    k = min(len(points), len(raw))
    masses = np.array(raw[:k]) / np.sum(raw[:k])
    masses[-1] = 1.0 - masses[:-1].sum()
    seq = MeasureSequence((MeasureEntry(n, np.array(points[:k]) * n, masses),))
    est = rate_function(seq, Y)
    assert est.convex[0]
    assert est.f_n[0][len(Y) // 2] == pytest.approx(0.0, abs=1e-12)
    d = one_sided_derivatives(est)
    qm, qp = np.array(d.quotients_minus), np.array(d.quotients_plus)
    assert np.all(qm <= qp + 1e-9)
    assert d.a_minus <= d.a_plus
