from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paraudit import ledger as lg
from paraudit.errors import ParameterError

fractions = st.fractions(min_value=-20, max_value=20, max_denominator=24)
exponents = st.builds(lg.AffineExponent, fractions, fractions)


def test_as_fraction_forms():
    assert lg.as_fraction("5/8") == F(5, 8)
    assert lg.as_fraction("0.625") == F(5, 8)
    assert lg.as_fraction(0.625) == F(5, 8)
    assert lg.as_fraction(3) == F(3)
    assert lg.as_fraction(F(1, 3)) == F(1, 3)
    # decimal input is snapped with a bounded denominator
    assert lg.as_fraction("0.3333333333") == F(1, 3)


@pytest.mark.parametrize("bad", ["x", "1/0", "", "5//8"])
def test_as_fraction_rejects(bad):
    with pytest.raises(ParameterError):
        lg.as_fraction(bad)


@given(exponents, exponents, fractions)
def test_affine_is_linear(e1, e2, d):
    assert (e1 + e2)(d) == e1(d) + e2(d)
    assert (e1 - e2)(d) == e1(d) - e2(d)
    assert (-e1)(d) == -e1(d)
    assert e1.scale(3)(d) == 3 * e1(d)
    assert (2 * e1) == e1.scale(2)


@given(exponents)
def test_affine_json_and_str(e):
    j = e.to_json()
    assert lg.AffineExponent(F(j["a"]), F(j["b"])) == e
    assert "delta" in str(e) or e.b == 0


def test_balance_totals():
    t = lg.balance_table()
    assert t.total == lg.AffineExponent(-3, F(7, 4))
    assert t.minimal_total == lg.AffineExponent(-3, 2)
    assert len(t.rows) == 5


def test_unfolded_row():
    assert lg.affine_sum(*lg.unfolded_plus_row()) == lg.AffineExponent(1, -2)
    assert lg.affine_sum(*lg.unfolded_plus_row()) == lg.balance_table().rows[3].exponent


def test_sharp_and_counting_values():
    rows = {r.name: r.exponent for r in lg.sharp_rows()}
    d = F(5, 8)
    assert rows["phase IBP, full degree"](d) == F(-11, 16)
    assert rows["counting-decoupling sum"](d) == F(-9, 16)
    assert lg.amplitude_combination() == lg.AffineExponent(F(-25, 4), 9)
    assert lg.amplitude_combination()(d) == F(-5, 8)
    counts = {r.name: r.exponent for r in lg.counting_rows()}
    assert counts["l2 cost"] + lg.DECOUPLING_GAIN == counts["net after decoupling gain"]


def test_epsilon_series_and_threshold():
    assert lg.EPSILON_SERIES(F(1, 6)) == F(-49, 12)
    assert lg.EPSILON_SERIES(F(5, 8)) == F(-47, 16)
    th = lg.threshold(lg.ENDPOINT_ON_WINDOW, lg.ENDPOINT_TARGET)
    assert th.delta == F(5, 9)
    assert th.below == "<" and th.above == ">"
    assert lg.gap(lg.ENDPOINT_ON_WINDOW, lg.ENDPOINT_TARGET, F(5, 8)) == F(5, 32)


def test_threshold_parallel_and_identical():
    e = lg.AffineExponent(1, 2)
    assert lg.threshold(e, e).identical
    r = lg.threshold(e, lg.AffineExponent(3, 2))
    assert r.delta is None and not r.identical and r.below == "<"


def test_clamped_count():
    micro = [r for r in lg.counting_rows() if r.note][0]
    assert lg.clamped_count(micro.exponent, 1024, F(1, 4)) == (1.0, True)
    value, clamped = lg.clamped_count(micro.exponent, 1024, F(5, 8))
    assert not clamped and value == pytest.approx(1024**0.125)


def test_ledger_row_needs_source():
    with pytest.raises(ParameterError):
        lg.LedgerRow("x", lg.const(0), "")


def test_domain():
    dom = lg.DEFAULT_DOMAIN
    assert F(1, 6) not in dom and F(5, 8) in dom and F(1, 2) in dom
    with pytest.raises(ParameterError):
        lg.DeltaDomain(F(1, 2), F(1, 3))


def _scan_negative(e: lg.AffineExponent, dom: lg.DeltaDomain, qmax: int) -> bool:
    """Exact sign of a + b p/q over every rational p/q in (lo, hi] with q <= qmax."""
    A, Da = e.a.numerator, e.a.denominator
    B, Db = e.b.numerator, e.b.denominator
    for q in range(1, qmax + 1):
        p_lo = (dom.lo.numerator * q) // dom.lo.denominator + 1
        p_hi = (dom.hi.numerator * q) // dom.hi.denominator
        if p_hi < p_lo:
            continue
        p = np.arange(p_lo, p_hi + 1, dtype=np.int64)
        if np.any(A * Db * q + B * Da * p >= 0):
            return False
    return True


@settings(max_examples=60, deadline=None)
@given(st.fractions(-3, 3, max_denominator=12), st.fractions(-6, 6, max_denominator=12))
def test_negativity_matches_rational_scan(a, b):
    e = lg.AffineExponent(a, b)
    res = lg.negativity_interval(e)
    assert res.always_negative == _scan_negative(e, lg.DEFAULT_DOMAIN, 1000)
    if not res.always_negative:
        assert res.witness in lg.DEFAULT_DOMAIN
        assert e(res.witness) >= 0


def test_negativity_known_cases():
    assert lg.negativity_interval(lg.balance_table().total).always_negative
    assert lg.negativity_interval(lg.SCALING_PREDICTION).always_negative
    res = lg.negativity_interval(lg.amplitude_combination() + lg.const(1))
    assert not res.always_negative


def test_summable_targets():
    assert lg.summable(lg.GLOBAL_COMMUTATOR, F(5, 8), -1)
    assert not lg.summable(lg.GLOBAL_COMMUTATOR, F(2, 3), -1)
    assert lg.summable(lg.WEAK_MAX, F(1, 4), 0)


def test_branch_report_endpoint_and_epsilon():
    r = lg.branch_report("5/8")
    assert r["branch"] == "epsilon-loss"
    assert r["gap"] == "5/32"
    assert r["threshold"] == "5/9"
    assert r["in_domain"] and not r["warnings"]
    s = lg.branch_report(F(1, 2))
    assert s["branch"] == "endpoint"
    assert s["single_frequency_exponent"] == "-3/2"
    assert s["global_commutator"]["summable"]


def test_branch_report_out_of_range_warns():
    r = lg.branch_report(F(3, 4))
    assert not r["in_domain"]
    assert r["warnings"]
    with pytest.raises(ParameterError):
        lg.branch_report(F(1))


def test_micro_window_row_flagged_when_negative():
    r = lg.branch_report(F(1, 4))
    micro = [row for row in r["counting_rows"] if row.get("note")][0]
    assert micro["clamped"]
