import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qpufsim import PreconditionError
from qpufsim import bounds

# reference values below were evaluated with mpmath at 40 digits and frozen


def test_lemma1_values():
    assert bounds.lemma1_lower(0) == pytest.approx(0.59471526543064891, abs=1e-15)
    assert bounds.lemma1_lower(1e12) == pytest.approx(1, abs=1e-12)
    with pytest.raises(PreconditionError):
        bounds.lemma1_lower(-0.1)


def test_lemma2_values():
    assert bounds.lemma2_upper(2) == pytest.approx(0.20264236728467554, abs=1e-15)
    assert bounds.lemma2_upper(1e12) == pytest.approx(0, abs=1e-12)
    for c in (1, 0.5):
        with pytest.raises(PreconditionError):
            bounds.lemma2_upper(c)


def test_lemma1_series_at_b_one_and_a_half():
    xs = np.linspace(-6.5, 6.5, 2001)
    assert np.min(bounds.sinc_window_sum(xs, 8)) >= 0.89867881635766223
    assert bounds.lemma1_lower(1.5) == pytest.approx(0.89867881635766223, abs=1e-15)


def test_lemma2_series_at_c_three():
    side = np.linspace(11, 61, 2001)
    assert np.max(bounds.sinc_window_sum(np.concatenate([side, -side]), 8)) < 0.10132118364233777


@pytest.mark.parametrize("delta,f,v", [
    (2, 0.77334455518495735, 0.27448855857074009),
    (4, 0.86573825432122104, 0.40142685109807203),
    (5, 0.88424020427242117, 0.4352899705991494),
    (8, 0.91374367544355279, 0.49886778344776263),
    (16, 0.94248339187563049, 0.57786420012720533),
    (32, 0.96086534705212716, 0.64348504560383495),
])
def test_f_delta_and_verification_bound(delta, f, v):
    assert bounds.f_delta(delta) == pytest.approx(f, abs=1e-14)
    assert bounds.verification_lower_bound(delta) == pytest.approx(v, abs=1e-14)


def test_published_bound_values():
    assert abs(bounds.f_delta(2) - 0.77334) <= 1e-4
    assert abs(bounds.f_delta(4) - 0.86573) <= 1e-4
    assert abs(bounds.verification_lower_bound(2) - 0.27448) <= 1e-4
    assert abs(bounds.verification_lower_bound(4) - 0.40141) <= 1e-4


def test_f_delta_limits_and_errors():
    assert bounds.f_delta(10**12) == pytest.approx(1, abs=1e-5)
    for bad in (0, 1):
        with pytest.raises(PreconditionError):
            bounds.f_delta(bad)


def test_verification_bound_monotone():
    vals = [bounds.verification_lower_bound(x) for x in range(2, 2**10 + 1)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_ideal_forgery_bound():
    assert bounds.ideal_forgery_bound(2, 0) == 0.5
    assert bounds.ideal_forgery_bound(16, 4) == pytest.approx(1 / 12)
    assert bounds.ideal_forgery_bound(1024, 10) == pytest.approx(0.00098619329388560158, rel=1e-12)
    with pytest.raises(PreconditionError):
        bounds.ideal_forgery_bound(4, 4)


def test_pe_forgery_bound_values():
    # (1 - 2/pi^2) * (1 / (128/12)) + 2/pi^2
    expr = (1 - 2 / math.pi**2) * (12 / 128) + 2 / math.pi**2
    assert bounds.pe_forgery_bound(128, 4, 0) == pytest.approx(expr, abs=1e-15)
    assert bounds.pe_forgery_bound(128, 4, 0) == pytest.approx(0.27739464535173721, abs=1e-15)
    assert bounds.pe_forgery_bound(128, 4, 2) == pytest.approx(0.29464517105952067, abs=1e-15)
    assert bounds.pe_forgery_bound(4096, 64, 10) == pytest.approx(0.094195363743666928, abs=1e-15)
    assert bounds.pe_forgery_bound(4096, 64, 0) < 0.06


def test_pe_forgery_bound_limit():
    # as delta grows with d/delta fixed, the additive term vanishes
    delta = 2**20
    assert bounds.pe_forgery_bound(48 * delta, delta, 2) == pytest.approx(1 / (16 - 2), rel=1e-5)


def test_pe_forgery_bound_preconditions():
    with pytest.raises(PreconditionError, match="delta >= 4"):
        bounds.pe_forgery_bound(128, 2, 0)
    with pytest.raises(PreconditionError, match=r"d/\(3 delta\)"):
        bounds.pe_forgery_bound(128, 8, 6)


def test_pe_forgery_bound_decreases_in_d():
    vals = [bounds.pe_forgery_bound(2**k, 8, 2) for k in range(7, 21)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("delta", [4, 8, 16])
@pytest.mark.parametrize("b_kind", ["one", "sqrt", "half"])
def test_lemma1_grid(delta, b_kind):
    b = {"one": 1.0, "sqrt": math.sqrt(delta), "half": delta / 2}[b_kind]
    assert bounds.lemma1_margin(delta, b) >= -1e-12


@pytest.mark.parametrize("delta", [4, 8, 16])
@pytest.mark.parametrize("c", [2, 3, 5])
def test_lemma2_grid(delta, c):
    assert bounds.lemma2_margin(delta, c) > -1e-12


@given(st.floats(-40, 40), st.integers(1, 20))
def test_window_sum_matches_complement_of_tail(x, delta):
    # the in-window sum plus the two tails is 1; truncating the tails at 10^4
    # terms leaves less than the integral estimate 2/(pi^2 (N - |x| - 1/2))
    n = 10_000
    k = np.concatenate([np.arange(-n, -delta), np.arange(delta + 1, n + 1)])
    tail = np.sum(np.sinc(x - k) ** 2)
    rest = 2 / (math.pi**2 * (n - abs(x) - 0.5))
    inside = float(bounds.sinc_window_sum(x, delta))
    assert -1e-12 <= 1 - inside - tail <= rest + 1e-12


def test_bound_table():
    rows = bounds.bound_table([2, 4], d_values=[128], dims=[16], q_size=0)
    names = [r.name for r in rows]
    assert names.count("pe_forgery_bound") == 2
    bad = [r for r in rows if not r.validity_preconditions_met]
    assert len(bad) == 1 and math.isnan(bad[0].value)
    assert rows[0].csv_row()[0] == "f_delta"
