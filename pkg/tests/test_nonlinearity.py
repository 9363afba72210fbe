import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xicont.nonlinearity import (
    NonlinearityError,
    make_fishing_family,
    make_linear,
    make_softplus_family,
    validate,
)
from xicont.spectral import WeightData


def weight(nu):
    return WeightData(np.ones(3), 1.0, 1.0, nu)


def softplus_ref(u):
    getcontext().prec = 50
    return float((Decimal(1) + Decimal(u).exp()).ln())


@pytest.mark.parametrize("u", [-700.0, -30.0, -1.0, 0.0, 0.5, 30.0, 700.0])
def test_softplus_values_against_high_precision(u):
    g = make_softplus_family(-1.0, 2.0)
    ref = -u + 3.0 * softplus_ref(u)
    assert float(g.g(u)) == pytest.approx(ref, rel=1e-14, abs=1e-300)


def test_softplus_no_overflow():
    g = make_softplus_family(-1.0, 2.0)
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        vals = g.g(np.array([-1e4, 1e4]))
        d2 = g.d2g(np.array([-1e4, 1e4]))
    assert np.all(np.isfinite(vals))
    assert np.all(d2 >= 0)


def test_softplus_asymptotic_slopes():
    g = make_softplus_family(-1.0, 2.0)
    assert g.dg(-60.0) == pytest.approx(-1.0)
    assert g.dg(60.0) == pytest.approx(2.0)
    assert g.convexity == "convex" and g.nu1 == 2.0
    h = make_softplus_family(2.0, -1.0)
    assert h.convexity == "concave" and h.nu1 == 2.0


def test_softplus_degenerate_rejected():
    with pytest.raises(NonlinearityError):
        make_softplus_family(1.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-40, 40), st.floats(-3, 3), st.floats(-3, 3))
def test_softplus_derivatives_consistent(u, g1, g2):
    if abs(g1 - g2) < 1e-3:
        return
    g = make_softplus_family(g1, g2)
    h = 1e-5
    assert float(g.dg(u)) == pytest.approx(float(g.g(u + h) - g.g(u - h)) / (2 * h), rel=1e-6, abs=1e-8)
    assert float(g.d2g(u)) == pytest.approx(float(g.dg(u + h) - g.dg(u - h)) / (2 * h), rel=1e-5, abs=1e-9)


def test_fishing_matches_logistic_and_is_smooth_at_zero():
    a, b, c = 1.3, 1.0, 2.4
    g = make_fishing_family(a, b, c)
    u = np.linspace(0, 3, 7)
    np.testing.assert_allclose(g.g(u), a * u - b * u**2)
    eps = 1e-7
    for fn in (g.g, g.dg, g.d2g):
        assert float(fn(-eps)) == pytest.approx(float(fn(eps)), abs=1e-6)
    tau = (c - a) / (2 * b)
    assert g.params["tau"] == pytest.approx(tau)
    # large negative u: g approaches c*u + d
    assert float(g.g(-200.0)) == pytest.approx(c * -200.0 + g.params["d"], rel=1e-12)
    assert g.gamma1 == c and math.isinf(g.gamma2)


@pytest.mark.parametrize("abc", [(1.0, 0.0, 2.0), (1.0, -1.0, 2.0), (2.0, 1.0, 2.0), (2.0, 1.0, 1.0)])
def test_fishing_rejects_bad_parameters(abc):
    with pytest.raises(NonlinearityError):
        make_fishing_family(*abc)


def test_linear():
    g = make_linear(0.7)
    np.testing.assert_allclose(g.g(np.array([1.0, -2.0])), [0.7, -1.4])
    assert g.dg(np.zeros(3)).shape == (3,)
    assert validate(g, weight(1.0)).ok


def test_validate_accepts_admissible():
    rep = validate(make_softplus_family(-1.0, 2.2), weight(3.44))
    assert rep.ok and bool(rep)
    assert rep.b1_sup < np.inf and rep.b2_sup < np.inf


def test_validate_rejects_slope_above_nu():
    rep = validate(make_softplus_family(-1.0, 5.0), weight(3.44))
    assert not rep.ok
    assert "g'(u) <= nu1 < nu" in rep.failures[0]


def test_validate_flags_wrong_derivative():
    g = make_softplus_family(-1.0, 2.0)
    from dataclasses import replace

    bad = replace(g, dg=lambda u: g.dg(u) + 0.01)
    rep = validate(bad, weight(3.0))
    assert not rep.ok
    assert any("finite differences of g" in m for m in rep.failures)
    assert rep.first_violation is not None


def test_validate_flags_convexity_tag():
    from dataclasses import replace

    g = replace(make_softplus_family(-1.0, 2.0), convexity="concave")
    assert not validate(g, weight(3.0)).ok


def test_validate_fishing_skips_right_tail():
    g = make_fishing_family(1.3, 1.0, 2.4)
    rep = validate(g, weight(3.44))
    assert rep.ok
    assert math.isinf(rep.b2_sup) and rep.b1_sup < np.inf
