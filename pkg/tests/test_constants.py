import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from choquard_lab.constants import (Family, ProblemParams, best_sobolev_constant, case_window, constants_report,
                                    gamma, hls_sharp_constant, ps_threshold, radial_power_integral, shl_constant,
                                    sobolev_closed_form, sobolev_quadrature, sphere_area)
from choquard_lab.errors import NumericalAccuracyError, ValidationError


@pytest.mark.parametrize("x, expected", [(1.0, 1.0), (0.5, math.sqrt(math.pi)), (2.5, 0.75 * math.sqrt(math.pi))])
def test_gamma_special_values(x, expected):
    assert gamma(x) == pytest.approx(expected, rel=1e-12)


def test_gamma_against_mpmath_on_grid():
    xs = np.concatenate([np.linspace(0.01, 1.5, 60), np.linspace(1.5, 50.0, 200)])
    worst = max(abs(gamma(x) / float(mpmath.gamma(x)) - 1.0) for x in xs)
    assert worst < 1e-12


@given(st.floats(0.1, 30.0))
def test_gamma_recurrence(x):
    assert gamma(x + 1.0) == pytest.approx(x * gamma(x), rel=1e-12)


def test_gamma_rejects_nonpositive_and_overflows():
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(ValidationError):
            gamma(bad)
    with pytest.raises(OverflowError):
        gamma(200.0)


@pytest.mark.parametrize("n, a, key", [(3, 1, "hls_3_1"), (3, 2, "hls_3_2"), (4, 2, "hls_4_2")])
def test_hls_constant_matches_oracle(golden, n, a, key):
    assert hls_sharp_constant(n, a) == pytest.approx(golden["oracle"][key], rel=1e-10)


def test_hls_4_2_closed_form():
    assert hls_sharp_constant(4, 2.0) == pytest.approx(math.pi / 2 * math.sqrt(6), rel=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_sobolev_two_routes_agree(golden, n):
    assert sobolev_quadrature(n) == pytest.approx(sobolev_closed_form(n), rel=1e-6)
    assert best_sobolev_constant(n) == pytest.approx(golden["oracle"][f"sobolev_{n}"], rel=1e-12)


def test_sobolev_4_closed_form():
    assert best_sobolev_constant(4) == pytest.approx(8 * math.pi / math.sqrt(6), rel=1e-12)


def test_best_sobolev_raises_when_routes_disagree(monkeypatch):
    import choquard_lab.constants as c
    monkeypatch.setattr(c, "sobolev_quadrature", lambda dim: 1.0)
    with pytest.raises(NumericalAccuracyError):
        c.best_sobolev_constant(3)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_shl_identity_on_alpha_grid(n):
    for a in np.linspace(0.1 * n, 0.9 * n, 9):
        c = hls_sharp_constant(n, a)
        shl = shl_constant(n, a)
        assert c > 0 and math.isfinite(c) and shl > 0
        assert shl * c ** ((n - 2.0) / (2 * n - a)) == pytest.approx(best_sobolev_constant(n), rel=1e-10)


def test_shl_and_thresholds(golden):
    o = golden["oracle"]
    assert shl_constant(3, 1.0) == pytest.approx(o["shl_3_1"], rel=1e-10)
    pa = ProblemParams(3, 1.0, 4.5, 1.0, "A")
    assert ps_threshold(pa) == pytest.approx(o["threshold_A_3_1"], rel=1e-10)
    assert ps_threshold(ProblemParams(3, 1.0, 3.0, 1.0, "B")) == pytest.approx(o["threshold_A_3_1"], rel=1e-10)
    assert ps_threshold(ProblemParams(3, 1.0, 4.5, 1.0, "C")) == pytest.approx(o["threshold_C_3"], rel=1e-10)
    # prefactor (N+2-alpha)/(2(2N-alpha)) = 0.4 for (3, 1)
    assert ps_threshold(pa) / shl_constant(3, 1.0) ** 1.25 == pytest.approx(0.4, rel=1e-14)


def test_constants_report_is_positive():
    rep = constants_report(ProblemParams(4, 2.0, 2.5))
    for v in (rep.hls_constant, rep.sobolev, rep.shl, rep.threshold):
        assert v > 0 and math.isfinite(v)
    assert rep.shl == pytest.approx(rep.sobolev / rep.hls_constant ** (2.0 / 6.0), rel=1e-12)


@pytest.mark.parametrize("kw", [
    dict(dim=2, alpha=1.0, p=1.5),
    dict(dim=3, alpha=3.0, p=2.0),
    dict(dim=3, alpha=1.0, p=4.5, lam=0.0),
    dict(dim=3, alpha=1.0, p=5.0),
    dict(dim=3, alpha=1.0, p=1.6),
    dict(dim=3, alpha=1.0, p=5.0, family="B"),
    dict(dim=3, alpha=1.0, p=1.0, family="B"),
])
def test_params_validation(kw):
    with pytest.raises(ValidationError):
        ProblemParams(**kw)


def test_params_derived_exponents():
    p = ProblemParams(3, 1.0, 4.5)
    assert p.two_alpha_star == 5.0 and p.two_star == 6.0 and p.lower_exponent == pytest.approx(5 / 3)
    assert p.family is Family.A
    assert ProblemParams(3, 1.0, 4.9, family="B").family is Family.B


@pytest.mark.parametrize("args, case", [
    ((3, 1.0, 4.5, "A"), 1), ((3, 1.0, 3.0, "A"), 2), ((4, 2.0, 1.9, "A"), 2), ((4, 2.0, 2.5, "A"), 1), ((4, 1.0, 3.25, "C"), 1),
    ((5, 1.0, 2.8, "A"), 1), ((5, 1.0, 2.0, "A"), 2), ((3, 1.0, 4.0, "B"), 1), ((3, 1.0, 2.0, "B"), 2),
    ((4, 1.0, 1.5, "B"), 1),
])
def test_case_window(args, case):
    n, a, p, fam = args
    assert case_window(ProblemParams(n, a, p, 1.0, fam)) == case


def test_radial_power_integral_against_closed_forms():
    # int_0^inf r^2/(1+r^2)^3 = pi/16 ; int_0^inf r^4/(1+r^2)^4 = pi/32
    assert radial_power_integral(2.0, 3.0) == pytest.approx(math.pi / 16, rel=1e-12)
    assert radial_power_integral(4.0, 4.0) == pytest.approx(math.pi / 32, rel=1e-12)
    assert radial_power_integral(2.0, 1.0, 3.0) == pytest.approx(3.0 - math.atan(3.0), rel=1e-12)
    with pytest.raises(ValidationError):
        radial_power_integral(2.0, 1.0)


def test_sphere_area():
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)
