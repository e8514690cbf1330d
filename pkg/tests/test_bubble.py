import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from choquard_lab.bubble import (BubbleParams, annulus_tail_scan, ball_mass_radial, case1_check, case2_scan,
                                 choquard_deficit_radial, closed_form_I3, closed_form_I4, cutoff, divergence_scan,
                                 dyadic_sequence, eta_exponent, gradient_energy_radial, l2_mass_integral, make_u_eps,
                                 talenti_bubble, talenti_profile)
from choquard_lab.constants import ProblemParams, best_sobolev_constant, sphere_area
from choquard_lab.errors import ValidationError
from choquard_lab.field import DEFAULT_SPEC, make_grid, sample_potentials

mpmath.mp.dps = 30


def test_talenti_values():
    assert talenti_profile(0.0, 3) == pytest.approx(3 ** 0.25, rel=1e-15)
    assert talenti_profile(0.0, 3) == pytest.approx(1.31607, abs=1e-5)
    assert talenti_profile(1.0, 4) == pytest.approx(math.sqrt(8) / 2, rel=1e-15)
    g = make_grid(3, 16, 8.0)
    assert talenti_bubble(g).values[g.center_index].real == pytest.approx(3 ** 0.25)


def test_talenti_gradient_energy_is_sobolev_power():
    # the bubble is an extremal: int |grad U|^2 = S^{N/2}; use a huge cut-off radius
    for n in (3, 4, 5):
        bp = BubbleParams(1.0, 1e4, n, 1.0)
        assert gradient_energy_radial(bp) == pytest.approx(best_sobolev_constant(n) ** (n / 2), rel=2e-3)


def test_bubble_params_validation():
    with pytest.raises(ValidationError):
        BubbleParams(1.0, 0.5)
    with pytest.raises(ValidationError):
        BubbleParams(0.1, 1.0, cutoff_profile="box")
    with pytest.raises(ValidationError):
        make_u_eps(make_grid(3, 16, 4.0), BubbleParams(0.1, 1.0))
    assert eta_exponent(3, 1.0) == 1.0
    assert eta_exponent(5, 4.5) == pytest.approx(2.75)
    assert eta_exponent(5, 1.0) == 3.0


@pytest.mark.parametrize("profile", ["smoothstep", "mollified"])
def test_cutoff_shape(profile):
    r = np.linspace(0, 3, 301)
    c = cutoff(r, 1.0, profile)
    assert np.all(c[r <= 1.0] == 1.0)
    assert np.all(c[r >= 2.0] == 0.0)
    assert np.all(np.diff(c) <= 0.0)


def test_u_eps_support_and_core():
    g = make_grid(3, 32, 8.0)
    bp = BubbleParams(0.2, 1.0)
    u = make_u_eps(g, bp).values.real
    r = g.radius()
    assert np.all(u[r >= 2.0] == 0.0)
    core = r <= 1.0
    expect = bp.eps ** -0.5 * talenti_profile(r[core] / bp.eps, 3)
    assert np.allclose(u[core], expect, rtol=1e-15, atol=0)


def test_closed_forms_golden(golden):
    o = golden["oracle"]
    assert closed_form_I3(0.5, 1.0) == pytest.approx(o["I3_0.5_1"], rel=1e-14)
    assert closed_form_I3(0.1, 1.0) == pytest.approx(o["I3_0.1_1"], rel=1e-14)
    assert closed_form_I4(1.0, 1.0) == pytest.approx(o["I4_1_1"], rel=1e-14)
    assert closed_form_I4(0.5, 1.0) == pytest.approx(o["I4_0.5_1"], rel=1e-14)


@given(st.floats(1e-3, 1.0), st.floats(1.0, 5.0))
def test_closed_forms_against_quadrature(eps, ratio):
    delta = eps * ratio * 3
    e, d = mpmath.mpf(eps), mpmath.mpf(delta)
    i3 = e**2 * mpmath.quad(lambda r: r**2 / (1 + r**2), [0, d / e])
    i4 = e**2 * mpmath.quad(lambda r: r**3 / (1 + r**2) ** 2, [0, d / e])
    assert closed_form_I3(eps, delta) == pytest.approx(float(i3), rel=1e-10)
    assert closed_form_I4(eps, delta) == pytest.approx(float(i4), rel=1e-10)


def test_closed_form_small_ratio_precision():
    # delta/eps tiny: I4 ~ eps^2 x^2 / 4 with x = (delta/eps)^2
    eps, delta = 1.0, 1e-5
    assert closed_form_I4(eps, delta) == pytest.approx(0.25 * delta**4, rel=1e-6)


@pytest.mark.parametrize("dim, eps", [(3, 0.05), (4, 0.1), (5, 0.01), (6, 1e-3)])
def test_ball_mass_against_mpmath(dim, eps):
    delta = 1.0
    n = mpmath.mpf(dim)
    e = mpmath.mpf(eps)
    val = mpmath.quad(lambda r: r ** (n - 1) * (e ** ((2 - n) / 2) * (n * (n - 2)) ** ((n - 2) / 4)
                                                 * (1 + (r / e) ** 2) ** (-(n - 2) / 2)) ** 2,
                      [0, e, 10 * e, 1])
    assert ball_mass_radial(dim, eps, delta) == pytest.approx(float(val) * sphere_area(dim), rel=1e-9)


def test_l2_mass_grid_vs_radial():
    rep = l2_mass_integral(make_grid(3, 64, 8.0), BubbleParams(0.2, 1.0))
    assert rep.rel_diff <= 1e-2


@pytest.mark.parametrize("n, alpha, p, k0", [(3, 1.0, 4.5, 5), (4, 1.0, 3.25, 4), (5, 1.0, 2.8, 7), (5, 4.5, 1.6, 6)])
def test_divergence_regimes(n, alpha, p, k0):
    params = ProblemParams(n, alpha, p, 1.0, "A")
    tab = divergence_scan(params, BubbleParams(0.5, 1.0, n, alpha), dyadic_sequence(k0, 30))
    assert tab.summary["strictly_decreasing"]
    vals = tab.column("I_eps")
    assert vals[-1] < 0.0
    assert tab.summary["eta"] == eta_exponent(n, alpha)


def test_divergence_regime_labels_and_errors():
    tab = divergence_scan(ProblemParams(4, 1.0, 3.25, 1.0, "A"), BubbleParams(0.5, 1.0, 4, 1.0), [0.1, 0.05])
    assert tab.summary["regime"] == "N=4"
    with pytest.raises(ValidationError, match="regime mismatch"):
        divergence_scan(ProblemParams(3, 1.0, 3.0, 1.0, "A"), BubbleParams(0.5, 1.0), [0.1, 0.05])
    with pytest.raises(ValidationError):
        divergence_scan(ProblemParams(3, 1.0, 3.0, 1.0, "B"), BubbleParams(0.5, 1.0), [0.1, 0.05])
    with pytest.raises(ValidationError):
        divergence_scan(ProblemParams(3, 1.0, 4.5, 1.0, "A"), BubbleParams(0.5, 1.0), [0.05, 0.1])


def test_annulus_tail_bounded():
    tab = annulus_tail_scan(ProblemParams(3, 1.0, 4.5, 1.0, "A"), BubbleParams(0.5, 1.0), dyadic_sequence(2, 12))
    assert tab.summary["bounded"]
    vals = tab.column("tail")
    # N = 3: eta = N - 2, so the scaled tail tends to a positive constant
    assert vals[-1] == pytest.approx(vals[-2], rel=1e-2)


def test_gradient_excess_is_linear_in_eps():
    s32 = best_sobolev_constant(3) ** 1.5
    eps = [0.1, 0.05, 0.025]
    ex = [gradient_energy_radial(BubbleParams(e, 1.0)) - s32 for e in eps]
    assert all(x > 0 for x in ex)
    for a, b in zip(ex[:-1], ex[1:]):
        assert math.log2(a / b) == pytest.approx(1.0, rel=0.2)


def test_choquard_deficit_is_order_eps_to_the_n():
    eps = [0.2, 0.1, 0.05]
    d = [choquard_deficit_radial(BubbleParams(e, 1.0)) for e in eps]
    assert all(x > 0 for x in d)
    for a, b in zip(d[:-1], d[1:]):
        assert math.log2(a / b) == pytest.approx(3.0, rel=0.1)
    with pytest.raises(ValidationError):
        choquard_deficit_radial(BubbleParams(0.1, 1.0, 4, 1.0))


@pytest.fixture(scope="module")
def pot32():
    return sample_potentials(make_grid(3, 32, 8.0), DEFAULT_SPEC)


def test_case1_endpoint_warning(pot32):
    rep = case1_check(ProblemParams(3, 1.0, 4.5, 1.0, "A"), pot32, BubbleParams(0.3, 1.0), t_grid=[0.01, 0.02, 0.03])
    assert rep.at_endpoint and rep.resolution_warning
    assert rep.in_window


def test_case1_report_fields(pot32):
    params = ProblemParams(3, 1.0, 4.5, 1.0, "A")
    rep = case1_check(params, pot32, BubbleParams(0.3, 1.0))
    assert not rep.at_endpoint
    assert rep.margin == pytest.approx(rep.threshold - rep.sup_tJ)
    assert rep.sup_tJ > 0
    assert rep.to_dict()["energy"]["total"] == rep.energy.total
    assert not case1_check(ProblemParams(3, 1.0, 3.0, 1.0, "B"), pot32, BubbleParams(0.3, 1.0)).in_window


def test_case2_scan(pot32):
    params = ProblemParams(3, 1.0, 3.0, 1.0, "A")
    lams = [2.0**k for k in range(9)]
    tab = case2_scan(params, pot32, BubbleParams(0.3, 1.0), lams)
    assert len(tab.rows) == 9
    assert tab.summary["t_strictly_decreasing"]
    assert all(tab.column("bound_ok"))
    assert tab.summary["last_below_threshold"]
    with pytest.raises(ValidationError):
        case2_scan(params, pot32, BubbleParams(0.3, 1.0), [0.0, 1.0])
    with pytest.raises(ValidationError):
        case2_scan(ProblemParams(3, 1.0, 4.5, 1.0, "A"), pot32, BubbleParams(0.3, 1.0), [1.0])


def test_scan_table_csv(tmp_path):
    tab = divergence_scan(ProblemParams(3, 1.0, 4.5, 1.0, "A"), BubbleParams(0.5, 1.0), [0.1, 0.05])
    path = tmp_path / "t.csv"
    tab.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epsilon,I_eps,mass_term,subcritical_term,decreasing"
    assert len(lines) == 3
    assert tab.to_dict()["summary"]["regime"] == "N=3"
