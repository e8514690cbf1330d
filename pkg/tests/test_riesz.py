import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from choquard_lab.constants import hls_sharp_constant
from choquard_lab.errors import NumericalAccuracyError, ValidationError
from choquard_lab.field import ComplexField, make_grid
from choquard_lab.riesz import (RieszPlan, cell_kernel_integral, exponent_window, interaction, riesz_convolve,
                                riesz_convolve_direct, riesz_plan, riesz_symbol_constant)
from conftest import smooth_field


def test_symbol_constant():
    assert riesz_symbol_constant(3, 2.0) == pytest.approx(2 * math.pi**2, rel=1e-14)
    assert riesz_symbol_constant(3, 1.0) == pytest.approx(4 * math.pi, rel=1e-14)
    with pytest.raises(ValidationError):
        riesz_symbol_constant(3, 3.0)


def test_plan_rejects_alpha():
    g = make_grid(3, 8, 4.0)
    for a in (0.0, 3.0, -1.0):
        with pytest.raises(ValidationError):
            riesz_plan(g, a)


@pytest.mark.parametrize("kernel, policy", [("minimum_image", "keep"), ("minimum_image", "zero"),
                                            ("continuum", "zero")])
def test_multiplier_even(kernel, policy):
    g = make_grid(3, 8, 4.0)
    m = riesz_plan(g, 1.3, policy, kernel).multiplier
    flipped = np.roll(m[::-1, ::-1, ::-1], 1, axis=(0, 1, 2))
    assert np.allclose(m, flipped, rtol=1e-12, atol=0)


def test_continuum_kernel_needs_zero_mode_policy():
    with pytest.raises(ValidationError):
        riesz_plan(make_grid(3, 8, 4.0), 1.0, "keep", "continuum")


def test_zero_policy_kills_constants():
    g = make_grid(3, 8, 4.0)
    out = riesz_convolve(riesz_plan(g, 1.0, "zero"), np.ones(g.shape))
    assert np.abs(out).max() < 1e-12
    out = riesz_convolve(riesz_plan(g, 1.0, "background_subtract"), np.full(g.shape, 3.0))
    assert np.abs(out).max() < 1e-12


def test_zero_input():
    g = make_grid(3, 8, 4.0)
    assert np.all(riesz_convolve(riesz_plan(g, 1.0), np.zeros(g.shape)) == 0)
    assert np.all(riesz_convolve_direct(g, 1.0, np.zeros(g.shape)) == 0)


def test_cell_integral(golden):
    assert cell_kernel_integral(3, 1.0, 1.0) == pytest.approx(golden["oracle"]["cell_integral_unit_cube_alpha1"],
                                                             rel=1e-12)
    # homogeneity in the spacing and the 1-D case: int_{-1/2}^{1/2} |z|^-a = 2^a / (1 - a)
    assert cell_kernel_integral(3, 2.0, 0.5) == pytest.approx(cell_kernel_integral(3, 2.0, 1.0) * 0.5, rel=1e-14)
    assert cell_kernel_integral(1, 0.5, 1.0) == pytest.approx(2**0.5 / 0.5, rel=1e-14)
    assert cell_kernel_integral(2, 1.0, 1.0) == pytest.approx(4 * math.asinh(1.0), rel=1e-12)


def test_delta_response_matches_direct():
    g = make_grid(3, 16, 8.0)
    f = np.zeros(g.shape)
    f[g.center_index] = 1.0 / g.cell_volume
    fast = riesz_convolve(riesz_plan(g, 1.5), f)
    direct = riesz_convolve_direct(g, 1.5, f)
    mask = np.ones(g.shape, bool)
    mask[g.center_index] = False
    assert np.abs(fast[mask] / direct[mask] - 1).max() < 1e-3
    r = g.radius()[mask]
    # away from the wrap-around, the response is |x|^-alpha itself
    assert np.allclose(direct[mask], r ** -1.5, rtol=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 2.7])
def test_spectral_matches_direct_on_smooth_compact_inputs(alpha):
    g = make_grid(3, 16, 8.0)
    r = g.radius()
    f = np.where(r < 3.0, np.cos(np.pi * r / 6.0) ** 4, 0.0) * (1 + 0.3 * g.mesh()[0] / 4)
    s = riesz_convolve(riesz_plan(g, alpha), f)
    d = riesz_convolve_direct(g, alpha, f)
    assert np.linalg.norm(s - d) / np.linalg.norm(d) < 1e-3


def _naive(grid, alpha, f):
    n, h = grid.points_per_axis, grid.spacing
    out = np.zeros(grid.shape)
    self_term = cell_kernel_integral(grid.dim, alpha, h)
    pts = list(zip(*np.nonzero(f)))
    for x in np.ndindex(grid.shape):
        acc = 0.0
        for y in pts:
            d2 = 0.0
            for a, b in zip(x, y):
                k = (a - b) % n
                k = min(k, n - k)
                d2 += (k * h) ** 2
            acc += f[y] * (self_term if d2 == 0 else d2 ** (-alpha / 2) * h**3)
        out[x] = acc
    return out


def test_direct_matches_naive_loop():
    g = make_grid(3, 8, 4.0)
    rng = np.random.default_rng(9)
    f = np.zeros(g.shape)
    idx = rng.integers(0, 8, size=(6, 3))
    f[tuple(idx.T)] = rng.uniform(0.5, 2.0, size=6)
    assert np.allclose(riesz_convolve_direct(g, 1.2, f), _naive(g, 1.2, f), rtol=1e-12, atol=0)


def test_two_point_masses():
    g = make_grid(3, 16, 8.0)
    f = np.zeros(g.shape)
    c = g.center_index
    f[c] = 2.0
    f[c[0] + 3, c[1], c[2]] = 5.0
    d = 3 * g.spacing
    alpha = 1.0
    total = float(np.sum(f * riesz_convolve_direct(g, alpha, f)) * g.cell_volume)
    self_part = (4.0 + 25.0) * cell_kernel_integral(3, alpha, g.spacing) * g.cell_volume
    assert total - self_part == pytest.approx(2 * 2.0 * 5.0 / d**alpha * g.cell_volume**2, rel=1e-12)


def test_direct_cost_guard():
    with pytest.raises(ValidationError):
        riesz_convolve_direct(make_grid(3, 64, 8.0), 1.0, np.zeros((64,) * 3))


def test_gaussian_at_origin():
    # (|x|^-1 * e^{-|x|^2})(0) = 4 pi int r e^{-r^2} dr = 2 pi
    g = make_grid(3, 32, 12.0)
    out = riesz_convolve(riesz_plan(g, 1.0), np.exp(-g.radius() ** 2))
    assert out[g.center_index] == pytest.approx(2 * math.pi, rel=1e-2)


def test_imaginary_residue_is_detected():
    g = make_grid(3, 8, 4.0)
    rng = np.random.default_rng(0)
    bad = RieszPlan(g, 1.0, rng.standard_normal(g.shape), "keep", "minimum_image")
    with pytest.raises(NumericalAccuracyError):
        riesz_convolve(bad, rng.uniform(size=g.shape))


def test_complex_input_rejected():
    g = make_grid(3, 8, 4.0)
    with pytest.raises(ValidationError):
        riesz_convolve(riesz_plan(g, 1.0), np.ones(g.shape) * 1j)


def test_interaction_zero_and_window():
    g = make_grid(3, 8, 4.0)
    plan = riesz_plan(g, 1.0)
    assert interaction(ComplexField.zeros(g), 2.0, plan) == 0.0
    assert exponent_window(3, 1.0) == (pytest.approx(5 / 3), pytest.approx(5.0))
    u = smooth_field(g, np.random.default_rng(1))
    with pytest.raises(ValidationError):
        interaction(u, 6.0, plan)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert interaction(u, 6.0, plan, force=True) > 0
        assert any("outside" in str(x.message) for x in w)


@given(st.floats(0.2, 5.0), st.floats(5 / 3, 5.0), st.integers(0, 10_000))
def test_interaction_scaling(t, s, seed):
    g = make_grid(3, 8, 5.0)
    plan = riesz_plan(g, 1.0)
    u = smooth_field(g, np.random.default_rng(seed))
    assert interaction(u * t, s, plan) == pytest.approx(t ** (2 * s) * interaction(u, s, plan), rel=1e-12)


@given(st.floats(0.3, 2.7), st.integers(0, 10_000))
def test_interaction_nonnegative(alpha, seed):
    g = make_grid(3, 8, 4.0)
    rng = np.random.default_rng(seed)
    u = ComplexField(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    lo, hi = exponent_window(3, alpha)
    s = rng.uniform(lo, hi)
    assert interaction(u, s, riesz_plan(g, alpha)) >= 0.0


@given(st.integers(-8, 8), st.integers(-8, 8), st.integers(-8, 8))
def test_translation_invariance(a, b, c):
    g = make_grid(3, 16, 8.0)
    plan = riesz_plan(g, 1.0)
    u = smooth_field(g, np.random.default_rng(4))
    assert interaction(u.shifted((a, b, c)), 4.0, plan) == pytest.approx(interaction(u, 4.0, plan), rel=1e-10)


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_hls_extremal_ratio(alpha):
    gam = 1.0
    g = make_grid(3, 32, 16 * gam)
    f = (gam**2 + g.radius() ** 2) ** (-(6 - alpha) / 2)
    lhs = float(np.sum(riesz_convolve(riesz_plan(g, alpha), f) * f) * g.cell_volume)
    q = 6 / (6 - alpha)
    rhs = hls_sharp_constant(3, alpha) * (np.sum(f**q) * g.cell_volume) ** (2 / q)
    assert abs(lhs / rhs - 1) < 5e-2


@given(st.integers(0, 10_000), st.floats(0.5, 2.5))
def test_hls_inequality_with_slack(seed, alpha):
    g = make_grid(3, 16, 12.0)
    u = smooth_field(g, np.random.default_rng(seed), width=1.0)
    s = (6 - alpha) / 3 * 0.5 + (6 - alpha) / 2 * 0.5
    q = 6 / (6 - alpha)
    dens = u.abs() ** s
    bound = hls_sharp_constant(3, alpha) * (np.sum(dens**q) * g.cell_volume) ** (2 / q)
    assert interaction(u, s, riesz_plan(g, alpha)) <= (1 + 5e-2) * bound
