"""Riesz potential ``|x|^-alpha * f`` on the periodic box and the interaction integrals.

The default plan transforms the minimum-image kernel: ``|d|^-alpha`` at every
nonzero minimum-image displacement, and at ``d = 0`` the exact average of
``|z|^-alpha`` over one cell. The spectral convolution then reproduces the
O(n^2) direct sum to rounding error. Sampling the continuum symbol
``c(N, alpha) |k|^(alpha - N)`` is kept as an option (``kernel="continuum"``).
It has no finite zero mode and converges slowly in the box size.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .constants import gamma
from .errors import NumericalAccuracyError, ValidationError
from .field import ComplexField, Grid, check_same_grid

__all__ = [
    "RieszPlan",
    "riesz_symbol_constant",
    "cell_kernel_integral",
    "riesz_plan",
    "riesz_convolve",
    "riesz_convolve_direct",
    "interaction",
    "exponent_window",
]

ZERO_MODE_POLICIES = ("keep", "zero", "background_subtract")
KERNELS = ("minimum_image", "continuum")
DIRECT_MAX_POINTS = 2**15


def _workers():
    try:
        return max(1, int(os.environ.get("CHOQUARD_LAB_THREADS", "1")))
    except ValueError:
        return 1


def riesz_symbol_constant(dim: int, alpha: float) -> float:
    """``c(N, alpha)`` in ``FT[|x|^-alpha](k) = c |k|^(alpha - N)`` (angular wavenumber)."""
    if not 0.0 < alpha < dim:
        raise ValidationError(f"alpha must lie in (0, {dim}), got {alpha}")
    n, a = float(dim), float(alpha)
    return math.pi ** (n / 2.0) * 2.0 ** (n - a) * gamma((n - a) / 2.0) / gamma(a / 2.0)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def cell_kernel_integral(dim: int, alpha: float, spacing: float) -> float:
    """Integral of ``|z|^-alpha`` over the cube ``[-h/2, h/2]^dim``.

    The cube is split into ``2 dim`` pyramids with apex at the origin. On the
    pyramid over a face the integrand is homogeneous, so the radial factor
    integrates to ``(1/2) / (dim - alpha)``. What remains is a smooth integral
    over a face, done with tensor Gauss-Legendre.
    """
    if not 0.0 < alpha < dim:
        raise ValidationError(f"alpha must lie in (0, {dim}), got {alpha}")
    if dim == 1:
        face = 0.5 ** (-alpha)
    else:
        x = 0.5 * _GL_X
        w = 0.5 * _GL_W
        pts = np.meshgrid(*([x] * (dim - 1)), indexing="ij")
        wts = np.ones_like(pts[0])
        for wj in np.meshgrid(*([w] * (dim - 1)), indexing="ij"):
            wts = wts * wj
        r2 = 0.25 + sum(p**2 for p in pts)
        face = float(np.sum(wts * r2 ** (-alpha / 2.0)))
    unit = 2.0 * dim * 0.5 / (dim - alpha) * face
    return unit * spacing ** (dim - alpha)


def _minimum_image_offsets(grid: Grid) -> list:
    """Signed minimum-image offsets (in cells) from index 0, per axis, full grid shape."""
    n = grid.points_per_axis
    m = np.arange(n)
    m = np.where(m >= n // 2, m - n, m)
    return np.meshgrid(*([m] * grid.dim), indexing="ij")


@dataclass(frozen=True, eq=False)
class RieszPlan:
    """Precomputed Fourier multiplier for ``|x|^-alpha *`` on one grid."""

    grid: Grid
    alpha: float
    multiplier: np.ndarray
    zero_mode_policy: str
    kernel: str


def riesz_plan(grid: Grid, alpha: float, zero_mode_policy: str = "keep",
               kernel: str = "minimum_image") -> RieszPlan:
    """Build the multiplier for ``|x|^-alpha *`` on ``grid``.

    Parameters
    ----------
    zero_mode_policy : {"keep", "zero", "background_subtract"}
        ``"keep"`` retains the kernel mean (minimum-image kernel only).
        ``"zero"`` drops the zero mode, so the output has zero mean.
        ``"background_subtract"`` removes the mean of the input before convolving.
    kernel : {"minimum_image", "continuum"}
    """
    if not 0.0 < alpha < grid.dim:
        raise ValidationError(f"alpha must lie in (0, {grid.dim}), got {alpha}")
    if zero_mode_policy not in ZERO_MODE_POLICIES:
        raise ValidationError(f"zero_mode_policy must be one of {ZERO_MODE_POLICIES}")
    if kernel not in KERNELS:
        raise ValidationError(f"kernel must be one of {KERNELS}")
    h = grid.spacing
    if kernel == "minimum_image":
        offs = _minimum_image_offsets(grid)
        r = h * np.sqrt(sum(o.astype(float) ** 2 for o in offs))
        samples = np.empty(grid.shape)
        nz = r > 0.0
        samples[nz] = r[nz] ** (-alpha) * grid.cell_volume
        samples[(0,) * grid.dim] = cell_kernel_integral(grid.dim, alpha, h)
        mult = scipy.fft.fftn(samples, workers=_workers())
        # kernel is even, so the transform is real up to rounding
        mult = np.ascontiguousarray(mult.real)
    else:
        if zero_mode_policy == "keep":
            raise ValidationError("the continuum symbol has no finite zero mode; use 'zero' or 'background_subtract'")
        k2 = sum(k**2 for k in grid.wavenumbers())
        k2[(0,) * grid.dim] = 1.0
        mult = riesz_symbol_constant(grid.dim, alpha) * k2 ** ((alpha - grid.dim) / 2.0)
    if zero_mode_policy == "zero" or kernel == "continuum":
        mult[(0,) * grid.dim] = 0.0
    mult.setflags(write=False)
    return RieszPlan(grid, float(alpha), mult, zero_mode_policy, kernel)


def _real_values(f, grid):
    if isinstance(f, ComplexField):
        check_same_grid(f.grid, grid)
        vals = f.values
        if np.any(vals.imag != 0.0):
            raise ValidationError("riesz_convolve expects a real field")
        return vals.real
    arr = np.asarray(f)
    if np.iscomplexobj(arr):
        if np.any(arr.imag != 0.0):
            raise ValidationError("riesz_convolve expects a real field")
        arr = arr.real
    if arr.shape != grid.shape:
        raise ValidationError(f"field shape {arr.shape} does not match grid {grid.shape}")
    return arr.astype(float, copy=False)


def riesz_convolve(plan: RieszPlan, f) -> np.ndarray:
    """``sum_y K(x - y) f(y) h^N`` by FFT; returns a real array of grid shape.

    Raises
    ------
    NumericalAccuracyError
        If the discarded imaginary part exceeds ``1e-8`` of the output norm.
    """
    arr = _real_values(f, plan.grid)
    if plan.zero_mode_policy == "background_subtract":
        arr = arr - arr.mean()
    w = _workers()
    out = scipy.fft.ifftn(scipy.fft.fftn(arr, workers=w) * plan.multiplier, workers=w)
    resid = np.linalg.norm(out.imag)
    scale = np.linalg.norm(out.real)
    if resid > 1e-8 * scale and resid > 1e-300:
        raise NumericalAccuracyError(f"imaginary residue {resid:.3e} vs output norm {scale:.3e}")
    return out.real


def riesz_convolve_direct(grid: Grid, alpha: float, f) -> np.ndarray:
    """Direct double sum with minimum-image distances; O(n^2), used as an oracle.

    The coincident-point term uses the cell average of the kernel.

    Raises
    ------
    ValidationError
        If the grid exceeds ``2**15`` points.
    """
    if grid.total_points > DIRECT_MAX_POINTS:
        raise ValidationError(f"direct summation limited to {DIRECT_MAX_POINTS} points, grid has {grid.total_points}")
    if not 0.0 < alpha < grid.dim:
        raise ValidationError(f"alpha must lie in (0, {grid.dim}), got {alpha}")
    arr = _real_values(f, grid).reshape(-1)
    n, h = grid.points_per_axis, grid.spacing
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    self_term = cell_kernel_integral(grid.dim, alpha, h)
    out = np.zeros(arr.size)
    for j in np.flatnonzero(arr):
        d = idx - idx[j]
        d = (d + n // 2) % n - n // 2
        r = h * np.sqrt(np.sum(d.astype(float) ** 2, axis=1))
        kern = np.empty_like(r)
        nz = r > 0.0
        kern[nz] = r[nz] ** (-alpha) * grid.cell_volume
        kern[~nz] = self_term
        out += arr[j] * kern
    return out.reshape(grid.shape)


def exponent_window(dim: int, alpha: float) -> tuple:
    """Admissible Choquard exponents ``[(2N - alpha)/N, (2N - alpha)/(N - 2)]``."""
    lo = (2.0 * dim - alpha) / dim
    hi = (2.0 * dim - alpha) / (dim - 2.0) if dim > 2 else math.inf
    return lo, hi


def interaction(u: ComplexField, s: float, plan: RieszPlan, *, force: bool = False,
                return_potential: bool = False):
    """``sum (|x|^-alpha * |u|^s) |u|^s h^N``.

    ``B(u) = interaction(u, p)`` and ``D(u) = interaction(u, 2_alpha^*)``.
    Exponents outside :func:`exponent_window` raise unless ``force`` is set,
    in which case only a warning is issued.

    With ``return_potential`` the convolution ``|x|^-alpha * |u|^s`` is
    returned as well (the gradient needs it).
    """
    check_same_grid(u.grid, plan.grid)
    lo, hi = exponent_window(u.grid.dim, plan.alpha)
    if not lo - 1e-12 <= s <= hi + 1e-12:
        msg = f"exponent s={s} outside [{lo:.6g}, {hi:.6g}]"
        if not force:
            raise ValidationError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    dens = np.abs(u.values) ** s
    pot = riesz_convolve(plan, dens)
    val = float(np.sum(pot * dens) * u.grid.cell_volume)
    if return_potential:
        return val, pot
    return val
