"""Energy functionals, their L^2 gradients, the Nehari residual and projection, fibering maps.

Every functional has the shape

    J(u) = 1/2 ||u||^2 - sum_k c_k(u)

where each nonlinear part ``c_k`` is homogeneous of degree ``e_k > 2``
(``D``: ``2 * 2_alpha^*``, ``B``: ``2p``, ``||u||_{p+1}^{p+1}``: ``p + 1``,
``||u||_{2^*}^{2^*}``: ``2^*``). Along a ray ``t -> t u`` everything is
therefore a sum of powers of ``t``, which the Nehari and fibering code uses
directly instead of re-evaluating fields.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import optimize

from .constants import Family, ProblemParams
from .errors import ConvergenceError, DegenerateInputError, NumericalAccuracyError, ValidationError
from .field import (ComplexField, PotentialSet, _cov_grad, _cov_grad_adjoint, check_same_grid,
                    magnetic_cross_term)
from .riesz import RieszPlan, interaction, riesz_plan

__all__ = [
    "EnergyBreakdown",
    "FiberingTable",
    "get_plan",
    "energy",
    "gradient",
    "energy_and_gradient",
    "EnergyParts",
    "energy_parts",
    "nehari_residual",
    "nehari_project",
    "fibering_scan",
    "ray_terms",
    "ray_maximizer",
    "ray_energy",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    """Parts of the energy; unused parts of a family are 0."""

    kinetic_magnetic: float
    potential: float
    choquard_critical: float
    choquard_sub: float
    power_sub: float
    power_critical: float
    total: float
    cross_term: float = 0.0

    @property
    def norm_sq(self) -> float:
        return self.kinetic_magnetic + self.potential

    def to_dict(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=8)
def get_plan(grid, alpha: float) -> RieszPlan:
    """Default Riesz plan for ``(grid, alpha)``, cached."""
    return riesz_plan(grid, alpha)


def _coupling(params: ProblemParams, lam):
    if lam is None:
        return params.lam
    lam = float(lam)
    if lam < 0.0:
        raise ValidationError(f"coupling override must be >= 0, got {lam}")
    return lam


def _check(u, params, potentials):
    check_same_grid(u.grid, potentials.grid)
    if u.grid.dim != params.dim:
        raise ValidationError(f"grid dimension {u.grid.dim} does not match N = {params.dim}")


def _nonlinear_terms(params: ProblemParams, bd: EnergyBreakdown, lam: float) -> list:
    """``[(coefficient, degree)]`` with ``J(tu) = 1/2 ||u||^2 t^2 - sum c t^e``."""
    fam = params.family
    terms = []
    if fam is Family.C:
        terms.append((bd.power_critical / params.two_star, params.two_star))
    else:
        terms.append((bd.choquard_critical / (2.0 * params.two_alpha_star), 2.0 * params.two_alpha_star))
    if fam is Family.B:
        terms.append((lam * bd.power_sub / (params.p + 1.0), params.p + 1.0))
    else:
        terms.append((lam * bd.choquard_sub / (2.0 * params.p), 2.0 * params.p))
    return terms


@dataclass(frozen=True, eq=False)
class EnergyParts:
    """Energy breakdown plus the pieces of the gradient, kept apart by homogeneity.

    ``G = linear - sum(nonlinear)``; ``nonlinear[k]`` is homogeneous of degree
    ``degrees[k] - 1`` so the gradient at ``t u`` is
    ``t linear - sum t^(e_k - 1) nonlinear[k]``.
    """

    breakdown: EnergyBreakdown
    linear: Optional[np.ndarray]
    nonlinear: tuple
    degrees: tuple
    lam: float

    def scaled(self, t: float, params: ProblemParams) -> "EnergyParts":
        """Parts of ``t u`` without touching a field transform."""
        b = self.breakdown
        t2 = t * t
        if params.family is Family.C:
            crit, pc = b.choquard_critical, b.power_critical * t**params.two_star
        else:
            crit, pc = b.choquard_critical * t ** (2.0 * params.two_alpha_star), 0.0
        if params.family is Family.B:
            sub, ps = 0.0, b.power_sub * t ** (params.p + 1.0)
        else:
            sub, ps = b.choquard_sub * t ** (2.0 * params.p), 0.0
        part = EnergyBreakdown(b.kinetic_magnetic * t2, b.potential * t2, crit, sub, ps, pc, 0.0,
                               b.cross_term * t2)
        total = 0.5 * part.norm_sq - sum(c for c, _ in _nonlinear_terms(params, part, self.lam))
        bd = EnergyBreakdown(*[getattr(part, f) for f in ("kinetic_magnetic", "potential", "choquard_critical",
                                                           "choquard_sub", "power_sub", "power_critical")],
                             float(total), part.cross_term)
        lin = None if self.linear is None else self.linear * t
        nl = tuple(n * t ** (e - 1.0) for n, e in zip(self.nonlinear, self.degrees))
        return EnergyParts(bd, lin, nl, self.degrees, self.lam)

    def gradient_values(self) -> np.ndarray:
        g = self.linear.copy()
        for n in self.nonlinear:
            g -= n
        return g


def energy_parts(u: ComplexField, params: ProblemParams, potentials: PotentialSet,
                 scalar: str = "periodic", *, lam: Optional[float] = None,
                 plan: Optional[RieszPlan] = None, stencil: str = "central",
                 want_gradient: bool = True) -> EnergyParts:
    """Evaluate the energy and, optionally, the gradient pieces of ``u``."""
    _check(u, params, potentials)
    lam = _coupling(params, lam)
    grid = u.grid
    dv = grid.cell_volume
    vals = u.values
    if plan is None:
        plan = get_plan(grid, params.alpha)
    elif plan.grid != grid or plan.alpha != params.alpha:
        raise ValidationError("Riesz plan does not match grid/alpha")
    v = potentials.scalar(scalar)
    grads = _cov_grad(vals, potentials, stencil)
    kin = float(sum(np.sum(np.abs(g) ** 2) for g in grads) * dv)
    absu = np.abs(vals)
    pot = float(np.sum(v * absu**2) * dv)
    fam = params.family

    crit = sub = psub = pcrit = 0.0
    # real factors multiplying u in the gradient, one per nonlinear term
    if fam is Family.C:
        q = params.two_star
        pcrit = float(np.sum(absu**q) * dv)
        first = _pow_or_zero(absu, q - 2.0) if want_gradient else None
        deg_first = q
    else:
        s = params.two_alpha_star
        crit, phi = interaction(u, s, plan, return_potential=True)
        first = phi * _pow_or_zero(absu, s - 2.0) if want_gradient else None
        deg_first = 2.0 * s
    if fam is Family.B:
        q = params.p + 1.0
        psub = float(np.sum(absu**q) * dv)
        second = lam * _pow_or_zero(absu, q - 2.0) if want_gradient else None
        deg_second = q
    else:
        sub, phi = interaction(u, params.p, plan, return_potential=True)
        second = lam * phi * _pow_or_zero(absu, params.p - 2.0) if want_gradient else None
        deg_second = 2.0 * params.p

    partial = EnergyBreakdown(kin, pot, crit, sub, psub, pcrit, 0.0)
    total = 0.5 * (kin + pot) - sum(c for c, _ in _nonlinear_terms(params, partial, lam))
    cross = magnetic_cross_term(u, potentials) if potentials.is_magnetic else 0.0
    bd = EnergyBreakdown(kin, pot, crit, sub, psub, pcrit, float(total), cross)
    if not want_gradient:
        return EnergyParts(bd, None, (), (deg_first, deg_second), lam)
    linear = _cov_grad_adjoint(grads, potentials, stencil) + v * vals
    return EnergyParts(bd, linear, (first * vals, second * vals), (deg_first, deg_second), lam)


def energy_and_gradient(u: ComplexField, params: ProblemParams, potentials: PotentialSet,
                        scalar: str = "periodic", *, want_gradient: bool = True, **kw):
    """Energy breakdown and (optionally) the L^2 gradient in one pass.

    Returns ``(EnergyBreakdown, ComplexField | None)``.
    """
    parts = energy_parts(u, params, potentials, scalar, want_gradient=want_gradient, **kw)
    if not want_gradient:
        return parts.breakdown, None
    return parts.breakdown, ComplexField(u.grid, parts.gradient_values())


def _pow_or_zero(a: np.ndarray, e: float) -> np.ndarray:
    """``a**e`` with 0 where ``a == 0`` (the factor always multiplies ``u``)."""
    if e >= 0.0:
        return a**e
    out = np.zeros_like(a)
    nz = a > 0.0
    out[nz] = a[nz] ** e
    return out


def energy(u: ComplexField, params: ProblemParams, potentials: PotentialSet,
           scalar: str = "periodic", **kw) -> EnergyBreakdown:
    """Energy breakdown of ``u``.

    ``scalar="periodic"`` uses ``V_P`` (functional ``J``); ``"effective"`` uses
    ``V = V_P - W`` (functional ``I``). Keywords: ``lam`` overrides the
    coupling (``>= 0``), ``plan`` supplies a Riesz plan, ``stencil`` selects
    the derivative.
    """
    return energy_and_gradient(u, params, potentials, scalar, want_gradient=False, **kw)[0]


def gradient(u: ComplexField, params: ProblemParams, potentials: PotentialSet,
             scalar: str = "periodic", **kw) -> ComplexField:
    """L^2 representative ``G`` with ``Re <G, psi>`` equal to the derivative of the energy along ``psi``."""
    return energy_and_gradient(u, params, potentials, scalar, **kw)[1]


def ray_terms(bd: EnergyBreakdown, params: ProblemParams, lam: float):
    """``(||u||^2, [(c, e)])`` describing ``t -> J(t u)``."""
    norm = bd.norm_sq
    terms = [(c, e) for c, e in _nonlinear_terms(params, bd, lam) if c != 0.0]
    return norm, terms


def nehari_residual(u: ComplexField, params: ProblemParams, potentials: PotentialSet,
                    scalar: str = "periodic", **kw) -> float:
    """``J'(u) u``: ``||u||^2`` minus each nonlinear part times its degree.

    Family A: ``||u||^2 - D - lam B``; B: ``||u||^2 - D - lam ||u||_{p+1}^{p+1}``;
    C: ``||u||^2 - ||u||_{2*}^{2*} - lam B``.

    Raises
    ------
    DegenerateInputError
        For the zero field.
    """
    if not np.any(u.values):
        raise DegenerateInputError("zero field has no Nehari residual")
    bd = energy(u, params, potentials, scalar, **kw)
    norm, terms = ray_terms(bd, params, _coupling(params, kw.get("lam")))
    return norm - sum(c * e for c, e in terms)


def _ray_energy(t, norm, terms):
    return 0.5 * norm * t * t - sum(c * t**e for c, e in terms)


def _ray_root(norm: float, terms: list, max_iter: int = 200) -> float:
    """Unique ``t > 0`` with ``norm = sum c e t^(e-2)``."""
    def f(t):
        return norm - sum(c * e * t ** (e - 2.0) for c, e in terms)

    def df(t):
        return -sum(c * e * (e - 2.0) * t ** (e - 3.0) for c, e in terms)

    lo = hi = 1.0
    it = 0
    if f(1.0) > 0.0:
        while f(hi) > 0.0:
            lo, hi = hi, 2.0 * hi
            it += 1
            if it > max_iter:
                raise ConvergenceError("no Nehari bracket found while expanding t")
    else:
        while f(lo) <= 0.0:
            hi, lo = lo, 0.5 * lo
            it += 1
            if it > max_iter:
                raise ConvergenceError("no Nehari bracket found while shrinking t")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    t = 0.5 * (lo + hi)
    for _ in range(5):
        d = df(t)
        if d == 0.0:
            break
        step = f(t) / d
        t_new = t - step
        if not lo * (1 - 1e-12) <= t_new <= hi * (1 + 1e-12):
            break
        t = t_new
        if abs(step) <= 1e-16 * t:
            break
    return t


def nehari_project(u: ComplexField, params: ProblemParams, potentials: PotentialSet,
                   scalar: str = "periodic", *, check_max: bool = True, **kw):
    """Rescale ``u`` onto the Nehari manifold.

    Returns ``(t_u, t_u * u)`` where ``t_u`` is the unique positive root of
    the family's Nehari equation, found by bracketing, bisection and a
    Newton polish.

    Raises
    ------
    DegenerateInputError
        Zero field, or every nonlinear part below ``1e-14 ||u||^2``.
    ConvergenceError
        No bracket within 200 doublings/halvings.
    NumericalAccuracyError
        Residual at ``t_u u`` above ``1e-10 ||t_u u||^2``, or ``J(t_u u)``
        below the maximum of ``J(tu)`` on a 1000-point log grid.
    """
    if not np.any(u.values):
        raise DegenerateInputError("zero field cannot be projected onto the Nehari manifold")
    lam = _coupling(params, kw.get("lam"))
    bd = energy(u, params, potentials, scalar, **kw)
    norm, terms = ray_terms(bd, params, lam)
    if sum(c * e for c, e in terms) <= 1e-14 * norm:
        raise DegenerateInputError("all nonlinear terms vanish on this field")
    t = _ray_root(norm, terms)
    res = t * t * (norm - sum(c * e * t ** (e - 2.0) for c, e in terms))
    if abs(res) > 1e-10 * t * t * norm:
        raise NumericalAccuracyError(f"Nehari residual {res:.3e} after projection")
    if check_max:
        ts = t * np.logspace(-2.0, 2.0, 1000)
        grid_max = float(np.max(_ray_energy(ts, norm, terms)))
        jt = _ray_energy(t, norm, terms)
        if jt < grid_max - 1e-12 * max(1.0, abs(jt)):
            raise NumericalAccuracyError("projected point is not the maximum of the fibering map")
    return t, u * t


@dataclass(frozen=True)
class FiberingTable:
    """``J(t u)`` on a t-grid plus the refined interior maximum.

    ``at_endpoint`` flags a grid maximum at the first or last grid point,
    in which case ``t_max`` is not trustworthy.
    """

    t: np.ndarray
    values: np.ndarray
    t_max: float
    sup: float
    grid_argmax: int
    at_endpoint: bool
    sign_change: Optional[float]
    norm_sq: float
    terms: tuple

    def rows(self):
        return list(zip(self.t.tolist(), self.values.tolist()))


def fibering_scan(u: ComplexField, params: ProblemParams, potentials: PotentialSet,
                  scalar: str = "periodic", t_grid=None, *, breakdown: Optional[EnergyBreakdown] = None,
                  **kw) -> FiberingTable:
    """Tabulate ``g(t) = J(t u)`` from one energy evaluation.

    The interior maximum is refined by a bounded scalar search between the
    neighbours of the grid argmax. ``sign_change`` is the first ``t`` where
    ``J(tu)`` turns negative, linearly interpolated (``None`` if it never does).
    """
    if not np.any(u.values):
        raise DegenerateInputError("zero field has a trivial fibering map")
    lam = _coupling(params, kw.get("lam"))
    bd = breakdown if breakdown is not None else energy(u, params, potentials, scalar, **kw)
    norm, terms = ray_terms(bd, params, lam)
    if t_grid is None:
        t_grid = np.logspace(-3.0, 2.0, 1000)
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(t <= 0.0) or np.any(np.diff(t) <= 0.0):
        raise ValidationError("t_grid must be an increasing 1-D array of positive values with >= 2 points")
    vals = 0.5 * norm * t**2
    for c, e in terms:
        vals = vals - c * t**e
    k = int(np.argmax(vals))
    endpoint = k in (0, t.size - 1)
    if endpoint:
        t_max, sup = float(t[k]), float(vals[k])
    else:
        res = optimize.minimize_scalar(
            lambda s: -_ray_energy(s, norm, terms), bounds=(t[k - 1], t[k + 1]),
            method="bounded", options={"xatol": 1e-14 * t[k]},
        )
        t_max, sup = float(res.x), float(-res.fun)
        if sup < vals[k]:
            t_max, sup = float(t[k]), float(vals[k])
    neg = np.flatnonzero(vals < 0.0)
    crossing = None
    if neg.size and neg[0] > 0:
        i = neg[0]
        t0, t1, v0, v1 = t[i - 1], t[i], vals[i - 1], vals[i]
        crossing = float(t0 + (t1 - t0) * v0 / (v0 - v1))
    return FiberingTable(t, vals, t_max, sup, k, endpoint, crossing, norm, tuple(terms))


def ray_maximizer(norm: float, terms) -> float:
    """Exact maximizer of ``t -> 1/2 norm t^2 - sum c t^e`` (same root as the Nehari equation)."""
    return _ray_root(norm, list(terms))


def ray_energy(t: float, norm: float, terms) -> float:
    return _ray_energy(t, norm, list(terms))


def energy_scale(bd: EnergyBreakdown) -> float:
    """Magnitude used to normalise energy comparisons."""
    return max(abs(bd.total), bd.norm_sq, math.ulp(1.0))
