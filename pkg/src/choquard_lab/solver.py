"""Ground states by Nehari-projected preconditioned gradient descent.

The iteration minimises ``Phi(u) = max_t J(t u) = J(t_u u)`` (the energy on
the Nehari manifold). On the manifold the gradient of ``Phi`` coincides with
the gradient of ``J``, so each step is

    v = u - tau P G(u),    u <- t_v v,

with ``P`` the inverse of ``(discrete -Laplacian + mean V)`` applied in
Fourier space and ``tau`` chosen by the two-point (Barzilai-Borwein) rule.
A step that raises ``Phi`` is halved.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.fft

from .constants import ProblemParams, ps_threshold
from .energy import EnergyBreakdown, energy_parts, get_plan, nehari_project, ray_energy, ray_maximizer, ray_terms
from .errors import ConvergenceError, ValidationError
from .field import ComplexField, Grid, PotentialSet, check_same_grid, save_field

__all__ = [
    "SolveConfig",
    "Solution",
    "initial_guess",
    "solve_ground_state",
    "VanishingReport",
    "vanishing_diagnostic",
    "LevelComparison",
    "compare_levels",
    "save_solution",
]

log = logging.getLogger(__name__)

STEP_RULES = ("fixed", "adaptive-two-point")
MAX_HALVINGS = 30


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 5000
    step_rule: str = "adaptive-two-point"
    step_init: float = 1e-2
    grad_tol: float = 1e-8
    reproject_every: int = 1
    seed: int = 0
    stencil: str = "central"
    init_width: float = 1.0
    noise: float = 0.05

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValidationError("max_iters must be an integer >= 1")
        if self.step_rule not in STEP_RULES:
            raise ValidationError(f"step_rule must be one of {STEP_RULES}")
        if not self.grad_tol > 0.0:
            raise ValidationError("grad_tol must be > 0")
        if not self.step_init > 0.0:
            raise ValidationError("step_init must be > 0")
        if int(self.reproject_every) != self.reproject_every or self.reproject_every < 1:
            raise ValidationError("reproject_every must be an integer >= 1")
        if not self.init_width > 0.0 or self.noise < 0.0:
            raise ValidationError("init_width must be > 0 and noise >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Solution:
    field: ComplexField
    energy: EnergyBreakdown
    residual: float
    iterations: int
    level: float
    converged: bool
    nehari_residual: float = 0.0
    history: tuple = ()
    stagnated: bool = False

    def summary(self) -> dict:
        return {"level": self.level, "residual": self.residual, "iterations": self.iterations,
                "converged": self.converged, "nehari_residual": self.nehari_residual,
                "stagnated": self.stagnated, "energy": self.energy.to_dict()}


def initial_guess(grid: Grid, config: SolveConfig) -> ComplexField:
    """Gaussian at the box centre times ``1 + noise * (smoothed seeded noise)``."""
    rng = np.random.default_rng(config.seed)
    r = grid.radius()
    base = np.exp(-(r / config.init_width) ** 2 / 2.0)
    raw = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    k2 = sum(k**2 for k in grid.wavenumbers())
    smooth = scipy.fft.ifftn(scipy.fft.fftn(raw) * np.exp(-k2 * config.init_width**2 / 2.0))
    smooth /= max(np.abs(smooth).max(), 1e-300)
    return ComplexField(grid, base * (1.0 + config.noise * smooth))


def _preconditioner(grid: Grid, pot: PotentialSet, scalar: str, stencil: str):
    h = grid.spacing
    if stencil == "central":
        sym = sum(np.sin(k * h) ** 2 for k in grid.wavenumbers()) / h**2
    else:
        sym = sum(k**2 for k in grid.wavenumbers())
    denom = sym + float(np.mean(pot.scalar(scalar)))

    def apply(g):
        return scipy.fft.ifftn(scipy.fft.fftn(g) / denom)

    return apply


def _inner(a, b, dv):
    return float(np.real(np.vdot(b, a))) * dv


def solve_ground_state(params: ProblemParams, potentials: PotentialSet, scalar: str = "periodic",
                       config: SolveConfig = SolveConfig(), *, init: Optional[ComplexField] = None,
                       lam: Optional[float] = None) -> Solution:
    """Search for a ground state of the chosen functional.

    ``scalar="periodic"`` minimises ``J`` (with ``V_P``), ``"effective"``
    minimises ``I`` (with ``V = V_P - W``). ``init`` is a warm start; by
    default :func:`initial_guess` seeded from ``config.seed``.

    ``converged`` requires the relative residual ``||G|| / ||u||`` below
    ``config.grad_tol`` and the Nehari residual below ``1e-8 ||u||^2``.
    Running out of iterations or step halvings returns an unconverged
    :class:`Solution` rather than raising.
    """
    grid = potentials.grid
    if grid.dim != params.dim:
        raise ValidationError(f"grid dimension {grid.dim} does not match N = {params.dim}")
    potentials.scalar(scalar)
    u = initial_guess(grid, config) if init is None else init
    check_same_grid(u.grid, grid)
    dv = grid.cell_volume
    plan = get_plan(grid, params.alpha)
    kw = dict(lam=lam, plan=plan, stencil=config.stencil)
    _, u = nehari_project(u, params, potentials, scalar, **kw)
    parts = energy_parts(u, params, potentials, scalar, **kw)
    lam_eff = parts.lam
    precond = _preconditioner(grid, potentials, scalar, config.stencil)

    vals = u.values
    grad = parts.gradient_values()
    phi = parts.breakdown.total
    history = [phi]
    tau = config.step_init
    prev_vals = prev_grad = None
    stagnated = False
    it = 0
    res = nres = math.inf
    while True:
        norm_u = math.sqrt(_inner(vals, vals, dv))
        res = math.sqrt(_inner(grad, grad, dv)) / norm_u
        nnorm, terms = ray_terms(parts.breakdown, params, lam_eff)
        nres = abs(nnorm - sum(c * e for c, e in terms)) / nnorm
        if (res <= config.grad_tol and nres <= 1e-8) or it >= config.max_iters:
            break
        pg = precond(grad)
        if config.step_rule == "adaptive-two-point" and prev_vals is not None:
            s = vals - prev_vals
            y = grad - prev_grad
            sy = _inner(s, y, dv)
            ypy = _inner(precond(y), y, dv)
            if sy > 0.0 and ypy > 0.0:
                tau = min(max(sy / ypy, 1e-8), 1e4)
        elif config.step_rule == "fixed":
            tau = config.step_init
        project = (it + 1) % config.reproject_every == 0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            cand = ComplexField(grid, vals - tau * pg)
            cparts = energy_parts(cand, params, potentials, scalar, **kw)
            cnorm, cterms = ray_terms(cparts.breakdown, params, lam_eff)
            if not cterms or sum(c * e for c, e in cterms) <= 1e-14 * cnorm:
                tau *= 0.5
                continue
            t = ray_maximizer(cnorm, cterms)
            cphi = ray_energy(t, cnorm, cterms)
            if cphi <= phi + 1e-12 * max(1.0, abs(phi)):
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            stagnated = True
            log.info("step halved %d times without descent at iteration %d", MAX_HALVINGS, it)
            break
        prev_vals, prev_grad = vals, grad
        if project:
            parts = cparts.scaled(t, params)
            vals = cand.values * t
        else:
            parts = cparts
            vals = cand.values
        grad = parts.gradient_values()
        phi = cphi
        history.append(phi)
        it += 1

    u = ComplexField(grid, vals)
    bd = parts.breakdown
    converged = bool(res <= config.grad_tol and nres <= 1e-8)
    return Solution(u, bd, float(res), it, float(bd.total), converged, float(nres), tuple(history), stagnated)


@dataclass(frozen=True)
class VanishingReport:
    max_ball_mass: float
    argmax_center: tuple
    radius: float


def vanishing_diagnostic(u: ComplexField, radius: float) -> VanishingReport:
    """Largest ``int_{B_r(y)} |u|^2`` over grid centres ``y`` (periodic balls).

    Raises
    ------
    ValidationError
        If ``radius`` is not below half the box length.
    """
    grid = u.grid
    if not 0.0 < radius < grid.box_length / 2.0:
        raise ValidationError(f"radius must lie in (0, {grid.box_length / 2}), got {radius}")
    n, h = grid.points_per_axis, grid.spacing
    m = np.arange(n)
    m = np.where(m >= n // 2, m - n, m) * h
    offs = np.meshgrid(*([m] * grid.dim), indexing="ij")
    ball = (sum(o**2 for o in offs) <= radius**2).astype(float)
    dens = np.abs(u.values) ** 2
    mass = scipy.fft.irfftn(scipy.fft.rfftn(dens) * scipy.fft.rfftn(ball), s=grid.shape) * grid.cell_volume
    k = np.unravel_index(int(np.argmax(mass)), grid.shape)
    center = tuple(float(-grid.box_length / 2.0 + i * h) for i in k)
    return VanishingReport(float(max(mass.max(), 0.0)), center, float(radius))


@dataclass(frozen=True)
class LevelComparison:
    c_level: float
    d_level: float
    gap: float
    threshold: float
    d_below_c: bool
    c_below_threshold: bool
    periodic: Solution = field(repr=False)
    effective: Solution = field(repr=False)

    def to_dict(self) -> dict:
        return {"c_level": self.c_level, "d_level": self.d_level, "gap": self.gap,
                "threshold": self.threshold, "d_below_c": self.d_below_c,
                "c_below_threshold": self.c_below_threshold,
                "periodic_iterations": self.periodic.iterations,
                "effective_iterations": self.effective.iterations}


def compare_levels(params: ProblemParams, potentials: PotentialSet, config: SolveConfig = SolveConfig(),
                   **kw) -> LevelComparison:
    """Solve with ``V_P`` and with ``V = V_P - W`` from the same seed and compare levels.

    Raises
    ------
    ConvergenceError
        If either solve does not converge.
    """
    sol_c = solve_ground_state(params, potentials, "periodic", config, **kw)
    if not sol_c.converged:
        raise ConvergenceError(
            f"periodic solve did not converge: residual {sol_c.residual:.3e} after {sol_c.iterations} iterations")
    sol_d = solve_ground_state(params, potentials, "effective", config, **kw)
    if not sol_d.converged:
        raise ConvergenceError(
            f"perturbed solve did not converge: residual {sol_d.residual:.3e} after {sol_d.iterations} iterations")
    thr = ps_threshold(params)
    gap = sol_c.level - sol_d.level
    return LevelComparison(sol_c.level, sol_d.level, gap, thr, bool(sol_d.level < sol_c.level),
                           bool(sol_c.level < thr), sol_c, sol_d)


def save_solution(path, solution: Solution, params: ProblemParams, seed: int, extra: Optional[dict] = None):
    """Write ``<path>.cfd`` and the sidecar ``<path>.json``; returns both paths."""
    path = Path(path)
    stem = path.with_suffix("") if path.suffix == ".cfd" else path
    cfd = stem.with_suffix(".cfd")
    side = stem.with_suffix(".json")
    save_field(cfd, solution.field)
    meta = {"params": params.to_dict(), "levels": {"level": solution.level},
            "residual": solution.residual, "iterations": solution.iterations, "seed": seed,
            "converged": solution.converged, "energy": solution.energy.to_dict()}
    if extra:
        meta.update(extra)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return cfd, side
