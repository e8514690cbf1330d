"""Aubin-Talenti bubble, the cut-off family ``u_eps`` and the level estimates built on it.

``U(x) = [N(N-2)]^((N-2)/4) (1 + |x|^2)^(-(N-2)/2)``, ``U_eps(x) = eps^((2-N)/2) U(x/eps)``
and ``u_eps = psi U_eps`` with ``psi = 1`` on ``B_delta`` and ``psi = 0`` outside
``B_{2 delta}``. All fields are centred at the box centre.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .constants import Family, ProblemParams, case_window, ps_threshold, radial_power_integral, sphere_area
from .energy import EnergyBreakdown, energy, fibering_scan, ray_energy, ray_maximizer, ray_terms
from .errors import NumericalAccuracyError, ValidationError
from .field import ComplexField, Grid, PotentialSet

__all__ = [
    "BubbleParams",
    "eta_exponent",
    "talenti_bubble",
    "talenti_profile",
    "cutoff",
    "cutoff_derivative",
    "make_u_eps",
    "closed_form_I3",
    "closed_form_I4",
    "ball_mass_radial",
    "MassReport",
    "l2_mass_integral",
    "ScanTable",
    "divergence_scan",
    "annulus_tail_scan",
    "gradient_energy_radial",
    "choquard_deficit_radial",
    "Case1Report",
    "case1_check",
    "case2_scan",
    "dyadic_sequence",
]

PROFILES = ("smoothstep", "mollified")


def eta_exponent(dim: int, alpha: float) -> float:
    """``eta = min(N - 2, (2N - alpha)/2)``."""
    return min(dim - 2.0, (2.0 * dim - alpha) / 2.0)


@dataclass(frozen=True)
class BubbleParams:
    """Concentration ``eps``, cut-off radius ``delta`` and the ``(N, alpha)`` that fix ``eta``."""

    eps: float
    delta: float
    dim: int = 3
    alpha: float = 1.0
    cutoff_profile: str = "smoothstep"
    eta: float = field(init=False)

    def __post_init__(self):
        if not self.eps > 0.0 or not self.delta > 0.0:
            raise ValidationError("eps and delta must be > 0")
        if not self.eps < self.delta:
            raise ValidationError(f"need eps < delta, got eps={self.eps}, delta={self.delta}")
        if self.dim < 3:
            raise ValidationError("the bubble needs dim >= 3")
        if not 0.0 < self.alpha < self.dim:
            raise ValidationError(f"alpha must lie in (0, {self.dim})")
        if self.cutoff_profile not in PROFILES:
            raise ValidationError(f"cutoff_profile must be one of {PROFILES}")
        object.__setattr__(self, "eta", eta_exponent(self.dim, self.alpha))

    def with_eps(self, eps: float) -> "BubbleParams":
        return BubbleParams(eps, self.delta, self.dim, self.alpha, self.cutoff_profile)

    def check_grid(self, grid: Grid):
        if grid.dim != self.dim:
            raise ValidationError(f"grid dimension {grid.dim} does not match bubble dimension {self.dim}")
        if not 2.0 * self.delta < grid.box_length / 2.0:
            raise ValidationError(
                f"cut-off support 2*delta = {2 * self.delta} must be < half the box ({grid.box_length / 2})"
            )

    def to_dict(self) -> dict:
        return {"eps": self.eps, "delta": self.delta, "dim": self.dim, "alpha": self.alpha,
                "cutoff_profile": self.cutoff_profile, "eta": self.eta}


def dyadic_sequence(k_first: int, k_last: int) -> np.ndarray:
    """``2^-k`` for ``k = k_first .. k_last``."""
    return 2.0 ** -np.arange(k_first, k_last + 1, dtype=float)


# ---------------------------------------------------------------------------
# profiles


def talenti_profile(r, dim: int):
    """Radial profile of ``U``."""
    n = float(dim)
    r = np.asarray(r, dtype=float)
    return (n * (n - 2.0)) ** ((n - 2.0) / 4.0) * (1.0 + r * r) ** (-(n - 2.0) / 2.0)


def _talenti_derivative(r, dim):
    n = float(dim)
    r = np.asarray(r, dtype=float)
    return -(n - 2.0) * (n * (n - 2.0)) ** ((n - 2.0) / 4.0) * r * (1.0 + r * r) ** (-n / 2.0)


def _step(x, profile):
    """Monotone transition 0 -> 1 on [0, 1]."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    if profile == "smoothstep":
        return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0.0, np.exp(-1.0 / np.where(x > 0.0, x, 1.0)), 0.0)
        b = np.where(x < 1.0, np.exp(-1.0 / np.where(x < 1.0, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def _step_derivative(x, profile):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xi = np.where(inside, x, 0.5)
    if profile == "smoothstep":
        d = 30.0 * xi**2 * (1.0 - xi) ** 2
    else:
        a = np.exp(-1.0 / xi)
        b = np.exp(-1.0 / (1.0 - xi))
        da = a / xi**2
        db = -b / (1.0 - xi) ** 2
        d = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return np.where(inside, d, 0.0)


def cutoff(r, delta: float, profile: str = "smoothstep"):
    """``psi(r)``: 1 on ``[0, delta]``, 0 from ``2 delta`` on."""
    return 1.0 - _step((np.asarray(r, dtype=float) - delta) / delta, profile)


def cutoff_derivative(r, delta: float, profile: str = "smoothstep"):
    return -_step_derivative((np.asarray(r, dtype=float) - delta) / delta, profile) / delta


def talenti_bubble(grid: Grid) -> ComplexField:
    """``U`` sampled on ``grid``, centred at the box centre."""
    if grid.dim < 3:
        raise ValidationError("the bubble needs dim >= 3")
    return ComplexField(grid, talenti_profile(grid.radius(), grid.dim))


def _u_eps_radial(r, bp: BubbleParams):
    n = bp.dim
    return bp.eps ** ((2.0 - n) / 2.0) * talenti_profile(np.asarray(r) / bp.eps, n) * cutoff(r, bp.delta, bp.cutoff_profile)


def make_u_eps(grid: Grid, bp: BubbleParams) -> ComplexField:
    """``u_eps = psi U_eps`` on ``grid``.

    Raises
    ------
    ValidationError
        If ``2 delta`` reaches half the box length or the dimensions differ.
    """
    bp.check_grid(grid)
    return ComplexField(grid, _u_eps_radial(grid.radius(), bp))


# ---------------------------------------------------------------------------
# closed forms and the ball mass


def closed_form_I3(eps: float, delta: float) -> float:
    """``eps^2 int_0^{delta/eps} r^2/(1+r^2) dr = eps (delta - eps arctan(delta/eps))``."""
    _pos(eps, delta)
    return eps * (delta - eps * math.atan(delta / eps))


def closed_form_I4(eps: float, delta: float) -> float:
    """``eps^2 int_0^{delta/eps} r^3/(1+r^2)^2 dr``.

    Equals ``(eps^2/2) [ln(1 + delta^2/eps^2) + eps^2/(eps^2 + delta^2) - 1]``;
    the bracket is evaluated with ``log1p`` and a rearranged difference so the
    small-``delta/eps`` end keeps full precision.
    """
    _pos(eps, delta)
    x = (delta / eps) ** 2
    # 1/(1+x) - 1 = -x/(1+x)
    return 0.5 * eps * eps * (math.log1p(x) - x / (1.0 + x))


def _pos(eps, delta):
    if not eps > 0.0 or not delta > 0.0:
        raise ValidationError("eps and delta must be > 0")


def _mass_integral(dim: int, upper: float) -> float:
    """``int_0^upper r^(N-1) (1+r^2)^(-(N-2)) dr``."""
    if dim == 3:
        return upper - math.atan(upper)
    if dim == 4:
        x = upper * upper
        return 0.5 * (math.log1p(x) - x / (1.0 + x))
    # dyadic panels keep quad accurate when upper = delta/eps is huge
    return radial_power_integral(dim - 1.0, dim - 2.0, upper, tol=1e-12)


def ball_mass_radial(dim: int, eps: float, delta: float) -> float:
    """``int_{B_delta} |U_eps|^2`` from the radial formula."""
    _pos(eps, delta)
    n = float(dim)
    pref = sphere_area(dim) * (n * (n - 2.0)) ** ((n - 2.0) / 2.0)
    return pref * eps * eps * _mass_integral(dim, delta / eps)


@dataclass(frozen=True)
class MassReport:
    grid_value: float
    radial_value: float
    rel_diff: float


def l2_mass_integral(grid: Grid, bp: BubbleParams, *, subsamples: int = 6) -> MassReport:
    """``int_{B_delta} |u_eps|^2`` two ways: Cartesian cells and the radial formula.

    Cells wholly inside the ball use the sampled field; cells cut by the
    sphere are subsampled with ``subsamples^N`` midpoints.

    Raises
    ------
    NumericalAccuracyError
        If the two values differ by more than 5e-2 relative.
    """
    bp.check_grid(grid)
    h, dv = grid.spacing, grid.cell_volume
    u = make_u_eps(grid, bp).values.real
    r = grid.radius()
    half_diag = 0.5 * h * math.sqrt(grid.dim)
    inner = r + half_diag <= bp.delta
    total = float(np.sum(u[inner] ** 2) * dv)
    cut = np.abs(r - bp.delta) < half_diag
    offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    sub = np.stack(np.meshgrid(*([offs * h] * grid.dim), indexing="ij"), axis=-1).reshape(-1, grid.dim)
    centers = np.stack([x[cut] for x in grid.mesh()], axis=-1)
    for c in centers:
        rr = np.sqrt(np.sum((c + sub) ** 2, axis=1))
        vals = _u_eps_radial(rr, bp) ** 2
        total += float(np.sum(vals[rr <= bp.delta]) * dv / sub.shape[0])
    radial = ball_mass_radial(grid.dim, bp.eps, bp.delta)
    rel = abs(total - radial) / radial
    if rel > 5e-2:
        raise NumericalAccuracyError(f"ball mass: grid {total:.6g} vs radial {radial:.6g} (rel {rel:.2e})")
    return MassReport(total, radial, rel)


# ---------------------------------------------------------------------------
# asymptotic scans


@dataclass(frozen=True)
class ScanTable:
    """One row per scan parameter, plus per-row flags.

    ``columns`` names the entries of each row; the first column is the
    scanned parameter.
    """

    columns: tuple
    rows: list
    summary: dict

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([row[k] for row in self.rows])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(x) for x in row])

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [[_plain(x) for x in r] for r in self.rows],
                "summary": {k: _plain(v) for k, v in self.summary.items()}}


def _plain(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _fmt(x):
    x = _plain(x)
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return x


def _regime(params: ProblemParams) -> str:
    n, a = params.dim, params.alpha
    if n == 3:
        return "N=3"
    if n == 4:
        return "N=4"
    return "N>=5,alpha<4" if a < 4.0 else "N>=5,alpha>=4"


def _scaled_mass(dim: int, alpha: float, eps: float, delta: float) -> float:
    """``eps^-eta int_{B_delta} |U_eps|^2`` without forming the tiny product."""
    n = float(dim)
    eta = eta_exponent(dim, alpha)
    pref = sphere_area(dim) * (n * (n - 2.0)) ** ((n - 2.0) / 2.0)
    if dim == 3:
        # eps^-1 * eps (delta - eps atan(delta/eps)); eta = 1 for every alpha in (0, 3)
        return pref * (delta - eps * math.atan(delta / eps)) * eps ** (1.0 - eta)
    return pref * eps ** (2.0 - eta) * _mass_integral(dim, delta / eps)


def divergence_scan(params: ProblemParams, bp_base: BubbleParams, eps_sequence: Sequence[float],
                    c2: float = 1.0, c3: float = 1.0) -> ScanTable:
    """Tabulate ``I_eps = eps^-eta (C2 int_{B_delta} |u_eps|^2 - C3 eps^(2N - alpha - (N-2)p))``.

    The ball mass uses the closed forms for ``N = 3, 4`` and quadrature above.
    ``summary["strictly_decreasing"]`` is true when ``I_eps`` drops at every
    step of the (decreasing) sequence.

    Raises
    ------
    ValidationError
        If ``p`` is outside the window where any coupling works, or the
        family has no Choquard subcritical term.
    """
    if params.family is Family.B:
        raise ValidationError("divergence_scan applies to the Choquard subcritical term (families A and C)")
    if case_window(params) != 1:
        raise ValidationError(
            f"regime mismatch: p = {params.p} is outside the window where the estimate holds for every lambda"
        )
    if not c2 > 0.0 or not c3 > 0.0:
        raise ValidationError("C2 and C3 must be > 0")
    eps_seq = np.asarray(eps_sequence, dtype=float)
    if eps_seq.size < 2 or np.any(np.diff(eps_seq) >= 0.0) or np.any(eps_seq <= 0.0):
        raise ValidationError("eps_sequence must be positive and strictly decreasing with >= 2 entries")
    n, a, p = params.dim, params.alpha, params.p
    eta = eta_exponent(n, a)
    expo = 2.0 * n - a - (n - 2.0) * p
    rows = []
    prev = None
    for eps in eps_seq:
        mass_part = c2 * _scaled_mass(n, a, float(eps), bp_base.delta)
        sub_part = c3 * float(eps) ** (expo - eta)
        val = mass_part - sub_part
        dec = bool(prev is not None and val < prev)
        rows.append((float(eps), val, mass_part, sub_part, dec))
        prev = val
    flags = [r[-1] for r in rows[1:]]
    return ScanTable(
        ("epsilon", "I_eps", "mass_term", "subcritical_term", "decreasing"),
        rows,
        {"regime": _regime(params), "eta": eta, "exponent": expo,
         "strictly_decreasing": all(flags)},
    )


def annulus_tail_scan(params: ProblemParams, bp_base: BubbleParams, eps_sequence: Sequence[float],
                      c2: float = 1.0) -> ScanTable:
    """``eps^-eta C2 int_{B_{2 delta} \\ B_delta} |u_eps|^2`` over ``eps_sequence``.

    Because ``U_eps(r) <= c eps^((N-2)/2) r^(2-N)``, every row is bounded by
    ``C2 |S^{N-1}| c^2 int_delta^{2 delta} psi^2 r^(3-N) dr`` times
    ``eps^(N-2-eta) <= 1``; ``summary["bounded"]`` checks each row against it.
    """
    n = params.dim
    eta = eta_exponent(n, params.alpha)
    delta, prof = bp_base.delta, bp_base.cutoff_profile
    area = sphere_area(n)
    c_sq = (n * (n - 2.0)) ** ((n - 2.0) / 2.0)
    bound_int, _ = integrate.quad(lambda r: cutoff(r, delta, prof) ** 2 * r ** (3.0 - n), delta, 2 * delta,
                                  epsabs=0.0, epsrel=1e-12)
    rows = []
    for eps in np.asarray(eps_sequence, dtype=float):
        bp = BubbleParams(float(eps), delta, n, params.alpha, prof)
        val, _ = integrate.quad(lambda r: _u_eps_radial(r, bp) ** 2 * r ** (n - 1.0), delta, 2 * delta,
                                epsabs=0.0, epsrel=1e-12)
        scaled = c2 * area * val * float(eps) ** (-eta)
        bound = c2 * area * c_sq * bound_int * float(eps) ** (n - 2.0 - eta)
        rows.append((float(eps), scaled, bound, bool(scaled <= bound * (1.0 + 1e-9))))
    return ScanTable(("epsilon", "tail", "bound", "within_bound"), rows,
                     {"eta": eta, "bounded": all(r[-1] for r in rows)})


def _radial_quad(f, a, b, points=()):
    edges = sorted({a, b, *[x for x in points if a < x < b]})
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=400)
        total += v
    return total


def gradient_energy_radial(bp: BubbleParams) -> float:
    """``int |grad u_eps|^2`` by radial quadrature (no grid)."""
    n, eps, delta = bp.dim, bp.eps, bp.delta
    scale = eps ** ((2.0 - n) / 2.0)

    def integrand(r):
        psi = cutoff(r, delta, bp.cutoff_profile)
        dpsi = cutoff_derivative(r, delta, bp.cutoff_profile)
        u = scale * talenti_profile(r / eps, n)
        du = scale / eps * _talenti_derivative(r / eps, n)
        return float((dpsi * u + psi * du) ** 2 * r ** (n - 1.0))

    pts = [eps * 2.0**k for k in range(-4, 40) if eps * 2.0**k < delta] + [delta]
    return sphere_area(n) * _radial_quad(integrand, 0.0, 2.0 * delta, pts)


def _shell_kernel_3d(r, s, alpha):
    """Angular average ``int_{S^2} |r e - s w|^-alpha dw`` (N = 3)."""
    if abs(alpha - 2.0) < 1e-14:
        return 2.0 * math.pi / (r * s) * math.log((r + s) / abs(r - s)) if r != s else math.inf
    return 2.0 * math.pi * ((r + s) ** (2.0 - alpha) - abs(r - s) ** (2.0 - alpha)) / ((2.0 - alpha) * r * s)


def choquard_deficit_radial(bp: BubbleParams) -> float:
    """``D(U_eps) - D(u_eps)`` for ``N = 3`` by nested radial quadrature.

    With ``f = U_eps^s`` and ``g = u_eps^s`` (``s = 2_alpha^*``) the
    difference is ``int int (f - g)(r) (f + g)(s) K(r, s)``, ``K`` being the
    angular average of the Riesz kernel. ``f - g`` vanishes on ``B_delta``.
    """
    if bp.dim != 3:
        raise ValidationError("the radial deficit is implemented for N = 3")
    a, eps, delta = bp.alpha, bp.eps, bp.delta
    s = (6.0 - a)
    scale = eps ** -0.5

    def U(r):
        return scale * float(talenti_profile(r / eps, 3))

    def psi(r):
        return float(cutoff(r, delta, bp.cutoff_profile))

    def inner(r):
        def h(t):
            ut = U(t) ** s
            return ut * (1.0 + psi(t) ** s) * t * t * _shell_kernel_3d(r, t, a)
        pts = [eps * 2.0**k for k in range(-4, 40) if eps * 2.0**k < r] + [r, delta, 2 * delta]
        tail_start = max(4.0 * delta, 2.0 * r)
        body = _radial_quad(h, 0.0, tail_start, pts)
        tail, _ = integrate.quad(h, tail_start, math.inf, epsabs=0.0, epsrel=1e-10, limit=400)
        return body + tail

    def outer(r):
        diff = U(r) ** s * (1.0 - psi(r) ** s)
        return diff * r * r * inner(r)

    body = _radial_quad(outer, delta, 4.0 * delta, [1.5 * delta, 2.0 * delta])
    tail, _ = integrate.quad(outer, 4.0 * delta, math.inf, epsabs=0.0, epsrel=1e-8, limit=200)
    return body + tail


# ---------------------------------------------------------------------------
# mountain-pass level estimates


@dataclass(frozen=True)
class Case1Report:
    sup_tJ: float
    threshold: float
    margin: float
    t_max: float
    at_endpoint: bool
    resolution_warning: bool
    in_window: bool
    energy: EnergyBreakdown

    def to_dict(self) -> dict:
        d = {k: _plain(v) for k, v in self.__dict__.items() if k != "energy"}
        d["energy"] = self.energy.to_dict()
        return d


def case1_check(params: ProblemParams, potentials: PotentialSet, bp: BubbleParams,
                t_grid=None) -> Case1Report:
    """Compare ``sup_t J(t u_eps)`` on ``t_grid`` with the compactness threshold.

    ``margin = threshold - sup`` is reported, never raised on.
    ``resolution_warning`` is set when the maximum sits at a ``t_grid``
    endpoint or when the grid spacing exceeds ``eps``. Outside the
    any-coupling window the sup is still a valid upper bound for the level;
    ``in_window`` records which case applies.
    """
    grid = potentials.grid
    u = make_u_eps(grid, bp)
    bd = energy(u, params, potentials, "periodic")
    if t_grid is None:
        t_grid = np.logspace(-2.0, 1.0, 1000)
    table = fibering_scan(u, params, potentials, "periodic", t_grid, breakdown=bd)
    thr = ps_threshold(params)
    warn = bool(table.at_endpoint or grid.spacing > bp.eps)
    return Case1Report(table.sup, thr, thr - table.sup, table.t_max, table.at_endpoint, warn,
                       case_window(params) == 1, bd)


def case2_scan(params: ProblemParams, potentials: PotentialSet, bp: BubbleParams,
               lambda_sequence: Sequence[float]) -> ScanTable:
    """``(lambda, t_lambda, sup_t J)`` for the fixed bubble ``u_eps``.

    Per row: ``t_lambda`` decreased from the previous row, and
    ``sup_t J <= (t_lambda^2 / 2) ||u_eps||^2``. The summary records whether
    ``t_lambda`` decreased throughout and whether the last row is below the
    threshold.
    """
    if case_window(params) != 2:
        raise ValidationError("case2_scan needs parameters in the large-lambda window")
    lams = [float(x) for x in lambda_sequence]
    if not lams or any(not x > 0.0 for x in lams):
        raise ValidationError("every lambda must be > 0")
    u = make_u_eps(potentials.grid, bp)
    bd = energy(u, params, potentials, "periodic")
    thr = ps_threshold(params)
    rows, prev = [], None
    for lam in lams:
        norm, terms = ray_terms(bd, params, lam)
        t = ray_maximizer(norm, terms)
        sup = ray_energy(t, norm, terms)
        dec = bool(prev is not None and t < prev)
        rows.append((lam, t, sup, 0.5 * t * t * norm, dec, bool(sup <= 0.5 * t * t * norm), bool(sup < thr)))
        prev = t
    summary = {
        "threshold": thr,
        "t_strictly_decreasing": all(r[4] for r in rows[1:]),
        "last_below_threshold": rows[-1][6],
    }
    return ScanTable(("lambda", "t_lambda", "sup_tJ", "quadratic_bound", "t_decreased", "bound_ok", "below_threshold"),
                     rows, summary)
