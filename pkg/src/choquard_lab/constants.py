"""Problem parameters, sharp constants and Palais-Smale threshold levels.

All functions here are pure and scalar; nothing touches a grid.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

from scipy import integrate

from .errors import NumericalAccuracyError, ValidationError

__all__ = [
    "Family",
    "ProblemParams",
    "ConstantsReport",
    "gamma",
    "sphere_area",
    "hls_sharp_constant",
    "radial_power_integral",
    "sobolev_closed_form",
    "sobolev_quadrature",
    "best_sobolev_constant",
    "shl_constant",
    "ps_threshold",
    "constants_report",
    "case_window",
]


class Family(str, Enum):
    """Nonlinearity family added to the critical Choquard term."""

    A = "A"  # lambda * Choquard term with exponent p
    B = "B"  # lambda * |u|^{p-1} u
    C = "C"  # lambda * Choquard(p) + critical Sobolev power replaces D


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, Riesz exponent, subcritical exponent, coupling and family.

    Ranges are checked on construction; a bad combination raises
    :class:`~choquard_lab.errors.ValidationError`.
    """

    dim: int
    alpha: float
    p: float
    lam: float = 1.0
    family: Family = Family.A

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        n, a, p = self.dim, self.alpha, self.p
        if int(n) != n or n < 3:
            raise ValidationError(f"dim must be an integer >= 3, got {n}")
        if not 0.0 < a < n:
            raise ValidationError(f"alpha must lie in (0, {n}), got {a}")
        if not self.lam > 0.0:
            raise ValidationError(f"lambda must be > 0, got {self.lam}")
        if self.family is Family.B:
            lo, hi = 1.0, self.two_star - 1.0
        else:
            lo, hi = self.lower_exponent, self.two_alpha_star
        if not lo < p < hi:
            raise ValidationError(
                f"family {self.family.value}: p must lie in ({lo:.6g}, {hi:.6g}), got {p}"
            )

    @property
    def two_alpha_star(self) -> float:
        """Upper critical HLS exponent (2N - alpha)/(N - 2)."""
        return (2.0 * self.dim - self.alpha) / (self.dim - 2.0)

    @property
    def lower_exponent(self) -> float:
        """Lower critical HLS exponent (2N - alpha)/N."""
        return (2.0 * self.dim - self.alpha) / self.dim

    @property
    def two_star(self) -> float:
        return 2.0 * self.dim / (self.dim - 2.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.value
        return d


@dataclass(frozen=True)
class ConstantsReport:
    hls_constant: float
    sobolev: float
    shl: float
    threshold: float


# Lanczos approximation, g = 7, nine terms.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_GAMMA_OVERFLOW = 171.6243769563027


def gamma(x: float) -> float:
    """Euler Gamma function for real ``x > 0``.

    Lanczos series on ``[1.5, inf)``; smaller arguments are shifted up with
    the recurrence ``Gamma(x) = Gamma(x + k) / (x (x+1) ... (x+k-1))``.

    Raises
    ------
    ValidationError
        ``x <= 0`` (or not finite).
    OverflowError
        ``Gamma(x)`` exceeds the double range.
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise ValidationError(f"gamma is defined here only for x > 0, got {x}")
    if x > _GAMMA_OVERFLOW:
        raise OverflowError(f"gamma({x}) overflows a double")
    shift = 1.0
    while x < 1.5:
        shift *= x
        x += 1.0
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for k in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    # split the power so t**(z + 0.5) cannot overflow before exp(-t) is applied
    half = t ** (0.5 * (z + 0.5))
    return math.sqrt(2.0 * math.pi) * half * (half * math.exp(-t)) * acc / shift


def sphere_area(dim: int) -> float:
    """Surface area N * omega_N of the unit sphere in R^N."""
    return 2.0 * math.pi ** (dim / 2.0) / gamma(dim / 2.0)


def _check_dim_alpha(dim, alpha):
    if int(dim) != dim or dim < 3:
        raise ValidationError(f"dim must be an integer >= 3, got {dim}")
    if not 0.0 < alpha < dim:
        raise ValidationError(f"alpha must lie in (0, {dim}), got {alpha}")


def hls_sharp_constant(dim: int, alpha: float) -> float:
    """Sharp Hardy-Littlewood-Sobolev constant C(N, alpha) for t = r = 2N/(2N - alpha)."""
    _check_dim_alpha(dim, alpha)
    n, a = float(dim), float(alpha)
    return (
        math.pi ** (a / 2.0)
        * gamma(n / 2.0 - a / 2.0)
        / gamma(n - a / 2.0)
        * (gamma(n / 2.0) / gamma(n)) ** (-1.0 + a / n)
    )


def _binomial_tail(a: float, b: float, R: float, rel: float = 1e-17) -> float:
    """Integral of r^a (1+r^2)^-b over (R, inf) from the binomial series.

    Uses r^a (1+r^2)^-b = sum_k binom(-b, k) r^(a - 2b - 2k), valid for R > 1.
    """
    total = 0.0
    coef = 1.0
    for k in range(200):
        expo = a - 2.0 * b - 2.0 * k + 1.0
        term = coef * R**expo / (-expo)
        total += term
        if abs(term) <= rel * abs(total):
            return total
        coef *= (-b - k) / (k + 1.0)
    raise NumericalAccuracyError("binomial tail series did not converge")


def radial_power_integral(a: float, b: float, upper: float = math.inf, *, tol: float = 1e-13) -> float:
    """Integral of ``r**a * (1 + r**2)**(-b)`` over ``(0, upper)``.

    Composite adaptive quadrature on dyadic panels ``[0, 1], [1, 2], [2, 4], ...``.
    For ``upper = inf`` the panels stop at ``R = 16`` and the remaining tail is
    summed from its convergent binomial series, so the polynomial decay is
    never truncated.

    Raises
    ------
    NumericalAccuracyError
        If a panel's error estimate exceeds ``tol`` relative to the total.
    """
    if a <= -1.0:
        raise ValidationError("need a > -1 for integrability at r = 0")
    infinite = math.isinf(upper)
    if infinite and 2.0 * b - a <= 1.0:
        raise ValidationError("need 2b - a > 1 for integrability at infinity")
    if upper <= 0.0:
        return 0.0
    stop = 16.0 if infinite else upper
    edges = [0.0, min(1.0, stop)]
    while edges[-1] < stop:
        edges.append(min(2.0 * edges[-1], stop))

    def f(r):
        return r**a * (1.0 + r * r) ** (-b)

    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=max(tol, 1e-13), limit=200)
        total += val
        err += e
    if infinite:
        total += _binomial_tail(a, b, stop)
    if err > tol * abs(total) + 1e-300:
        raise NumericalAccuracyError(f"radial quadrature error {err:.3e} exceeds tolerance")
    return total


def sobolev_closed_form(dim: int) -> float:
    """S = pi N (N-2) (Gamma(N/2)/Gamma(N))^(2/N)."""
    n = float(dim)
    return math.pi * n * (n - 2.0) * (gamma(n / 2.0) / gamma(n)) ** (2.0 / n)


def sobolev_quadrature(dim: int) -> float:
    """Sobolev quotient of the Aubin-Talenti bubble by radial quadrature.

    ``U(r) = c (1 + r^2)^{-(N-2)/2}`` with ``c = [N(N-2)]^{(N-2)/4}``, so
    ``|U'|^2 = c^2 (N-2)^2 r^2 (1+r^2)^{-N}`` and ``U^{2*} = c^{2*} (1+r^2)^{-N}``.
    """
    n = float(dim)
    two_star = 2.0 * n / (n - 2.0)
    c = (n * (n - 2.0)) ** ((n - 2.0) / 4.0)
    area = sphere_area(dim)
    grad = area * c**2 * (n - 2.0) ** 2 * radial_power_integral(n + 1.0, n)
    crit = area * c**two_star * radial_power_integral(n - 1.0, n)
    return grad / crit ** (2.0 / two_star)


def best_sobolev_constant(dim: int, *, rtol: float = 1e-6) -> float:
    """Best Sobolev constant of D^{1,2}(R^N) -> L^{2*}(R^N).

    The closed form is returned only after it agrees with the bubble
    quadrature to ``rtol``.

    Raises
    ------
    NumericalAccuracyError
        If the two routes disagree.
    """
    if int(dim) != dim or dim < 3:
        raise ValidationError(f"dim must be an integer >= 3, got {dim}")
    closed = sobolev_closed_form(dim)
    quad = sobolev_quadrature(dim)
    if abs(closed - quad) > rtol * abs(closed):
        raise NumericalAccuracyError(
            f"Sobolev constant routes disagree: closed form {closed!r}, quadrature {quad!r}"
        )
    return closed


def shl_constant(dim: int, alpha: float) -> float:
    """S_{H,L} = S / C(N, alpha)^((N-2)/(2N-alpha)); equals the magnetic S_A."""
    c = hls_sharp_constant(dim, alpha)
    return best_sobolev_constant(dim) / c ** ((dim - 2.0) / (2.0 * dim - alpha))


def ps_threshold(params: ProblemParams) -> float:
    """Energy level below which Palais-Smale sequences are compact.

    Families A and B: ``(N+2-alpha)/(2(2N-alpha)) * S_HL^((2N-alpha)/(N+2-alpha))``.
    Family C: ``S^(N/2) / N``.
    """
    n, a = params.dim, params.alpha
    if params.family is Family.C:
        return best_sobolev_constant(n) ** (n / 2.0) / n
    pref = (n + 2.0 - a) / (2.0 * (2.0 * n - a))
    return pref * shl_constant(n, a) ** ((2.0 * n - a) / (n + 2.0 - a))


def constants_report(params: ProblemParams) -> ConstantsReport:
    return ConstantsReport(
        hls_constant=hls_sharp_constant(params.dim, params.alpha),
        sobolev=best_sobolev_constant(params.dim),
        shl=shl_constant(params.dim, params.alpha),
        threshold=ps_threshold(params),
    )


def case_window(params: ProblemParams) -> int:
    """Which branch of the level estimate applies: 1 (any lambda) or 2 (lambda large).

    Families A and C share one set of windows; family B has its own.
    """
    n, a, p = params.dim, params.alpha, params.p
    if params.family is Family.B:
        if n == 3:
            return 1 if 3.0 < p < 5.0 else 2
        return 1
    if n in (3, 4):
        edge = (n + 2.0 - a) / (n - 2.0)
    else:
        edge = (2.0 * n - 2.0 - a) / (n - 2.0)
    return 1 if p > edge else 2
