"""Periodic-box discretization: grids, complex fields, potentials and norms.

The covariant gradient uses central differences with Peierls link phases,

    (D_j u)(x) = [e^{i theta_j(x)} u(x + h e_j) - e^{-i theta_j(x - h e_j)} u(x - h e_j)] / (2h),

where ``theta_j(x)`` is the line integral of ``A_j`` from ``x`` to ``x + h e_j``.
This reduces to ``d_j u + i A_j u`` as ``h -> 0``. It is exactly covariant under
lattice gauge changes ``u -> e^{-i chi} u, A -> A + grad chi``, and it satisfies
the diamagnetic inequality pointwise because ``||a| - |b|| <= |a - b|``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "Grid",
    "ComplexField",
    "PotentialSpec",
    "PotentialSet",
    "DiamagneticReport",
    "DEFAULT_SPEC",
    "make_grid",
    "sample_potentials",
    "covariant_gradient",
    "covariant_gradient_adjoint",
    "magnetic_norm_sq",
    "magnetic_cross_term",
    "lp_norm",
    "diamagnetic_check",
    "save_field",
    "load_field",
]

STENCILS = ("central", "spectral")


def _fft_size_ok(n: int) -> bool:
    """Even, with no prime factor above 5 (powers of two, 48, 96, ...)."""
    if n % 2:
        return False
    for f in (2, 3, 5):
        while n % f == 0:
            n //= f
    return n == 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic box ``[-L/2, L/2)^dim`` with ``n`` points per axis.

    ``n`` is even and 5-smooth so every FFT length factors into small primes.

    Sample ``i`` along an axis sits at ``-L/2 + i*h``, so index ``n//2`` is
    the box center (the origin).
    """

    dim: int
    points_per_axis: int
    box_length: float

    def __post_init__(self):
        n = self.points_per_axis
        if int(self.dim) != self.dim or not 1 <= self.dim <= 4:
            raise ValidationError(f"dim must be 1..4, got {self.dim}")
        if int(n) != n or n < 8 or not _fft_size_ok(int(n)):
            raise ValidationError(f"points_per_axis must be an even 5-smooth integer >= 8, got {n}")
        if not (self.box_length > 0.0 and math.isfinite(self.box_length)):
            raise ValidationError(f"box_length must be positive, got {self.box_length}")

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def total_points(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def center_index(self) -> tuple:
        return (self.points_per_axis // 2,) * self.dim

    def axis(self) -> np.ndarray:
        return -0.5 * self.box_length + self.spacing * np.arange(self.points_per_axis)

    def mesh(self) -> list:
        """Coordinate arrays, one per axis, each of full grid shape."""
        return np.meshgrid(*([self.axis()] * self.dim), indexing="ij")

    def radius(self, center: Optional[Sequence[float]] = None) -> np.ndarray:
        xs = self.mesh()
        if center is None:
            center = (0.0,) * self.dim
        return np.sqrt(sum((x - c) ** 2 for x, c in zip(xs, center)))

    def wavenumbers(self) -> list:
        """Angular wavenumbers ``2 pi m / L`` on the FFT lattice, full grid shape."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)
        return np.meshgrid(*([k] * self.dim), indexing="ij")

    def to_dict(self) -> dict:
        return {"dim": self.dim, "points_per_axis": self.points_per_axis, "box_length": self.box_length}


def make_grid(dim: int, points_per_axis: int, box_length: float) -> Grid:
    return Grid(int(dim), int(points_per_axis), float(box_length))


class ComplexField:
    """Complex samples on a :class:`Grid`; the value array is read-only.

    Supports ``+``, ``-`` with another field on the same grid and
    multiplication by a scalar, which is all the energy checks need.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=np.complex128)
        if arr.size != grid.total_points:
            raise ValidationError(
                f"field has {arr.size} samples, grid expects {grid.total_points}"
            )
        arr = arr.reshape(grid.shape)
        if not np.all(np.isfinite(arr)):
            raise ValidationError("field samples must be finite")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    @classmethod
    def zeros(cls, grid: Grid) -> "ComplexField":
        return cls(grid, np.zeros(grid.shape))

    def _other(self, other):
        if not isinstance(other, ComplexField):
            return NotImplemented
        check_same_grid(self.grid, other.grid)
        return other.values

    def __add__(self, other):
        v = self._other(other)
        return v if v is NotImplemented else ComplexField(self.grid, self.values + v)

    def __sub__(self, other):
        v = self._other(other)
        return v if v is NotImplemented else ComplexField(self.grid, self.values - v)

    def __mul__(self, t):
        if isinstance(t, ComplexField):
            return NotImplemented
        return ComplexField(self.grid, self.values * t)

    __rmul__ = __mul__

    def __neg__(self):
        return ComplexField(self.grid, -self.values)

    def shifted(self, offsets: Sequence[int]) -> "ComplexField":
        """Periodic translation by whole grid cells."""
        return ComplexField(self.grid, np.roll(self.values, tuple(offsets), axis=tuple(range(self.grid.dim))))

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def l2_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume)

    def inner(self, other: "ComplexField") -> float:
        """Real part of the L^2 pairing ``sum(u * conj(v)) h^N``."""
        v = self._other(other)
        return float(np.real(np.vdot(v, self.values)) * self.grid.cell_volume)

    def __repr__(self):
        g = self.grid
        return f"ComplexField(dim={g.dim}, n={g.points_per_axis}, L={g.box_length})"


def check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise ValidationError(f"grid mismatch: {a} vs {b}")


def _as_values(u, grid: Optional[Grid] = None) -> np.ndarray:
    if isinstance(u, ComplexField):
        if grid is not None:
            check_same_grid(u.grid, grid)
        return u.values
    return np.asarray(u)


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class PotentialSpec:
    """Closed-form periodic potentials on the box.

    ``magnetic``:
        ``"zero"``: ``A = 0``.
        ``"constant"``: ``A = (a0, 0, ...)``.
        ``"sine"``: ``A = (a0 sin(2 pi x_2 / L), 0, ...)`` (``x_1`` when ``dim == 1``).

    ``gauge_shift = g`` adds ``grad chi`` with ``chi = g sin(2 pi x_1/L) cos(2 pi x_N/L)``.

    ``V_P = v0 + v1 prod_i cos^2(2 pi x_i / L)``. ``W`` is ``w0 exp(-|x - x0|^2 / sigma^2)``,
    set to zero beyond ``w_cutoff * sigma``.
    """

    magnetic: str = "zero"
    a0: float = 0.0
    gauge_shift: float = 0.0
    v0: float = 1.0
    v1: float = 0.0
    w0: float = 0.0
    w_sigma: float = 1.0
    w_center: Optional[tuple] = None
    w_cutoff: float = 4.0

    def __post_init__(self):
        if self.magnetic not in ("zero", "constant", "sine"):
            raise ValidationError(f"unknown magnetic potential kind {self.magnetic!r}")
        if self.w0 < 0.0:
            raise ValidationError("perturbation amplitude w0 must be >= 0")
        if self.w_sigma <= 0.0:
            raise ValidationError("w_sigma must be > 0")
        if self.w_center is not None:
            object.__setattr__(self, "w_center", tuple(float(c) for c in self.w_center))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        if d["w_center"] is not None:
            d["w_center"] = list(d["w_center"])
        return d

    # closed forms, evaluated on arbitrary coordinate arrays

    def vector_potential(self, xs: Sequence[np.ndarray], L: float) -> list:
        dim = len(xs)
        comps = [np.zeros_like(xs[0], dtype=float) for _ in range(dim)]
        if self.magnetic == "constant":
            comps[0] = comps[0] + self.a0
        elif self.magnetic == "sine":
            other = xs[1] if dim > 1 else xs[0]
            comps[0] = comps[0] + self.a0 * np.sin(2.0 * np.pi * other / L)
        if self.gauge_shift:
            k = 2.0 * np.pi / L
            g = self.gauge_shift
            if dim == 1:
                comps[0] = comps[0] + g * k * np.cos(k * xs[0])
            else:
                comps[0] = comps[0] + g * k * np.cos(k * xs[0]) * np.cos(k * xs[-1])
                comps[-1] = comps[-1] - g * k * np.sin(k * xs[0]) * np.sin(k * xs[-1])
        return comps

    def periodic_scalar(self, xs, L):
        prod = np.ones_like(xs[0], dtype=float)
        for x in xs:
            prod = prod * np.cos(2.0 * np.pi * x / L) ** 2
        return self.v0 + self.v1 * prod

    def perturbation(self, xs, L):
        if self.w0 == 0.0:
            return np.zeros_like(xs[0], dtype=float)
        center = self.w_center if self.w_center is not None else (0.0,) * len(xs)
        r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
        w = self.w0 * np.exp(-r2 / self.w_sigma**2)
        w[r2 > (self.w_cutoff * self.w_sigma) ** 2] = 0.0
        return w


# Magnetic sine field, periodic scalar with its minimum at the box center,
# Gaussian well of depth 0.2 at the center.
DEFAULT_SPEC = PotentialSpec(magnetic="sine", a0=0.5, v0=1.25, v1=-0.25, w0=0.2, w_sigma=1.0)


@dataclass(frozen=True, eq=False)
class PotentialSet:
    """Sampled potentials on a grid.

    ``link_factors[j]`` holds ``exp(i theta_j)`` for the link from each point
    to its ``+e_j`` neighbour. ``v_min`` and ``w_min`` record the sampled
    ``V_0 = min V_P`` and ``W_0 = min V``.
    """

    grid: Grid
    vector_potential: tuple
    periodic_scalar: np.ndarray
    perturbation: np.ndarray
    effective_scalar: np.ndarray
    link_factors: tuple
    spec: Optional[PotentialSpec] = None
    v_min: float = field(init=False)
    w_min: float = field(init=False)

    def __post_init__(self):
        vp, w, v = self.periodic_scalar, self.perturbation, self.effective_scalar
        for arr in (vp, w, v, *self.vector_potential):
            arr.setflags(write=False)
        vmin = float(vp.min())
        if not vmin > 0.0:
            raise ValidationError(f"periodic potential violates V_P >= V0 > 0: min V_P = {vmin:.6g}")
        if float(w.min()) < 0.0:
            raise ValidationError(f"perturbation must be >= 0: min W = {float(w.min()):.6g}")
        wmin = float(v.min())
        if not wmin > 0.0:
            raise ValidationError(
                f"effective potential violates V = V_P - W >= W0 > 0: min V = {wmin:.6g}"
            )
        object.__setattr__(self, "v_min", vmin)
        object.__setattr__(self, "w_min", wmin)

    @property
    def is_magnetic(self) -> bool:
        return any(np.any(a != 0.0) for a in self.vector_potential)

    def scalar(self, which: str) -> np.ndarray:
        if which == "periodic":
            return self.periodic_scalar
        if which == "effective":
            return self.effective_scalar
        raise ValidationError(f"scalar must be 'periodic' or 'effective', got {which!r}")

    def with_perturbation_scale(self, factor: float) -> "PotentialSet":
        w = self.perturbation * factor
        return PotentialSet(
            self.grid, self.vector_potential, self.periodic_scalar, w,
            self.periodic_scalar - w, self.link_factors, None,
        )

    @classmethod
    def from_arrays(cls, grid: Grid, vector_potential=None, periodic_scalar=1.0, perturbation=0.0):
        """Build from sampled arrays; link phases use the trapezoid rule."""
        shape = grid.shape
        if vector_potential is None:
            vector_potential = [np.zeros(shape)] * grid.dim
        A = tuple(np.broadcast_to(np.asarray(a, float), shape).copy() for a in vector_potential)
        if len(A) != grid.dim:
            raise ValidationError("vector potential needs one component per axis")
        vp = np.broadcast_to(np.asarray(periodic_scalar, float), shape).copy()
        w = np.broadcast_to(np.asarray(perturbation, float), shape).copy()
        h = grid.spacing
        links = tuple(
            np.exp(0.5j * h * (a + np.roll(a, -1, axis=j))) for j, a in enumerate(A)
        )
        return cls(grid, A, vp, w, vp - w, links, None)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def sample_potentials(grid: Grid, spec: PotentialSpec = PotentialSpec()) -> PotentialSet:
    """Sample a closed-form :class:`PotentialSpec` on ``grid``.

    Link phases are 8-point Gauss-Legendre line integrals of the closed-form
    ``A`` along each lattice link.

    Raises
    ------
    ValidationError
        If a sampled potential breaks ``V_P > 0``, ``W >= 0`` or ``V_P - W > 0``;
        the message reports the offending minimum.
    """
    L, h = grid.box_length, grid.spacing
    xs = grid.mesh()
    A = tuple(spec.vector_potential(xs, L))
    links = []
    for j in range(grid.dim):
        theta = np.zeros(grid.shape)
        for s, wgt in zip(_GL_NODES, _GL_WEIGHTS):
            shifted = list(xs)
            shifted[j] = xs[j] + 0.5 * h * (s + 1.0)
            theta += 0.5 * h * wgt * spec.vector_potential(shifted, L)[j]
        links.append(np.exp(1j * theta))
    vp = spec.periodic_scalar(xs, L)
    w = spec.perturbation(xs, L)
    return PotentialSet(grid, A, vp, w, vp - w, tuple(links), spec)


# ---------------------------------------------------------------------------
# covariant derivatives


def _spectral_derivative(u: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(grid.points_per_axis, d=grid.spacing)
    k[grid.points_per_axis // 2] = 0.0  # Nyquist mode has no odd derivative
    shape = [1] * grid.dim
    shape[axis] = -1
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(u, axis=axis), axis=axis)


def _cov_grad(u: np.ndarray, pot: PotentialSet, stencil: str) -> list:
    grid = pot.grid
    h = grid.spacing
    out = []
    for j in range(grid.dim):
        if stencil == "central":
            a = pot.link_factors[j]
            fwd = a * np.roll(u, -1, axis=j)
            bwd = np.conj(np.roll(a, 1, axis=j)) * np.roll(u, 1, axis=j)
            out.append((fwd - bwd) / (2.0 * h))
        elif stencil == "spectral":
            out.append(_spectral_derivative(u, grid, j) + 1j * pot.vector_potential[j] * u)
        else:
            raise ValidationError(f"stencil must be one of {STENCILS}, got {stencil!r}")
    return out


def _cov_grad_adjoint(ws: Sequence[np.ndarray], pot: PotentialSet, stencil: str) -> np.ndarray:
    grid = pot.grid
    h = grid.spacing
    total = np.zeros(grid.shape, dtype=np.complex128)
    for j, w in enumerate(ws):
        if stencil == "central":
            a = pot.link_factors[j]
            total += (np.conj(np.roll(a, 1, axis=j)) * np.roll(w, 1, axis=j) - a * np.roll(w, -1, axis=j)) / (2.0 * h)
        elif stencil == "spectral":
            total -= _spectral_derivative(w, grid, j) + 1j * pot.vector_potential[j] * w
        else:
            raise ValidationError(f"stencil must be one of {STENCILS}, got {stencil!r}")
    return total


def covariant_gradient(u: ComplexField, potentials: PotentialSet, stencil: str = "central") -> list:
    """Components of ``grad u + i A u`` as a list of :class:`ComplexField`."""
    check_same_grid(u.grid, potentials.grid)
    return [ComplexField(u.grid, c) for c in _cov_grad(u.values, potentials, stencil)]


def covariant_gradient_adjoint(components, potentials: PotentialSet, stencil: str = "central") -> ComplexField:
    """L^2 adjoint of :func:`covariant_gradient`; ``D* D`` approximates ``-(grad + iA)^2``."""
    ws = [_as_values(c, potentials.grid) for c in components]
    return ComplexField(potentials.grid, _cov_grad_adjoint(ws, potentials, stencil))


def magnetic_norm_sq(u: ComplexField, potentials: PotentialSet, scalar: str = "periodic",
                     stencil: str = "central") -> float:
    """``sum(|D_A u|^2 + V |u|^2) h^N`` with ``V`` chosen by ``scalar``."""
    check_same_grid(u.grid, potentials.grid)
    v = potentials.scalar(scalar)
    grads = _cov_grad(u.values, potentials, stencil)
    dens = sum(np.abs(g) ** 2 for g in grads) + v * np.abs(u.values) ** 2
    return float(np.sum(dens) * u.grid.cell_volume)


def magnetic_cross_term(u: ComplexField, potentials: PotentialSet) -> float:
    """Diagnostic ``2 sum A . Im(conj(u) grad u) h^N`` (central differences, no link phases).

    Zero for real ``u``; it is the piece dropped when ``|grad_A u|^2`` is
    expanded as ``|grad u|^2 + |A|^2 |u|^2``.
    """
    check_same_grid(u.grid, potentials.grid)
    h = u.grid.spacing
    v = u.values
    total = 0.0
    for j, a in enumerate(potentials.vector_potential):
        d = (np.roll(v, -1, axis=j) - np.roll(v, 1, axis=j)) / (2.0 * h)
        total += float(np.sum(a * np.imag(np.conj(v) * d)))
    return 2.0 * total * u.grid.cell_volume


def lp_norm(u, p: float) -> float:
    """Discrete ``L^p`` norm ``(sum |u|^p h^N)^(1/p)``; ``p = inf`` gives the max."""
    if not p >= 1.0:
        raise ValidationError(f"lp_norm needs p >= 1, got {p}")
    a = u.abs()
    if math.isinf(p):
        return float(a.max())
    return float((np.sum(a**p) * u.grid.cell_volume) ** (1.0 / p))


@dataclass(frozen=True)
class DiamagneticReport:
    fraction_satisfied: float
    max_violation: float
    tol: float


def diamagnetic_check(u: ComplexField, potentials: PotentialSet, tol: Optional[float] = None,
                      stencil: str = "central") -> DiamagneticReport:
    """Compare ``|grad |u||`` with ``|grad u + iAu|`` point by point.

    Both sides use the same stencil; ``tol`` defaults to ``10 * spacing``.
    ``max_violation`` is ``max(|grad|u|| - |grad_A u|)`` (negative when the
    inequality holds strictly everywhere).
    """
    check_same_grid(u.grid, potentials.grid)
    if tol is None:
        tol = 10.0 * u.grid.spacing
    free = PotentialSet.from_arrays(u.grid)
    mod = np.abs(u.values).astype(np.complex128)
    lhs = np.sqrt(sum(np.abs(g) ** 2 for g in _cov_grad(mod, free, stencil)))
    rhs = np.sqrt(sum(np.abs(g) ** 2 for g in _cov_grad(u.values, potentials, stencil)))
    ok = lhs <= rhs + tol
    return DiamagneticReport(float(np.mean(ok)), float(np.max(lhs - rhs)), float(tol))


# ---------------------------------------------------------------------------
# snapshots


def save_field(path, u: ComplexField):
    """Write a ``.cfd`` snapshot: one JSON header line, then little-endian (re, im) float64 pairs."""
    header = dict(u.grid.to_dict(), dtype="c128")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(u.values, dtype="<c16").tobytes(order="C"))


def load_field(path) -> ComplexField:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        if header.get("dtype") != "c128":
            raise ValidationError(f"unsupported snapshot dtype {header.get('dtype')!r}")
        grid = make_grid(header["dim"], header["points_per_axis"], header["box_length"])
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != grid.total_points:
        raise ValidationError(f"snapshot holds {data.size} samples, header implies {grid.total_points}")
    return ComplexField(grid, data.reshape(grid.shape))
