"""Effective-medium limit of a dense periodic cloud.

For identical spheres on a lattice of spacing ``d`` the cloud behaves like an
absorbing medium of strength ``mu = cap / d**3`` occupying a ball ``B_r``.
The transmission problem

    Delta u - mu (chi_omega u - 1) = 0  in B_R,   du/dn = 0 on the sphere,

with continuous value and flux across ``|x| = r``, has a closed-form radial
solution.  ``HomogenizedBallSolution.raw`` is the profile with unit source
term (``Delta u - mu chi u + 1 = 0``) and mean ``1/mu`` over the cloud;
``value`` is ``mu * raw``, which solves the problem above and satisfies
``|Omega|^{-1} int_omega u = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .coefficients import CoefficientSet, lambda_leading_value
from .errors import GeometryNotLattice
from .geometry import Cluster


def effective_mu(cap_inclusion: float, cell: float) -> float:
    """``mu = cap / cell**3``."""
    if cap_inclusion <= 0 or cell <= 0:
        raise ValueError("capacity and cell size must be positive")
    return cap_inclusion / cell**3


@dataclass(frozen=True)
class HomogenizedBallSolution:
    R: float
    r: float
    mu: float

    def __post_init__(self):
        if not (0 < self.r < self.R) or self.mu <= 0:
            raise ValueError("need 0 < r < R and mu > 0")

    @property
    def s(self) -> float:
        return math.sqrt(self.mu)

    @property
    def inner_amplitude(self) -> float:
        s, r, R = self.s, self.r, self.R
        return (R**3 - r**3) / 3.0 / (s * r * math.cosh(s * r) - math.sinh(s * r))

    @property
    def outer_constant(self) -> float:
        s, r, R, mu = self.s, self.r, self.R, self.mu
        num = ((r**3 + 2 * R**3) * mu + 6 * r) * s * math.cosh(s * r) - (3 * r * r * mu + 6) * math.sinh(s * r)
        return num / (6.0 * mu * (s * r * math.cosh(s * r) - math.sinh(s * r)))

    @property
    def volume(self) -> float:
        return 4.0 * math.pi * self.R**3 / 3.0

    def raw(self, rho):
        """Closed-form radial profile with unit source (see module docstring)."""
        rho = np.abs(np.asarray(rho, dtype=float))
        s = self.s
        small = rho < 1e-6
        safe = np.where(small, 1.0, rho)
        shc = np.where(small, s * (1.0 + (s * rho) ** 2 / 6.0), np.sinh(s * safe) / safe)
        inner = self.inner_amplitude * shc + 1.0 / self.mu
        outer = -safe**2 / 6.0 - self.R**3 / (3.0 * safe) + self.outer_constant
        return np.where(rho < self.r, inner, outer)

    def raw_derivative(self, rho):
        rho = np.abs(np.asarray(rho, dtype=float))
        s = self.s
        safe = np.where(rho < 1e-6, 1.0, rho)
        dinner = self.inner_amplitude * (s * safe * np.cosh(s * safe) - np.sinh(s * safe)) / safe**2
        dinner = np.where(rho < 1e-6, self.inner_amplitude * s**3 * rho / 3.0, dinner)
        douter = -safe / 3.0 + self.R**3 / (3.0 * safe**2)
        return np.where(rho < self.r, dinner, douter)

    def raw_pieces(self, rho):
        """Inner and outer closed forms evaluated at the same radii (no switching)."""
        rho = np.asarray(rho, dtype=float)
        s = self.s
        inner = self.inner_amplitude * np.sinh(s * rho) / rho + 1.0 / self.mu
        outer = -rho**2 / 6.0 - self.R**3 / (3.0 * rho) + self.outer_constant
        dinner = self.inner_amplitude * (s * rho * np.cosh(s * rho) - np.sinh(s * rho)) / rho**2
        douter = -rho / 3.0 + self.R**3 / (3.0 * rho**2)
        return inner, outer, dinner, douter

    def value(self, rho):
        return self.mu * self.raw(rho)

    def derivative(self, rho):
        return self.mu * self.raw_derivative(rho)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return self.value(np.linalg.norm(x, axis=-1))

    def cloud_mean(self) -> float:
        """``|Omega|^{-1} int_omega u`` by adaptive quadrature (should be 1)."""
        val, _ = integrate.quad(lambda t: 4.0 * math.pi * t * t * float(self.value(t)), 0.0, self.r,
                                epsabs=0.0, epsrel=1e-13, limit=200)
        return val / self.volume

    def integral_equation_scale(self) -> float:
        """Factor ``m`` such that ``w = m u`` solves ``1 + w + mu int_omega G(x, y) w(y) dy = 0``.

        With ``G(0, y) = 1/(4 pi |y|) + 5/(8 pi R)`` the equation is imposed at
        the centre; its Laplacian reproduces the transmission problem, so the
        identity then holds throughout the cloud.
        """
        R, mu = self.R, self.mu
        val, _ = integrate.quad(
            lambda t: 4.0 * math.pi * t * t * (1.0 / (4.0 * math.pi * t) + 5.0 / (8.0 * math.pi * R)) * float(self.value(t)),
            0.0, self.r, epsabs=0.0, epsrel=1e-13, limit=200,
        )
        return -1.0 / (float(self.value(0.0)) + mu * val)


@dataclass(frozen=True)
class HomogenizedResiduals:
    value_jump: float  # relative
    flux_jump: float  # relative
    neumann_analytic: float
    neumann_fd: float
    pde_inner: float
    pde_outer: float
    normalization_error: float  # relative

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _laplacian_fd(f, pts, h):
    """Six-neighbour stencil."""
    lap = -6.0 * f(pts)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        lap = lap + f(pts + e) + f(pts - e)
    return lap / (h * h)


def pde_residual(sol: HomogenizedBallSolution, pts, h: float, extrapolate: bool = True):
    """``Delta u - mu (chi u - 1)`` by finite differences at the given points.

    With ``extrapolate`` the stencils with steps ``h`` and ``2h`` are combined
    so the truncation error is fourth order.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    f = sol.evaluate
    lap = _laplacian_fd(f, pts, h)
    if extrapolate:
        lap = (4.0 * lap - _laplacian_fd(f, pts, 2.0 * h)) / 3.0
    chi = (np.linalg.norm(pts, axis=1) < sol.r).astype(float)
    return lap - sol.mu * (chi * f(pts) - 1.0)


def _radial_sample_points(lo, hi, n, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rho = np.linspace(lo, hi, n)
    return rho[:, None] * u


def verify_solution(sol: HomogenizedBallSolution, h: float = 1e-2, samples: int = 64) -> HomogenizedResiduals:
    """Transmission, Neumann, PDE and normalization checks."""
    inner, outer, dinner, douter = sol.raw_pieces(np.array([sol.r]))
    value_jump = abs(inner[0] - outer[0]) / max(abs(inner[0]), abs(outer[0]))
    flux_jump = abs(dinner[0] - douter[0]) / max(abs(dinner[0]), abs(douter[0]))
    R = sol.R
    neu_an = abs(float(sol.derivative(R)))
    hh = 1e-4 * R
    u0, u1, u2 = (float(sol.value(R - k * hh)) for k in range(3))
    neu_fd = abs((3 * u0 - 4 * u1 + u2) / (2 * hh))
    margin = 2.5 * h
    p_in = _radial_sample_points(margin, sol.r - margin, samples, seed=1)
    p_out = _radial_sample_points(sol.r + margin, R - margin, samples, seed=2)
    pde_in = float(np.abs(pde_residual(sol, p_in, h)).max())
    pde_out = float(np.abs(pde_residual(sol, p_out, h)).max())
    return HomogenizedResiduals(
        value_jump=float(value_jump),
        flux_jump=float(flux_jump),
        neumann_analytic=neu_an,
        neumann_fd=neu_fd,
        pde_inner=pde_in,
        pde_outer=pde_out,
        normalization_error=abs(sol.cloud_mean() - 1.0),
    )


# --- lattice comparison ------------------------------------------------------

@dataclass(frozen=True)
class LatticeComparison:
    n_inclusions: int
    cell: float
    mu: float
    r: float
    scale: float
    Lambda1: float
    lambda_homogenized: float
    rms_plus: float
    rms_minus: float
    rms_scaled: float
    max_scaled: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def lattice_parameters(cluster: Cluster, rtol: float = 1e-9) -> tuple[float, float]:
    """Common sphere radius and lattice spacing; raises if the cloud is not a lattice."""
    if len(cluster) < 2:
        raise GeometryNotLattice("a lattice needs at least two inclusions")
    radii = cluster.radii
    if np.ptp(radii) > rtol * radii.max():
        raise GeometryNotLattice("inclusions do not share a common radius")
    dist, _ = cKDTree(cluster.centers).query(cluster.centers, k=2)
    nn = dist[:, 1]
    if np.ptp(nn) > rtol * nn.max():
        raise GeometryNotLattice("nearest-neighbour distances are not uniform")
    return float(radii[0]), float(nn.min())


def compare_lattice_to_homogenized(cluster: Cluster, coeffs: CoefficientSet, r: float | None = None) -> LatticeComparison:
    """Compare ``C_j`` with the homogenized field at the centres.

    ``r`` defaults to the radius of the ball with the same volume as the
    ``N`` lattice cells.  Reports the RMS mismatch against ``+u``, ``-u`` and
    the integral-equation rescaling ``m u``, and the eigenvalue estimate
    ``-m mu`` obtained by replacing the sum in the leading formula by an
    integral.
    """
    rad, cell = lattice_parameters(cluster)
    n = len(cluster)
    if r is None:
        r = (3.0 * n / (4.0 * math.pi)) ** (1.0 / 3.0) * cell
    mu = effective_mu(4.0 * math.pi * rad, cell)
    sol = HomogenizedBallSolution(cluster.domain.radius, r, mu)
    m = sol.integral_equation_scale()
    u = sol.evaluate(cluster.centers)
    C = coeffs.C
    rms = lambda v: float(np.sqrt(np.mean(v**2)))
    return LatticeComparison(
        n_inclusions=n,
        cell=cell,
        mu=mu,
        r=r,
        scale=m,
        Lambda1=lambda_leading_value(cluster, C),
        lambda_homogenized=-m * mu,
        rms_plus=rms(C - u),
        rms_minus=rms(C + u),
        rms_scaled=rms(C - m * u),
        max_scaled=float(np.abs(C - m * u).max()),
    )
