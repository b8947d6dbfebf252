"""Eigenvalue approximations and the eigenfield of the perforated ball.

The leading field is

    u(x) = 1 + sum_j C_j { P_j(x) - cap_j (H(x, O_j) - Gamma_j) }

with ``P_j`` the capacitary potential of sphere ``j``.  The higher-order
field adds the ``A_j`` corrections, the dipole terms ``B_j . D_j`` and the
volume term ``Lambda_1 sum_j C_j cap_j int G(y, x) G(y, O_j) dy``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSet, lambda_leading_value
from .errors import PointInsideInclusion, PointOutsideDomain
from .geometry import Cluster, check_constraint
from .kernels import (
    KernelContext,
    QuadratureSpec,
    _regular_part,
    gamma_volume_potential,
    green_product_integral,
    worker_count,
)

LEADING_ORDER_TAG = "O(eps^2 d^-6)"
HIGHER_ORDER_TAG = "O(eps^5/2 d^-15/2)"


@dataclass(frozen=True)
class SpectralResult:
    Lambda1: float
    Lambda2: float | None
    lam: float
    eps: float
    d: float
    ratio: float
    constraint_satisfied: bool
    error_order_tag: str
    residual_diagnostics: dict = field(default_factory=dict)

    def as_report(self) -> dict:
        return {
            "Lambda1": self.Lambda1,
            "Lambda2": self.Lambda2,
            "lambda": self.lam,
            "eps": self.eps,
            "d": self.d if math.isfinite(self.d) else None,
            "ratio": self.ratio,
            "constraint_satisfied": self.constraint_satisfied,
            "error_order_tag": self.error_order_tag,
            "residual_diagnostics": self.residual_diagnostics,
        }


def lambda_leading(cluster: Cluster, coeffs: CoefficientSet) -> float:
    """``Lambda_1 = -|Omega|^{-1} sum_j C_j cap_j`` (zero without inclusions)."""
    return lambda_leading_value(cluster, coeffs.C)


def lambda_second(cluster: Cluster, coeffs: CoefficientSet, ctx: KernelContext, form: str = "corrected") -> float:
    """Second eigenvalue term ``Lambda_2``.

    ``form="corrected"`` (default) uses

        Lambda_2 = -|Omega|^{-1} sum_j cap_j (A_j + Lambda_1 C_j (|Omega| Gamma_j + kappa))

    where ``kappa = int_Omega G(y, O_j) dy`` is the (position independent)
    mean of the Neumann function.  ``form="printed"`` drops ``kappa`` and the
    volume factor, giving ``-|Omega|^{-1} sum_j cap_j (A_j + Lambda_1 C_j Gamma_j)``.
    """
    if coeffs.A is None:
        raise ValueError("higher-order coefficients A have not been computed")
    cap = cluster.capacities
    vol = ctx.volume
    L1 = lambda_leading_value(cluster, coeffs.C)
    gam = gamma_volume_potential(ctx, cluster.centers)
    if form == "corrected":
        inner = coeffs.A + L1 * coeffs.C * (vol * gam + ctx.neumann_mean)
    elif form == "printed":
        inner = coeffs.A + L1 * coeffs.C * gam
    else:
        raise ValueError(f"unknown form {form!r}")
    return float(-np.dot(cap, inner) / vol)


def _result(cluster, L1, L2, diagnostics, c_threshold=1.0):
    rep = check_constraint(cluster, c_threshold)
    lam = L1 if L2 is None else L1 + L2
    return SpectralResult(
        Lambda1=L1,
        Lambda2=L2,
        lam=lam,
        eps=cluster.eps,
        d=cluster.d,
        ratio=rep.ratio,
        constraint_satisfied=rep.satisfied,
        error_order_tag=LEADING_ORDER_TAG if L2 is None else HIGHER_ORDER_TAG,
        residual_diagnostics=dict(diagnostics),
    )


def leading_result(cluster: Cluster, coeffs: CoefficientSet, c_threshold: float = 1.0) -> SpectralResult:
    return _result(cluster, lambda_leading(cluster, coeffs), None, coeffs.diagnostics, c_threshold)


def lambda_higher(cluster: Cluster, coeffs: CoefficientSet, ctx: KernelContext, c_threshold: float = 1.0,
                  form: str = "corrected") -> SpectralResult:
    L1 = lambda_leading(cluster, coeffs)
    L2 = lambda_second(cluster, coeffs, ctx, form)
    return _result(cluster, L1, L2, coeffs.diagnostics, c_threshold)


# --- field evaluation -----------------------------------------------------------

@dataclass(frozen=True)
class FieldSample:
    point: tuple
    value: float | None
    region: str


def classify_points(cluster: Cluster, points, tol=1e-12):
    """Region tags: ``interior``, ``inclusion:<j>`` or ``outside-domain``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    tags = np.full(len(pts), "interior", dtype=object)
    outside = np.linalg.norm(pts, axis=1) > cluster.domain.radius * (1 + tol)
    tags[outside] = "outside-domain"
    for j, (c, r) in enumerate(zip(cluster.centers, cluster.radii)):
        inside = np.linalg.norm(pts - c, axis=1) < r * (1 - tol)
        tags[inside & ~outside] = f"inclusion:{j}"
    return tags


def _check_point(cluster, x):
    tag = classify_points(cluster, x)[0]
    if tag == "outside-domain":
        raise PointOutsideDomain(f"point {tuple(x)} lies outside the domain")
    if tag != "interior":
        raise PointInsideInclusion(f"point {tuple(x)} lies inside {tag}")


def _field_terms(cluster, ctx, pts):
    """Per-inclusion bracket ``P_j(x) - cap_j (H(x, O_j) - Gamma_j)``, shape (npts, N)."""
    R = ctx.radius
    c = cluster.centers
    r = cluster.radii
    cap = cluster.capacities
    gam = gamma_volume_potential(ctx, c)
    X = pts[:, None, :]
    Y = c[None, :, :]
    dist = np.linalg.norm(X - Y, axis=-1)
    with np.errstate(divide="ignore"):
        P = np.where(dist <= r, 1.0, r / dist)
    H = _regular_part(R, np.broadcast_to(X, dist.shape + (3,)), np.broadcast_to(Y, dist.shape + (3,)))
    return P - cap * (H - gam)


def leading_values(cluster: Cluster, coeffs_C, ctx: KernelContext, points) -> np.ndarray:
    """Vectorized leading field without admissibility checks."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(cluster) == 0:
        return np.ones(len(pts))
    return 1.0 + _field_terms(cluster, ctx, pts) @ np.asarray(coeffs_C, dtype=float)


def _dipole_values(cluster, B, pts):
    diff = pts[:, None, :] - cluster.centers[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    D = cluster.radii[None, :, None] ** 3 * diff / dist[..., None] ** 3
    return np.einsum("pjd,jd->p", D, B)


def _volume_term(cluster, coeffs, ctx, pts, quadrature):
    L1 = lambda_leading_value(cluster, coeffs.C)
    w = coeffs.C * cluster.capacities

    def one(p):
        return sum(w[j] * green_product_integral(ctx, p, cluster.centers[j], quadrature).value for j in range(len(w)))

    workers = min(worker_count(), len(pts)) or 1
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(one, list(pts)))
    else:
        vals = [one(p) for p in pts]
    return L1 * np.asarray(vals, dtype=float)


def higher_values(cluster: Cluster, coeffs: CoefficientSet, ctx: KernelContext, points,
                  quadrature: QuadratureSpec | None = None, include_volume: bool = True) -> np.ndarray:
    """Vectorized higher-order field without admissibility checks."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(cluster) == 0:
        return np.ones(len(pts))
    if coeffs.A is None or coeffs.B is None:
        raise ValueError("higher-order coefficients have not been computed")
    u = 1.0 + _field_terms(cluster, ctx, pts) @ (coeffs.C + coeffs.A)
    u += _dipole_values(cluster, coeffs.B, pts)
    # the beta group vanishes for spheres
    if include_volume:
        u += _volume_term(cluster, coeffs, ctx, pts, quadrature)
    return u


def eigenfield_leading(cluster: Cluster, coeffs: CoefficientSet, ctx: KernelContext, x) -> FieldSample:
    x = np.asarray(x, dtype=float).reshape(3)
    _check_point(cluster, x)
    return FieldSample(tuple(x), float(leading_values(cluster, coeffs.C, ctx, x)[0]), "interior")


def eigenfield_higher(cluster: Cluster, coeffs: CoefficientSet, ctx: KernelContext,
                      quadrature: QuadratureSpec | None, x) -> FieldSample:
    x = np.asarray(x, dtype=float).reshape(3)
    _check_point(cluster, x)
    return FieldSample(tuple(x), float(higher_values(cluster, coeffs, ctx, x, quadrature)[0]), "interior")


# --- grids --------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Plane grid (``axis``, ``offset``, ``nx``, ``ny``, ``extent``) or box grid.

    For a plane the two in-plane coordinates are the remaining axes in
    increasing order and ``extent = ((u0, u1), (v0, v1))``.  For a box,
    ``bounds = ((x0, x1), (y0, y1), (z0, z1))`` and ``nz`` is used.
    """

    kind: str = "plane"
    axis: int = 2
    offset: float = 0.0
    nx: int = 2
    ny: int = 2
    nz: int = 1
    extent: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    bounds: tuple = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))

    def points(self) -> np.ndarray:
        """Row-major points: the first in-plane index is slowest."""
        if self.kind == "plane":
            u = np.linspace(*self.extent[0], self.nx)
            v = np.linspace(*self.extent[1], self.ny)
            U, V = np.meshgrid(u, v, indexing="ij")
            others = [a for a in range(3) if a != self.axis]
            pts = np.empty((U.size, 3))
            pts[:, others[0]] = U.ravel()
            pts[:, others[1]] = V.ravel()
            pts[:, self.axis] = self.offset
            return pts
        if self.kind == "box":
            axes = [np.linspace(*b, n) for b, n in zip(self.bounds, (self.nx, self.ny, self.nz))]
            X, Y, Z = np.meshgrid(*axes, indexing="ij")
            return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
        raise ValueError(f"unknown grid kind {self.kind!r}")

    def cell_volume(self) -> float:
        if self.kind == "plane":
            (u0, u1), (v0, v1) = self.extent
            return abs(u1 - u0) / max(self.nx - 1, 1) * abs(v1 - v0) / max(self.ny - 1, 1)
        return float(np.prod([abs(b1 - b0) / max(n - 1, 1)
                              for (b0, b1), n in zip(self.bounds, (self.nx, self.ny, self.nz))]))


@dataclass(frozen=True, eq=False)
class FieldTable:
    points: np.ndarray
    values: np.ndarray  # NaN where not defined
    regions: np.ndarray

    def samples(self) -> list[FieldSample]:
        return [FieldSample(tuple(p), None if np.isnan(v) else float(v), t)
                for p, v, t in zip(self.points, self.values, self.regions)]


def field_grid(cluster: Cluster, coeffs: CoefficientSet, ctx: KernelContext, grid: GridSpec,
               higher: bool = False, quadrature: QuadratureSpec | None = None,
               normalize: bool = False) -> FieldTable:
    """Evaluate the field on a grid; points inside inclusions or outside the ball are null."""
    pts = grid.points()
    tags = classify_points(cluster, pts)
    ok = tags == "interior"
    vals = np.full(len(pts), np.nan)
    if ok.any():
        if higher:
            vals[ok] = higher_values(cluster, coeffs, ctx, pts[ok], quadrature)
        else:
            vals[ok] = leading_values(cluster, coeffs.C, ctx, pts[ok])
    if normalize and ok.any():
        norm = math.sqrt(np.nansum(vals**2) * grid.cell_volume())
        if norm > 0:
            vals = vals / norm
    return FieldTable(pts, vals, tags)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_field_csv(table: FieldTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "z", "u", "region"])
        for p, v, t in zip(table.points, table.values, table.regions):
            w.writerow([_fmt(p[0]), _fmt(p[1]), _fmt(p[2]), "" if np.isnan(v) else _fmt(v), t])


# --- residual diagnostics -----------------------------------------------------------

def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + 5.0**0.5) * i
    s = np.sqrt(1.0 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


@dataclass(frozen=True)
class ResidualReport:
    max_inclusion: float
    max_neumann: float
    inclusion_shape: float
    neumann_shape: float
    samples_per_inclusion: int

    @property
    def inclusion_ratio(self) -> float:
        return self.max_inclusion / self.inclusion_shape if self.inclusion_shape > 0 else math.inf

    @property
    def neumann_ratio(self) -> float:
        return self.max_neumann / self.neumann_shape if self.neumann_shape > 0 else math.inf

    def as_dict(self) -> dict:
        return {
            "max_inclusion_residual": self.max_inclusion,
            "max_neumann_residual": self.max_neumann,
            "inclusion_bound_shape": self.inclusion_shape,
            "neumann_bound_shape": self.neumann_shape,
            "inclusion_ratio": self.inclusion_ratio,
            "neumann_ratio": self.neumann_ratio,
            "samples_per_inclusion": self.samples_per_inclusion,
        }


def _bound_shapes(cluster: Cluster, C, boundary_pts):
    R = cluster.domain.radius
    eps = cluster.eps
    # a single inclusion has d of order one
    d = min(cluster.d, 1.0)
    c = cluster.centers / R
    n = len(c)
    inter = 0.0
    if n > 1:
        dist = np.linalg.norm(c[:, None] - c[None], axis=-1)
        np.fill_diagonal(dist, np.inf)
        inter = float((np.abs(C)[None, :] / dist**2).sum(axis=1).max())
    inc_shape = eps**2 * (d**-3 + inter)
    db = np.linalg.norm(boundary_pts[:, None, :] / R - c[None], axis=-1)
    neu_shape = float(eps**2 * (np.abs(C)[None, :] / db**3).sum(axis=1).max()) / R if n else 0.0
    return inc_shape, neu_shape


def boundary_residuals(cluster: Cluster, coeffs: CoefficientSet, ctx: KernelContext,
                       samples_per_inclusion: int = 100, higher: bool = False,
                       quadrature: QuadratureSpec | None = None, outer_samples: int = 64) -> ResidualReport:
    """Max ``|u|`` on inclusion surfaces and max ``|du/dn|`` on the outer sphere.

    The normal derivative uses a one-sided second-order difference with step
    ``1e-4 R``.
    """
    n = len(cluster)
    R = ctx.radius

    def values(p, volume=True):
        if higher:
            return higher_values(cluster, coeffs, ctx, p, quadrature, include_volume=volume)
        return leading_values(cluster, coeffs.C, ctx, p)

    dirs = fibonacci_sphere(samples_per_inclusion)
    if n:
        surf = (cluster.centers[:, None, :] + cluster.radii[:, None, None] * dirs[None]).reshape(-1, 3)
        max_inc = float(np.abs(values(surf)).max())
    else:
        max_inc = 0.0

    odirs = fibonacci_sphere(outer_samples)
    h = 1e-4 * R
    # the volume term has zero normal derivative on the sphere, so it is skipped here
    u0, u1, u2 = (values((R - k * h) * odirs, volume=False) for k in range(3))
    dudn = (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * h)
    max_neu = float(np.abs(dudn).max())
    C = coeffs.C if n else np.zeros(0)
    inc_shape, neu_shape = _bound_shapes(cluster, C, R * odirs)
    return ResidualReport(max_inc, max_neu, inc_shape, neu_shape, samples_per_inclusion)
