"""Independent reference values.

* exact first eigenvalue of the concentric annulus (Dirichlet inside,
  Neumann outside),
* the dilute formulas where every coefficient is fixed to ``-1``,
* Monte Carlo volume integrals over the ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RootNotBracketed
from .geometry import Cluster
from .kernels import FOUR_PI, KernelContext, _mixture_mc, _neumann
from .spectral import leading_values


@dataclass(frozen=True)
class AnnulusProblem:
    a: float
    R: float

    def __post_init__(self):
        if not (0 < self.a < self.R):
            raise ValueError(f"need 0 < a < R, got a={self.a}, R={self.R}")


def annulus_first_eigenvalue(problem: AnnulusProblem, tol: float = 1e-14, delta: float = 1e-9) -> float:
    """``k^2`` for the smallest root of ``tan(k (R - a)) = k R``.

    The radial eigenfunction is ``sin(k (rho - a)) / rho``; the Neumann
    condition at ``R`` gives the root equation.  Bisection runs on
    ``k (R - a)`` in ``(0, pi/2 - delta)``, where ``tan`` rises from 0 to
    infinity while ``k R`` is linear, until the bracket stops shrinking or
    its relative width drops below ``tol``.
    """
    a, R = problem.a, problem.R
    L = R - a

    def f(k):
        return math.tan(k * L) - k * R

    lo, hi = 0.0, (0.5 * math.pi - delta) / L
    if not f(hi) > 0:
        raise RootNotBracketed(f"no sign change on the first branch for a={a}, R={R}")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or (hi - lo) <= tol * hi:
            break
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    k = 0.5 * (lo + hi)
    return k * k


def annulus_leading_asymptotic(a: float, R: float) -> float:
    """``3 a / (R^3 (1 + 5 a / (2 R)))``: the leading formula for one centred sphere."""
    return 3.0 * a / (R**3 * (1.0 + 2.5 * a / R))


def dilute_lambda(cluster: Cluster, ctx: KernelContext | None = None) -> float:
    """``|Omega|^{-1} sum_j cap_j``."""
    return float(cluster.capacities.sum() / cluster.domain.volume)


def dilute_values(cluster: Cluster, ctx: KernelContext, points) -> np.ndarray:
    """Dilute field ``1 - sum_j (P_j - cap_j (H(x, O_j) - Gamma_j))`` (no checks)."""
    return leading_values(cluster, -np.ones(len(cluster)), ctx, points)


def dilute_field(cluster: Cluster, ctx: KernelContext, x) -> float:
    from .spectral import _check_point

    x = np.asarray(x, dtype=float).reshape(3)
    _check_point(cluster, x)
    return float(dilute_values(cluster, ctx, x)[0])


# --- Monte Carlo -------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    value: np.ndarray | float
    stderr: np.ndarray | float
    samples: int
    seed: int


def _integrand(ctx, tag, params):
    R = ctx.radius
    if tag == "one":
        return (lambda y: np.ones(len(y))), (0, 0, 0), (0, 0, 0)
    if tag == "newton":
        o = np.asarray(params.get("center", (0, 0, 0)), dtype=float)
        return (lambda y: 1.0 / (FOUR_PI * np.linalg.norm(y - o, axis=1))), o, o
    if tag == "gamma_gradient":
        o = np.asarray(params.get("center", (0, 0, 0)), dtype=float)

        def g(y):
            diff = y - o
            return -diff / (FOUR_PI * np.linalg.norm(diff, axis=1)[:, None] ** 3)

        return g, o, o
    if tag == "neumann":
        o = np.asarray(params["center"], dtype=float)
        return (lambda y: _neumann(R, y, o)), o, o
    if tag == "green_product":
        a = np.asarray(params["a"], dtype=float)
        b = np.asarray(params["b"], dtype=float)
        return (lambda y: _neumann(R, y, a) * _neumann(R, y, b)), a, b
    raise ValueError(f"unknown integrand tag {tag!r}")


def mc_volume_integral(ctx: KernelContext, tag: str, params: dict | None = None, seed: int = 0,
                       samples: int = 1_000_000) -> MCEstimate:
    """Monte Carlo integral over the ball with a standard error.

    Tags: ``one``, ``newton`` (``1/(4 pi |y - O|)``), ``gamma_gradient``
    (vector ``-(y - O)/(4 pi |y - O|^3)``), ``neumann`` (``G(y, O)``) and
    ``green_product`` (``G(y, a) G(y, b)``).  Samples are split into
    fixed-size chunks with spawned seeds, so results do not depend on the
    worker count.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    f, a, b = _integrand(ctx, tag, params or {})
    mean, se = _mixture_mc(ctx.radius, a, b, f, samples, seed)
    if np.ndim(mean) == 0:
        mean, se = float(mean), float(se)
    return MCEstimate(mean, se, int(samples), int(seed))
