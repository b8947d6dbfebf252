"""Algebraic systems for the cluster coefficients.

Leading system, for each inclusion ``k``::

    C_k (1 - cap_k (H_kk - Gamma_k)) + sum_{j != k} cap_j C_j (G_kj + Gamma_j) = -1

The higher-order coefficients ``A_j`` solve a system with the same matrix and
a right-hand side built from ``Lambda_1`` and the integrals
``int G(y, O_k) G(y, O_j) dy``.  The dipole vectors ``B_k`` are explicit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import SingularSystem
from .geometry import Cluster
from .kernels import (
    FOUR_PI,
    KernelContext,
    QuadratureSpec,
    _neumann,
    _regular_grad_x,
    _regular_part,
    dipole_coefficient_beta,
    gamma_gradient,
    gamma_volume_potential,
    green_product_matrix,
)

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class InteractionSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    kind: str = "leading"

    @cached_property
    def lu(self):
        M = self.matrix
        if M.size == 0:
            return None
        with warnings.catch_warnings():
            # singularity is reported below as SingularSystem
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(M, check_finite=True)
        pivots = np.abs(np.diag(lu))
        if not np.all(np.isfinite(pivots)) or pivots.min() <= 1e-14 * np.abs(M).max():
            raise SingularSystem(f"interaction matrix is numerically singular (min pivot {pivots.min():.3e})")
        return lu, piv

    def solve(self, rhs=None):
        """Solve with one step of iterative refinement; returns (x, relative residual)."""
        b = self.rhs if rhs is None else np.asarray(rhs, dtype=float)
        if b.size == 0:
            return np.zeros(0), 0.0
        fac = self.lu
        x = sla.lu_solve(fac, b)
        x = x + sla.lu_solve(fac, b - self.matrix @ x)
        scale = np.abs(b).max()
        res = np.abs(self.matrix @ x - b).max()
        rel = res / scale if scale > 0 else res
        return x, float(rel)


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Solved coefficients plus diagnostics.

    ``A`` and ``B`` are ``None`` until the higher-order stage has been run.
    """

    C: np.ndarray
    system: InteractionSystem
    residual: float
    A: np.ndarray | None = None
    B: np.ndarray | None = None
    higher_residual: float | None = None
    diagnostics: dict = field(default_factory=dict)


def _pairwise(R, centers):
    """Off-diagonal Neumann values and regular-part diagonal."""
    X = centers[:, None, :]
    Y = centers[None, :, :]
    n = len(centers)
    G = np.zeros((n, n))
    if n > 1:
        off = ~np.eye(n, dtype=bool)
        G[off] = _neumann(R, np.broadcast_to(X, (n, n, 3))[off], np.broadcast_to(Y, (n, n, 3))[off])
    Hdiag = _regular_part(R, centers, centers)
    return G, Hdiag


def assemble_leading(cluster: Cluster, ctx: KernelContext) -> InteractionSystem:
    R = ctx.radius
    c = cluster.centers
    cap = cluster.capacities
    G, Hdiag = _pairwise(R, c)
    Gam = gamma_volume_potential(ctx, c)
    M = cap[None, :] * (G + Gam[None, :])
    np.fill_diagonal(M, 1.0 - cap * (Hdiag - Gam))
    return InteractionSystem(M, -np.ones(len(c)), "leading")


def solve_leading(system: InteractionSystem) -> CoefficientSet:
    C, res = system.solve()
    if res >= RESIDUAL_TOL:
        raise SingularSystem(f"leading solve residual {res:.3e} above {RESIDUAL_TOL}")
    return CoefficientSet(C=C, system=system, residual=res, diagnostics={"leading_residual": res})


def solve_cluster(cluster: Cluster, ctx: KernelContext) -> CoefficientSet:
    """Assemble and solve the leading system."""
    return solve_leading(assemble_leading(cluster, ctx))


def lambda_leading_value(cluster: Cluster, C) -> float:
    """``Lambda_1 = -|Omega|^{-1} sum_j C_j cap_j``."""
    return float(-np.dot(C, cluster.capacities) / cluster.domain.volume) + 0.0


def _beta_terms(cluster, ctx, C):
    """Contribution of the dipole coefficients beta (identically zero for spheres)."""
    n = len(cluster)
    beta = np.array([dipole_coefficient_beta(r) for r in cluster.radii]).reshape(n, 3)
    if not np.any(beta):
        return np.zeros(n)
    R = ctx.radius
    c = cluster.centers
    gam = gamma_gradient(ctx, c)
    out = np.zeros(n)
    for k in range(n):
        # grad_z H(O_k, z) at z = O_k equals grad_x H(x, O_k) at x = O_k by symmetry
        out[k] += C[k] * beta[k] @ (_regular_grad_x(R, c[k], c[k]) + gam[k])
        for j in range(n):
            if j == k:
                continue
            diff = c[j] - c[k]
            grad_z_G = diff / (FOUR_PI * np.linalg.norm(diff) ** 3) - _regular_grad_x(R, c[j], c[k])
            out[k] -= C[j] * beta[j] @ (grad_z_G - gam[j])
    return out


def assemble_higher(
    cluster: Cluster,
    ctx: KernelContext,
    coeffs: CoefficientSet,
    Lambda1: float | None = None,
    quadrature: QuadratureSpec | None = None,
    product_matrix: np.ndarray | None = None,
) -> tuple[InteractionSystem, np.ndarray]:
    """Right-hand side of the ``A`` system; the matrix is shared with the leading one.

    Returns the system and the matrix of product integrals
    ``I_kj = int G(y, O_k) G(y, O_j) dy`` (reused by the field evaluator).
    """
    if Lambda1 is None:
        Lambda1 = lambda_leading_value(cluster, coeffs.C)
    if product_matrix is None:
        product_matrix = green_product_matrix(ctx, cluster.centers, quadrature)
    v = Lambda1 * product_matrix @ (coeffs.C * cluster.capacities)
    v = v + _beta_terms(cluster, ctx, coeffs.C)
    base = coeffs.system
    sys2 = InteractionSystem(base.matrix, -v, "higher")
    # share the factorization with the leading system
    if base.matrix.size:
        sys2.__dict__["lu"] = base.lu
    return sys2, product_matrix


def solve_higher(system: InteractionSystem) -> tuple[np.ndarray, float]:
    A, res = system.solve()
    if res >= RESIDUAL_TOL:
        raise SingularSystem(f"higher-order solve residual {res:.3e} above {RESIDUAL_TOL}")
    return A, res


def compute_B_vectors(cluster: Cluster, ctx: KernelContext, C) -> np.ndarray:
    """``B_k = C_k cap_k grad_x H(O_k, O_k) - sum_{j != k} C_j cap_j grad_x G(O_k, O_j)``."""
    R = ctx.radius
    c = cluster.centers
    cap = cluster.capacities
    C = np.asarray(C, dtype=float)
    n = len(c)
    B = (C * cap)[:, None] * _regular_grad_x(R, c, c)
    if n > 1:
        diff = c[:, None, :] - c[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        np.fill_diagonal(dist, np.inf)
        Hx = _regular_grad_x(R, np.broadcast_to(c[:, None, :], (n, n, 3)), np.broadcast_to(c[None, :, :], (n, n, 3)))
        gradG = -diff / (FOUR_PI * dist[..., None] ** 3) - Hx
        idx = np.arange(n)
        gradG[idx, idx] = 0.0
        B -= np.einsum("j,kjd->kd", C * cap, gradG)
    return B


def solve_higher_order(
    cluster: Cluster,
    ctx: KernelContext,
    coeffs: CoefficientSet,
    quadrature: QuadratureSpec | None = None,
) -> tuple[CoefficientSet, np.ndarray]:
    """Run the higher-order stage: returns the completed coefficient set and ``I_kj``."""
    L1 = lambda_leading_value(cluster, coeffs.C)
    sys2, Imat = assemble_higher(cluster, ctx, coeffs, L1, quadrature)
    A, res = solve_higher(sys2)
    B = compute_B_vectors(cluster, ctx, coeffs.C)
    diag = dict(coeffs.diagnostics)
    diag["higher_residual"] = res
    out = CoefficientSet(C=coeffs.C, system=coeffs.system, residual=coeffs.residual, A=A, B=B,
                         higher_residual=res, diagnostics=diag)
    return out, Imat
