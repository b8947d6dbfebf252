"""Neumann function of the ball and related kernels.

The Neumann function is ``G(x, y) = 1/(4 pi |x - y|) - H(x, y)`` with
``Delta_x G + delta_y - 1/|Omega| = 0`` in ``B_R`` and zero normal derivative
on the sphere.  The regular part is evaluated through the identity

    |y| |x - ybar| = sqrt(|x|^2 |y|^2 - 2 R^2 x.y + R^4),   ybar = R^2 y / |y|^2,

which is smooth at ``y = 0`` and needs no separate origin branch.

All functions broadcast over leading dimensions of ``(..., 3)`` arrays.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentPoints, EvaluationAtCenter, PointOutsideDomain, QuadratureNotConverged

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class KernelContext:
    """Kernel data for the ball ``B_R(0)``."""

    radius: float

    @property
    def volume(self) -> float:
        return FOUR_PI * self.radius**3 / 3.0

    @property
    def neumann_mean(self) -> float:
        """``int_Omega G(x, y) dx``, which is the same for every ``y``: ``14 R^2 / 15``."""
        return 14.0 * self.radius**2 / 15.0


def context_for(domain) -> KernelContext:
    return KernelContext(float(domain.radius))


def worker_count() -> int:
    """Worker cap taken from ``MESOEIG_THREADS`` (default 1)."""
    try:
        n = int(os.environ.get("MESOEIG_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


# --- pointwise kernels --------------------------------------------------------

def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _check_inside(ctx, *pts):
    for p in pts:
        r = np.linalg.norm(p, axis=-1)
        if np.any(r >= ctx.radius):
            raise PointOutsideDomain(f"point outside the open ball of radius {ctx.radius}")


def _regular_part(R, x, y):
    x2, y2, xy = _dot(x, x), _dot(y, y), _dot(x, y)
    t = np.sqrt(np.maximum(x2 * y2 - 2.0 * R * R * xy + R**4, 0.0))
    return (
        -(x2 + y2) / (2.0 * FOUR_PI * R**3)
        - R / (FOUR_PI * t)
        - np.log(2.0 * R * R / (R * R - xy + t)) / (FOUR_PI * R)
    )


def _regular_grad_x(R, x, y):
    x2, y2, xy = _dot(x, x), _dot(y, y), _dot(x, y)
    t = np.sqrt(np.maximum(x2 * y2 - 2.0 * R * R * xy + R**4, 0.0))
    dt = (y2[..., None] * x - R * R * y) / t[..., None]
    den = (R * R - xy + t)[..., None]
    return -x / (FOUR_PI * R**3) + R * dt / (FOUR_PI * (t * t)[..., None]) + (dt - y) / (FOUR_PI * R * den)


def _neumann(R, x, y):
    r = np.linalg.norm(x - y, axis=-1)
    return 1.0 / (FOUR_PI * r) - _regular_part(R, x, y)


def neumann_regular_part(ctx: KernelContext, x, y):
    """Regular part ``H(x, y)`` for ``x, y`` in the open ball (symmetric)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inside(ctx, x, y)
    return _regular_part(ctx.radius, x, y)


def neumann_function(ctx: KernelContext, x, y):
    """``G(x, y)``; raises for coincident points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inside(ctx, x, y)
    if np.any(np.linalg.norm(x - y, axis=-1) == 0.0):
        raise CoincidentPoints("Neumann function is singular at x = y")
    return _neumann(ctx.radius, x, y)


def neumann_regular_grad_x(ctx: KernelContext, x, y):
    """Gradient of ``H(x, y)`` with respect to ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inside(ctx, x, y)
    return _regular_grad_x(ctx.radius, x, y)


def neumann_grad_x(ctx: KernelContext, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inside(ctx, x, y)
    diff = x - y
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0.0):
        raise CoincidentPoints("Neumann function gradient is singular at x = y")
    return -diff / (FOUR_PI * r[..., None] ** 3) - _regular_grad_x(ctx.radius, x, y)


def newton_volume_integral(ctx: KernelContext, y):
    """``int_Omega dz / (4 pi |z - y|) = (R^2 - |y|^2 / 3) / 2`` for ``|y| <= R``."""
    y = np.asarray(y, dtype=float)
    return 0.5 * (ctx.radius**2 - _dot(y, y) / 3.0)


def gamma_volume_potential(ctx: KernelContext, y):
    """``Gamma(y) = |Omega|^{-1} int_Omega dz / (4 pi |z - y|)``."""
    return newton_volume_integral(ctx, y) / ctx.volume


def gamma_gradient(ctx: KernelContext, y):
    """``gamma(y) = -int_Omega grad_z (4 pi |x - z|)^{-1} |_{z=y} dx = y / 3``."""
    return np.asarray(y, dtype=float) / 3.0


# --- sphere fields ------------------------------------------------------------

def capacitary_potential(center, radius, x):
    """Capacitary potential of a sphere, ``min(1, r / |x - O|)``."""
    d = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(center, dtype=float), axis=-1)
    with np.errstate(divide="ignore"):
        return np.where(d <= radius, 1.0, radius / d)


def dipole_field(center, radius, x):
    """Dipole field ``r^3 (x - O) / |x - O|^3`` of a sphere; undefined at the centre."""
    diff = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    d = np.linalg.norm(diff, axis=-1)
    if np.any(d == 0.0):
        raise EvaluationAtCenter("dipole field is singular at the sphere centre")
    return radius**3 * diff / d[..., None] ** 3


def dipole_matrix(radius) -> np.ndarray:
    """Dipole matrix of a sphere, ``meas(B) I + int |grad D|^2 = 4 pi r^3 I``.

    The dipole field far from the sphere is ``T xi / (4 pi |xi|^3)``.
    """
    return FOUR_PI * float(radius) ** 3 * np.eye(3)


def dipole_coefficient_beta(radius) -> np.ndarray:
    """The coefficient ``beta`` vanishes for spheres by symmetry."""
    return np.zeros(3)


# --- integrals of G(y, a) G(y, b) ------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    """Settings for the volume integral ``int_Omega G(y, a) G(y, b) dy``.

    ``method`` is ``"auto"`` (radial formula when a point sits at the centre,
    product quadrature otherwise), ``"product"``, ``"radial"`` or ``"mc"``.
    ``nodes`` is the number of polar-angle nodes for the product rule, and
    ``samples``/``seed`` drive the Monte Carlo estimator.
    """

    method: str = "auto"
    nodes: int = 24
    samples: int = 200_000
    seed: int = 0
    rtol: float = 1e-6


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    method: str
    evaluations: int


def _radial_integrand_exact(R, s, n=8):
    """``int G(y,0) G(y,b) dy`` with ``|b| = s`` by Gauss-Legendre on [0,s], [s,R].

    After the ``rho^2`` Jacobian the integrand is a polynomial of degree 6 on
    each piece, so 8 nodes integrate it exactly.
    """
    xg, wg = np.polynomial.legendre.leggauss(n)

    def g0(rho, s_):
        return 1.0 / (FOUR_PI * np.maximum(rho, s_)) + (rho**2 + s_**2) / (2 * FOUR_PI * R**3) + 1.0 / (FOUR_PI * R)

    total = 0.0
    for lo, hi in ((0.0, s), (s, R)):
        if hi <= lo:
            continue
        rho = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
        f = g0(rho, 0.0) * g0(rho, s) * rho**2
        total += 0.5 * (hi - lo) * np.dot(wg, f)
    return FOUR_PI * total


def _frame(axis):
    """Orthonormal frame whose third vector is ``axis``."""
    e3 = axis / np.linalg.norm(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(e3, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return e1, e2, e3


def _product_rule(R, a, b, n_theta, n_rad):
    """Product quadrature with a partition of unity around the two singularities.

    Each piece uses spherical coordinates centred at its singular point with
    the polar axis aimed at the other point, Gauss-Legendre in ``cos(theta)``,
    the trapezoid rule in ``phi`` and composite Gauss-Legendre along each ray
    on geometrically graded panels ending at the exact exit distance.
    """
    sep = float(np.linalg.norm(a - b))
    same = sep < 1e-14 * R
    scale = sep if not same else R / 8.0
    mu, wmu = np.polynomial.legendre.leggauss(n_theta)
    n_phi = 2 * n_theta
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    xr, wr = np.polynomial.legendre.leggauss(n_rad)

    pieces = [(a, b)] if same else [(a, b), (b, a)]
    total = 0.0
    count = 0
    for c, other in pieces:
        axis = (other - c) if not same else np.array([0.0, 0.0, 1.0])
        e1, e2, e3 = _frame(axis)
        sin_t = np.sqrt(1.0 - mu**2)
        dirs = (
            sin_t[:, None, None] * np.cos(phi)[None, :, None] * e1
            + sin_t[:, None, None] * np.sin(phi)[None, :, None] * e2
            + mu[:, None, None] * np.ones_like(phi)[None, :, None] * e3
        ).reshape(-1, 3)
        wdir = (wmu[:, None] * np.full(n_phi, 2.0 * np.pi / n_phi)[None, :]).ravel()
        cw = dirs @ c
        rmax = -cw + np.sqrt(cw**2 + R * R - c @ c)

        # panels in units of the ray length, graded towards the singular point
        edges = [0.0]
        h = 0.5 * scale
        while True:
            nxt = edges[-1] + h if len(edges) == 1 else edges[-1] * 2.0
            if nxt >= 2.0 * R:
                break
            edges.append(nxt)
        edges = np.array(edges)
        for i_dir in range(0, len(dirs), 512):
            dsl = slice(i_dir, i_dir + 512)
            rm = rmax[dsl]
            dd = dirs[dsl]
            wd = wdir[dsl]
            # breakpoints per ray: fixed absolute edges below rmax, then rmax
            bp = np.minimum(edges[None, :], rm[:, None])
            bp = np.concatenate([bp, rm[:, None]], axis=1)
            lo, hi = bp[:, :-1], bp[:, 1:]
            half = 0.5 * (hi - lo)
            rho = half[..., None] * xr + (0.5 * (hi + lo))[..., None]  # (ndir, npanel, n_rad)
            pts = c + rho[..., None] * dd[:, None, None, :]
            ga = _neumann(R, pts, c)
            gb = ga if same else _neumann(R, pts, other)
            f = ga * gb * rho**2
            if not same:
                da = np.linalg.norm(pts - c, axis=-1) ** 4
                db = np.linalg.norm(pts - other, axis=-1) ** 4
                f = f * db / (da + db)
            w = half[..., None] * wr
            total += float(np.einsum("d,dpk,dpk->", wd, w, f))
            count += f.size
    return total, count


def _product_integral(R, a, b, nodes):
    v1, n1 = _product_rule(R, a, b, nodes, 16)
    v0, n0 = _product_rule(R, a, b, max(8, (2 * nodes) // 3), 12)
    return v1, abs(v1 - v0), n0 + n1


def _mixture_mc(R, a, b, f, samples, seed, s_frac=0.25, chunk=1 << 16):
    """Monte Carlo for ``int_Omega f(y) dy`` with a defensive mixture density.

    The density mixes the uniform law on the ball with laws proportional to
    ``|y - a|^-2`` and ``|y - b|^-2`` on small balls, which keeps the variance
    of ``G(y, a) G(y, b)`` finite.  Returns (mean, standard error).
    """
    vol = FOUR_PI * R**3 / 3.0
    s = s_frac * R
    centers = [np.asarray(a, float), np.asarray(b, float)]
    probs = np.array([0.5, 0.25, 0.25])
    ss = np.random.SeedSequence(int(seed))
    n_chunks = max(1, -(-int(samples) // chunk))
    child = ss.spawn(n_chunks)
    sizes = [chunk] * (n_chunks - 1) + [int(samples) - chunk * (n_chunks - 1)]

    def run(i):
        rng = np.random.default_rng(child[i])
        m = sizes[i]
        comp = rng.choice(3, size=m, p=probs)
        u = rng.normal(size=(m, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        rad = np.empty(m)
        base = np.zeros((m, 3))
        k0 = comp == 0
        rad[k0] = R * rng.random(k0.sum()) ** (1.0 / 3.0)
        for k in (1, 2):
            sel = comp == k
            rad[sel] = s * rng.random(sel.sum())
            base[sel] = centers[k - 1]
        y = base + rad[:, None] * u
        q = probs[0] / vol * np.ones(m)
        for k in (1, 2):
            dk = np.linalg.norm(y - centers[k - 1], axis=1)
            with np.errstate(divide="ignore"):
                q += np.where(dk < s, probs[k] / (FOUR_PI * s * dk**2), 0.0)
        inside = np.linalg.norm(y, axis=1) < R
        vals = np.zeros(m) if np.ndim(f(y[:1])) == 1 else np.zeros((m,) + np.shape(f(y[:1]))[1:])
        if inside.any():
            fv = f(y[inside])
            qq = q[inside] if np.ndim(fv) == 1 else q[inside][:, None]
            vals[inside] = fv / qq
        return vals.sum(axis=0), (vals**2).sum(axis=0)

    workers = min(worker_count(), n_chunks)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(n_chunks)))
    else:
        parts = [run(i) for i in range(n_chunks)]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    n = float(samples)
    mean = s1 / n
    var = np.maximum(s2 / n - mean**2, 0.0)
    return mean, np.sqrt(var / n)


def green_product_integral(ctx: KernelContext, a, b, quadrature: QuadratureSpec | None = None) -> QuadratureResult:
    """``int_Omega G(y, a) G(y, b) dy`` with an error estimate.

    The integrand is weakly singular at ``a`` and ``b`` but integrable.
    Raises :class:`QuadratureNotConverged` when the estimated relative error
    exceeds ``quadrature.rtol`` for the deterministic methods.
    """
    q = quadrature or QuadratureSpec()
    R = ctx.radius
    a = np.asarray(a, dtype=float).reshape(3)
    b = np.asarray(b, dtype=float).reshape(3)
    _check_inside(ctx, a, b)
    method = q.method
    tiny = 1e-12 * R
    if method == "auto":
        method = "radial" if min(np.linalg.norm(a), np.linalg.norm(b)) <= tiny else "product"
    if method == "radial":
        if min(np.linalg.norm(a), np.linalg.norm(b)) > tiny:
            raise ValueError("radial formula needs one point at the centre of the ball")
        s = max(np.linalg.norm(a), np.linalg.norm(b))
        return QuadratureResult(float(_radial_integrand_exact(R, s)), 0.0, "radial", 16)
    if method == "product":
        val, err, n = _product_integral(R, a, b, q.nodes)
        if err > q.rtol * abs(val):
            raise QuadratureNotConverged(
                f"product quadrature error estimate {err:.3e} exceeds tolerance", value=val, error=err
            )
        return QuadratureResult(float(val), float(err), "product", n)
    if method == "mc":
        mean, se = _mixture_mc(R, a, b, lambda y: _neumann(R, y, a) * _neumann(R, y, b), q.samples, q.seed)
        return QuadratureResult(float(mean), float(se), "mc", int(q.samples))
    raise ValueError(f"unknown quadrature method {q.method!r}")


def green_product_matrix(ctx: KernelContext, points, quadrature: QuadratureSpec | None = None) -> np.ndarray:
    """Symmetric matrix of ``int G(y, p_k) G(y, p_j) dy`` over a point set."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    out = np.empty((n, n))
    pairs = [(k, j) for k in range(n) for j in range(k, n)]

    def one(kj):
        k, j = kj
        return green_product_integral(ctx, pts[k], pts[j], quadrature).value

    workers = min(worker_count(), len(pairs)) or 1
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(one, pairs))
    else:
        vals = [one(p) for p in pairs]
    for (k, j), v in zip(pairs, vals):
        out[k, j] = out[j, k] = v
    return out
