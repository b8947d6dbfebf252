"""Domain, inclusion clusters and the mesoscale admissibility test.

A cluster is a ball ``Omega = B_R(0)`` perforated by ``N`` small Dirichlet
spheres.  Everything the solvers need (centres, radii, capacities, the
scale parameters ``eps`` and ``d``) is precomputed and stored as arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ConfigError,
    InclusionOutsideDomain,
    NonPositiveRadius,
    OverlappingInclusions,
    RadiusListLengthMismatch,
)


@dataclass(frozen=True)
class Domain:
    """The ball of radius ``radius`` centred at the origin."""

    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise NonPositiveRadius(f"domain radius must be positive, got {self.radius}")

    @property
    def volume(self) -> float:
        return 4.0 * math.pi * self.radius**3 / 3.0


@dataclass(frozen=True)
class Inclusion:
    center: tuple
    radius: float

    @property
    def capacity(self) -> float:
        return sphere_capacity(self.radius)


def sphere_capacity(radius):
    """Harmonic capacity of a sphere, ``4 pi r``."""
    return 4.0 * np.pi * np.asarray(radius, dtype=float)


@dataclass(frozen=True, eq=False)
class Cluster:
    """A validated cloud of non-overlapping spheres inside a ball.

    Attributes
    ----------
    centers : (N, 3) array
    radii : (N,) array
    eps : max radius divided by R
    d : minimum centre separation divided by R (``inf`` when N < 2)
    d_half : half the minimal centre separation, in physical units
    """

    domain: Domain
    centers: np.ndarray
    radii: np.ndarray
    eps: float
    d: float
    d_half: float
    min_boundary_distance: float

    def __len__(self):
        return int(self.radii.shape[0])

    @property
    def capacities(self) -> np.ndarray:
        return sphere_capacity(self.radii)

    @property
    def inclusions(self) -> list[Inclusion]:
        return [Inclusion(tuple(float(v) for v in c), float(r)) for c, r in zip(self.centers, self.radii)]

    def to_config(self) -> dict:
        return {
            "domain": {"type": "ball", "radius": self.domain.radius},
            "inclusions": [{"center": list(inc.center), "radius": inc.radius} for inc in self.inclusions],
        }


def build_cluster(domain: Domain, inclusions: Sequence[Inclusion] | Iterable) -> Cluster:
    """Validate a list of inclusions and precompute the scale parameters.

    Inclusions may be :class:`Inclusion` objects or ``(center, radius)`` pairs.
    An empty list is accepted and gives the unperforated ball.
    """
    centers, radii = [], []
    for inc in inclusions:
        if isinstance(inc, Inclusion):
            c, r = inc.center, inc.radius
        else:
            c, r = inc
        centers.append(np.asarray(c, dtype=float).reshape(3))
        radii.append(float(r))
    centers = np.array(centers, dtype=float).reshape(-1, 3)
    radii = np.array(radii, dtype=float)
    return _build(domain, centers, radii)


def _build(domain: Domain, centers: np.ndarray, radii: np.ndarray) -> Cluster:
    R = domain.radius
    if radii.size and not np.all(np.isfinite(radii) & (radii > 0)):
        bad = np.flatnonzero(~(np.isfinite(radii) & (radii > 0)))
        raise NonPositiveRadius(f"non-positive radius at indices {bad.tolist()}")
    if not np.all(np.isfinite(centers)):
        raise ConfigError("inclusion centres must be finite")

    n = radii.size
    if n == 0:
        return Cluster(domain, centers, radii, 0.0, math.inf, math.inf, R)

    gap = R - np.linalg.norm(centers, axis=1) - radii
    if np.any(gap <= 0):
        raise InclusionOutsideDomain(
            f"inclusions {np.flatnonzero(gap <= 0).tolist()} are not compactly inside the ball of radius {R}"
        )

    if n >= 2:
        tree = cKDTree(centers)
        dist, _ = tree.query(centers, k=2)
        dmin = float(dist[:, 1].min())
        pairs = tree.query_pairs(2.0 * float(radii.max()), output_type="ndarray")
        if len(pairs):
            sep = np.linalg.norm(centers[pairs[:, 0]] - centers[pairs[:, 1]], axis=1)
            bad = pairs[sep <= radii[pairs[:, 0]] + radii[pairs[:, 1]]]
            if len(bad):
                bad = bad[np.lexsort((bad[:, 1], bad[:, 0]))]
                raise OverlappingInclusions(bad)
    else:
        dmin = math.inf

    return Cluster(
        domain=domain,
        centers=centers,
        radii=radii,
        eps=float(radii.max()) / R,
        d=dmin / R,
        d_half=dmin / 2.0,
        min_boundary_distance=float(gap.min()),
    )


def generate_cubic_lattice(domain: Domain, n: int, cell: float, origin, radius) -> Cluster:
    """``n**3`` spheres on a cubic lattice.

    Centres are ``origin + cell * (i, j, k)`` with ``0 <= i, j, k < n``.  The
    x index varies fastest and z slowest, and a list of radii is consumed in
    that order.
    """
    n = int(n)
    if n < 1:
        raise ConfigError("lattice size n must be at least 1")
    idx = np.arange(n)
    k, j, i = np.meshgrid(idx, idx, idx, indexing="ij")
    offsets = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1).astype(float)
    centers = np.asarray(origin, dtype=float).reshape(1, 3) + float(cell) * offsets
    if np.ndim(radius) == 0:
        radii = np.full(n**3, float(radius))
    else:
        radii = np.asarray(radius, dtype=float).ravel()
        if radii.size != n**3:
            raise RadiusListLengthMismatch(f"expected {n**3} radii, got {radii.size}")
    return _build(domain, centers, radii)


def generate_ball_lattice(domain: Domain, ball_radius: float, cell: float, radius: float) -> Cluster:
    """Cell-centred cubic lattice restricted to the ball ``|x| < ball_radius``."""
    m = int(math.ceil(ball_radius / cell)) + 1
    ax = (np.arange(-m, m) + 0.5) * cell
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) < ball_radius]
    order = np.lexsort((pts[:, 0], pts[:, 1], pts[:, 2]))
    pts = pts[order]
    return _build(domain, pts, np.full(len(pts), float(radius)))


@dataclass(frozen=True)
class ConstraintReport:
    eps: float
    d: float
    c_threshold: float
    ratio: float
    satisfied: bool

    def as_dict(self) -> dict:
        return {
            "eps": self.eps,
            "d": self.d,
            "c_threshold": self.c_threshold,
            "ratio": self.ratio,
            "satisfied": self.satisfied,
        }


def evaluate_constraint(eps: float, d: float, c: float = 1.0) -> ConstraintReport:
    """Mesoscale condition ``eps <= c d**3``; ``ratio`` is ``eps / d**3``."""
    ratio = eps / d**3 if math.isfinite(d) else 0.0
    return ConstraintReport(eps=eps, d=d, c_threshold=c, ratio=ratio, satisfied=bool(eps <= c * d**3))


def check_constraint(cluster: Cluster, c: float = 1.0) -> ConstraintReport:
    return evaluate_constraint(cluster.eps, cluster.d, c)


# --- configuration files ----------------------------------------------------

def cluster_from_config(cfg: dict) -> Cluster:
    """Build a cluster from the JSON configuration schema.

    ``{"domain": {"type": "ball", "radius": R}, "inclusions": [...]}`` or
    ``{"domain": ..., "generator": {"type": "cubic_lattice", ...}}``.
    """
    try:
        dom = cfg["domain"]
        if dom.get("type", "ball") != "ball":
            raise ConfigError(f"unsupported domain type {dom.get('type')!r}")
        domain = Domain(float(dom["radius"]))
        if "generator" in cfg:
            gen = cfg["generator"]
            kind = gen.get("type", "cubic_lattice")
            if kind == "cubic_lattice":
                return generate_cubic_lattice(
                    domain, int(gen["n"]), float(gen["cell"]), gen.get("origin", [0.0, 0.0, 0.0]), gen["radius"]
                )
            if kind == "ball_lattice":
                return generate_ball_lattice(domain, float(gen["ball_radius"]), float(gen["cell"]), float(gen["radius"]))
            raise ConfigError(f"unknown generator type {kind!r}")
        incs = [(i["center"], float(i["radius"])) for i in cfg.get("inclusions", [])]
        return build_cluster(domain, incs)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed configuration: {exc!r}") from exc


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def load_cluster(path) -> Cluster:
    return cluster_from_config(load_config(path))


DATA_DIR = Path(__file__).resolve().parent / "data"


def bundled_config(name: str) -> dict:
    """Load one of the shipped fixture configurations by stem name."""
    return load_config(DATA_DIR / f"{name}.json")
