"""Command-line front end.

Subcommands: ``solve``, ``field``, ``validate``, ``homogenize`` and ``table1``.
Exit codes: 0 success, 1 acceptance failure, 2 configuration error,
3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .coefficients import solve_cluster, solve_higher_order
from .errors import ConfigError, GeometryError, MesoEigError
from .geometry import DATA_DIR, check_constraint, cluster_from_config, load_config
from .homogenize import HomogenizedBallSolution, compare_lattice_to_homogenized, verify_solution
from .kernels import QuadratureSpec, context_for, green_product_integral, KernelContext
from .oracle import AnnulusProblem, annulus_first_eigenvalue
from .spectral import GridSpec, boundary_residuals, field_grid, lambda_higher, leading_result, write_field_csv

log = logging.getLogger("mesoeig")

EXIT_OK, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

TABLE1_ROWS = [("table1_N8", 0.96588e-3), ("table1_N9", 1.08686e-3), ("table1_N10", 1.17062e-3)]


# --- output helpers -------------------------------------------------------------

def fmt(v) -> str:
    return format(float(v), ".17g")


def dumps_json(obj) -> str:
    """JSON with every float written to 17 significant digits; NaN and inf become null."""
    floats = []

    def walk(o):
        if isinstance(o, dict):
            return {str(k): walk(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [walk(v) for v in o]
        if isinstance(o, (bool, np.bool_)):
            return bool(o)
        if isinstance(o, (int, np.integer)):
            return int(o)
        if isinstance(o, (float, np.floating)):
            if not math.isfinite(float(o)):
                return None
            floats.append(fmt(o))
            return f"\x00{len(floats) - 1}\x00"
        if isinstance(o, np.ndarray):
            return walk(o.tolist())
        return o

    text = json.dumps(walk(obj), indent=2, sort_keys=True)
    for i, s in enumerate(floats):
        text = text.replace(f'"\\u0000{i}\\u0000"', s, 1)
    return text + "\n"


class Outputs:
    """Tracks files written to the output directory and writes the manifest."""

    def __init__(self, out_dir, command, config=None, seeds=None):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.seeds = seeds or {}
        self.files = []
        self.started = datetime.now(timezone.utc).isoformat()
        self.extra = {}

    def path(self, name):
        self.files.append(name)
        return self.dir / name

    def write_json(self, name, obj):
        self.path(name).write_text(dumps_json(obj))

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow(["" if v is None else (fmt(v) if isinstance(v, (float, np.floating)) else v) for v in row])

    def finish(self):
        chash = None
        if self.config is not None:
            chash = hashlib.sha256(json.dumps(self.config, sort_keys=True).encode()).hexdigest()
        files = {f: hashlib.sha256((self.dir / f).read_bytes()).hexdigest() for f in self.files}
        manifest = {
            "command": self.command,
            "tool_version": __version__,
            "config_sha256": chash,
            "seeds": self.seeds,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": files,
            **self.extra,
        }
        (self.dir / "manifest.json").write_text(dumps_json(manifest))


# --- subcommands ----------------------------------------------------------------

def _quadrature(args) -> QuadratureSpec:
    return QuadratureSpec(method=args.quadrature, samples=args.samples, seed=args.seed)


def _load(path):
    cfg = load_config(path)
    return cfg, cluster_from_config(cfg)


def _warn_constraint(rep):
    if not rep.satisfied:
        log.warning("mesoscale constraint eps <= c d^3 violated: eps=%.6g d=%.6g ratio=%.6g c=%.6g",
                    rep.eps, rep.d, rep.ratio, rep.c_threshold)


def cmd_solve(args) -> int:
    cfg, cluster = _load(args.config)
    ctx = context_for(cluster.domain)
    rep = check_constraint(cluster, args.c_threshold)
    _warn_constraint(rep)
    out = Outputs(args.out, "solve", cfg, {"seed": args.seed, "samples": args.samples})
    coeffs = solve_cluster(cluster, ctx)
    header = ["index", "x", "y", "z", "radius", "C"]
    if args.higher:
        coeffs, _ = solve_higher_order(cluster, ctx, coeffs, _quadrature(args))
        result = lambda_higher(cluster, coeffs, ctx, args.c_threshold)
        header += ["A", "Bx", "By", "Bz"]
    else:
        result = leading_result(cluster, coeffs, args.c_threshold)
    report = result.as_report()
    if len(cluster):
        res = boundary_residuals(cluster, coeffs, ctx, args.residual_samples)
        report["residual_diagnostics"].update(res.as_dict())
        if args.higher and args.higher_residuals:
            # each sample point needs N volume integrals, so this is opt-in
            res2 = boundary_residuals(cluster, coeffs, ctx, args.residual_samples, higher=True,
                                      quadrature=_quadrature(args))
            report["residual_diagnostics"]["higher"] = res2.as_dict()
    report["n_inclusions"] = len(cluster)
    report["c_threshold"] = args.c_threshold
    out.write_json("report.json", report)
    rows = []
    for j in range(len(cluster)):
        row = [j, *cluster.centers[j], cluster.radii[j], coeffs.C[j]]
        if args.higher:
            row += [coeffs.A[j], *coeffs.B[j]]
        rows.append(row)
    out.write_csv("coefficients.csv", header, rows)
    out.extra["constraint"] = rep.as_dict()
    out.finish()
    print(f"N={len(cluster)} Lambda1={fmt(result.Lambda1)}"
          + (f" Lambda2={fmt(result.Lambda2)} lambda={fmt(result.lam)}" if args.higher else ""))
    return EXIT_OK


def parse_grid(spec: str) -> GridSpec:
    """Grid from JSON text, a JSON file, or ``key=value`` pairs.

    Key/value form: ``plane=z,offset=0.25,nx=41,ny=41,u=-0.5:2.5,v=-0.5:2.5``
    or ``box,nx=10,ny=10,nz=10,x=-1:1,y=-1:1,z=-1:1``.
    """
    text = spec.strip()
    try:
        if Path(text).is_file():
            text = Path(text).read_text()
    except OSError:
        pass
    axes = {"x": 0, "y": 1, "z": 2, "0": 0, "1": 1, "2": 2, "x1": 0, "x2": 1, "x3": 2}
    try:
        if text.startswith("{"):
            d = json.loads(text)
            if "plane" in d:
                p = d["plane"]
                ax = p.get("axis", 2)
                return GridSpec("plane", axes[str(ax)], float(p["offset"]), int(p["nx"]), int(p["ny"]),
                                extent=tuple(tuple(map(float, e)) for e in p["extent"]))
            if "box" in d:
                b = d["box"]
                return GridSpec("box", nx=int(b["nx"]), ny=int(b["ny"]), nz=int(b["nz"]),
                                bounds=tuple(tuple(map(float, e)) for e in b["bounds"]))
            raise ConfigError("grid JSON needs a 'plane' or 'box' entry")
        kv = {}
        kind = "plane"
        for part in text.split(","):
            part = part.strip()
            if part == "box":
                kind = "box"
                continue
            k, v = part.split("=", 1)
            kv[k.strip()] = v.strip()
        rng = lambda s: tuple(float(t) for t in s.split(":"))
        if kind == "plane":
            ax = axes[kv.get("plane", kv.get("axis", "z"))]
            return GridSpec("plane", ax, float(kv.get("offset", 0.0)), int(kv.get("nx", 41)), int(kv.get("ny", 41)),
                            extent=(rng(kv.get("u", "-1:1")), rng(kv.get("v", "-1:1"))))
        return GridSpec("box", nx=int(kv.get("nx", 11)), ny=int(kv.get("ny", 11)), nz=int(kv.get("nz", 11)),
                        bounds=(rng(kv.get("x", "-1:1")), rng(kv.get("y", "-1:1")), rng(kv.get("z", "-1:1"))))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse grid spec {spec!r}: {exc}") from exc


def cmd_field(args) -> int:
    cfg, cluster = _load(args.config)
    grid = parse_grid(args.grid)
    ctx = context_for(cluster.domain)
    _warn_constraint(check_constraint(cluster, args.c_threshold))
    out = Outputs(args.out, "field", cfg, {"seed": args.seed, "samples": args.samples})
    coeffs = solve_cluster(cluster, ctx)
    if args.higher and len(cluster):
        coeffs, _ = solve_higher_order(cluster, ctx, coeffs, _quadrature(args))
    table = field_grid(cluster, coeffs, ctx, grid, higher=args.higher and len(cluster) > 0,
                       quadrature=_quadrature(args), normalize=args.normalize)
    write_field_csv(table, out.path("field.csv"))
    out.extra["grid"] = grid.__dict__
    out.finish()
    ok = ~np.isnan(table.values)
    print(f"{len(table.values)} points, {int(ok.sum())} evaluated")
    return EXIT_OK


VALIDATE_RADII = (0.04, 0.02, 0.01, 0.005)


def run_validation(quick: bool, seed: int, samples: int, R: float = 7.0):
    """Annulus sweep; returns (rows, summary)."""
    from .geometry import Domain, build_cluster

    radii = VALIDATE_RADII[:3] if quick else VALIDATE_RADII
    ctx = KernelContext(R)
    rows = []
    for a in radii:
        cl = build_cluster(Domain(R), [((0.0, 0.0, 0.0), a)])
        cs = solve_cluster(cl, ctx)
        cs2, _ = solve_higher_order(cl, ctx, cs)
        res = lambda_higher(cl, cs2, ctx)
        exact = annulus_first_eigenvalue(AnnulusProblem(a, R))
        mc = green_product_integral(ctx, (0, 0, 0), (0, 0, 0), QuadratureSpec(method="mc", samples=samples, seed=seed))
        rows.append(dict(a=a, lambda_oracle=exact, lambda_L1=res.Lambda1, lambda_L1L2=res.lam,
                         err_L1=abs(res.Lambda1 - exact), err_L1L2=abs(res.lam - exact),
                         I00_mc=mc.value, I00_mc_stderr=mc.error))
    for i, row in enumerate(rows):
        if i == 0:
            row["slope_L1"] = row["slope_L1L2"] = None
        else:
            p = rows[i - 1]
            da = math.log(p["a"] / row["a"])
            row["slope_L1"] = math.log(p["err_L1"] / row["err_L1"]) / da
            row["slope_L1L2"] = math.log(p["err_L1L2"] / row["err_L1L2"]) / da
    la = np.log([r["a"] for r in rows])
    fit1 = float(np.polyfit(la, np.log([r["err_L1"] for r in rows]), 1)[0])
    fit2 = float(np.polyfit(la, np.log([r["err_L1L2"] for r in rows]), 1)[0])
    summary = {
        "fit_slope_L1": fit1,
        "fit_slope_L1L2": fit2,
        "slope_ok": fit1 >= 1.9,
        "higher_not_worse": all(r["err_L1L2"] <= r["err_L1"] for r in rows),
    }
    summary["passed"] = summary["slope_ok"] and summary["higher_not_worse"]
    return rows, summary


VALIDATE_COLUMNS = ["a", "lambda_oracle", "lambda_L1", "lambda_L1L2", "err_L1", "err_L1L2",
                    "slope_L1", "slope_L1L2", "I00_mc", "I00_mc_stderr"]


def cmd_validate(args) -> int:
    out = Outputs(args.out, "validate", None, {"seed": args.seed, "samples": args.samples})
    rows, summary = run_validation(args.quick, args.seed, args.samples)
    out.write_csv("validate.csv", VALIDATE_COLUMNS, [[r[c] for c in VALIDATE_COLUMNS] for r in rows])
    out.write_json("validate_summary.json", summary)
    out.finish()
    print(f"{'PASS' if summary['slope_ok'] else 'FAIL'}  leading error slope {summary['fit_slope_L1']:.4f} (>= 1.9)")
    print(f"{'PASS' if summary['higher_not_worse'] else 'FAIL'}  higher-order error <= leading error at every radius")
    return EXIT_OK if summary["passed"] else EXIT_ACCEPTANCE


def cmd_homogenize(args) -> int:
    out_cfg = {"R": args.R, "r": args.r, "mu": args.mu, "lattice": args.lattice}
    if args.lattice:
        cfg, cluster = _load(args.lattice)
        out = Outputs(args.out, "homogenize", cfg)
        ctx = context_for(cluster.domain)
        coeffs = solve_cluster(cluster, ctx)
        comp = compare_lattice_to_homogenized(cluster, coeffs, args.r)
        sol = HomogenizedBallSolution(cluster.domain.radius, comp.r, comp.mu)
        report = {"comparison": comp.as_dict()}
    else:
        if not (0 < args.r < args.R) or args.mu <= 0:
            raise ConfigError("need 0 < r < R and mu > 0")
        out = Outputs(args.out, "homogenize", out_cfg)
        sol = HomogenizedBallSolution(args.R, args.r, args.mu)
        report = {}
    report.update({"R": sol.R, "r": sol.r, "mu": sol.mu, "integral_equation_scale": sol.integral_equation_scale(),
                   "residuals": verify_solution(sol).as_dict()})
    rho = np.linspace(0.0, sol.R, args.points)
    out.write_csv("profile.csv", ["rho", "u"], [[float(p), float(v)] for p, v in zip(rho, sol.value(rho))])
    out.write_json("homogenized.json", report)
    out.finish()
    print(f"u(0)={fmt(sol.value(0.0))} u(r)={fmt(sol.value(sol.r))} u(R)={fmt(sol.value(sol.R))}")
    return EXIT_OK


def cmd_table1(args) -> int:
    out = Outputs(args.out, "table1", {"rows": [n for n, _ in TABLE1_ROWS]}, {"seed": args.seed})
    rows = []
    for name, reference in TABLE1_ROWS:
        cfg = load_config(DATA_DIR / f"{name}.json")
        cluster = cluster_from_config(cfg)
        ctx = context_for(cluster.domain)
        coeffs = solve_cluster(cluster, ctx)
        if args.higher:
            coeffs, _ = solve_higher_order(cluster, ctx, coeffs, _quadrature(args))
            res = lambda_higher(cluster, coeffs, ctx, args.c_threshold)
        else:
            res = leading_result(cluster, coeffs, args.c_threshold)
        out.write_json(f"{name}_report.json", res.as_report())
        rows.append([len(cluster), res.Lambda1, res.Lambda2, res.lam, reference,
                     (res.Lambda1 - reference) / reference])
        print(f"N={len(cluster):2d}  Lambda1={res.Lambda1:.5e}  reference={reference:.5e}  "
              f"rel.diff={(res.Lambda1 - reference) / reference:+.2e}")
    out.write_csv("table1.csv", ["N", "Lambda1", "Lambda2", "lambda", "reference", "rel_diff"], rows)
    out.finish()
    return EXIT_OK


# --- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mesoeig", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", default="mesoeig_out", help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
            sp.add_argument("--samples", type=int, default=200_000, help="Monte Carlo samples")
        sp.add_argument("--c-threshold", type=float, default=1.0, help="constant c in eps <= c d^3")

    def higher(sp):
        sp.add_argument("--higher", action="store_true", help="include the A, B and Lambda_2 terms")
        sp.add_argument("--quadrature", choices=["auto", "product", "mc"], default="auto",
                        help="method for the G*G volume integrals")

    s = sub.add_parser("solve", help="solve for coefficients and the eigenvalue")
    s.add_argument("config")
    common(s)
    higher(s)
    s.add_argument("--residual-samples", type=int, default=100, help="sample points per inclusion surface")
    s.add_argument("--higher-residuals", action="store_true",
                   help="also sample the higher-order field on the surfaces (slow for large N)")
    s.set_defaults(func=cmd_solve)

    f = sub.add_parser("field", help="evaluate the eigenfield on a grid")
    f.add_argument("config")
    f.add_argument("--grid", required=True, help="grid spec (JSON, JSON file or key=value list)")
    f.add_argument("--normalize", action="store_true", help="divide by the grid L2 norm")
    common(f)
    higher(f)
    f.set_defaults(func=cmd_field)

    v = sub.add_parser("validate", help="annulus oracle sweep")
    v.add_argument("--quick", action="store_true", help="three-radius sweep")
    common(v)
    v.set_defaults(func=cmd_validate)

    h = sub.add_parser("homogenize", help="homogenized ball solution")
    h.add_argument("--R", type=float, default=7.0)
    h.add_argument("--r", type=float, default=None)
    h.add_argument("--mu", type=float, default=0.09)
    h.add_argument("--lattice", default=None, help="lattice config to compare with")
    h.add_argument("--points", type=int, default=141)
    common(h, seed=False)
    h.set_defaults(func=cmd_homogenize)

    t = sub.add_parser("table1", help="the three bundled N = 8, 9, 10 clusters")
    common(t)
    higher(t)
    t.set_defaults(func=cmd_table1)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "homogenize" and args.r is None and not args.lattice:
        args.r = 1.0
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except (ConfigError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MesoEigError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    log.debug("%s finished in %.2f s", args.command, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
