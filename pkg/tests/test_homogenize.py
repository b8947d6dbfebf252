import math

import numpy as np
import pytest

from mesoeig.coefficients import solve_cluster
from mesoeig.errors import GeometryNotLattice
from mesoeig.geometry import Domain, build_cluster, bundled_config, cluster_from_config, generate_ball_lattice
from mesoeig.homogenize import (
    HomogenizedBallSolution,
    compare_lattice_to_homogenized,
    effective_mu,
    lattice_parameters,
    pde_residual,
    verify_solution,
)
from mesoeig.kernels import context_for

SOL = HomogenizedBallSolution(7.0, 1.0, 0.09)


def test_effective_mu():
    assert effective_mu(4 * math.pi * 0.01, 0.5) == pytest.approx(4 * math.pi * 0.01 / 0.125)
    with pytest.raises(ValueError):
        effective_mu(0.0, 1.0)


def test_transmission_continuity():
    inner, outer, dinner, douter = SOL.raw_pieces(np.array([1.0]))
    assert abs(inner[0] - outer[0]) <= 1e-10 * abs(inner[0])
    assert abs(dinner[0] - douter[0]) <= 1e-10 * abs(dinner[0])
    # frozen value of the printed profile at the interface
    assert inner[0] == pytest.approx(3833.8527160442153, rel=1e-12)


def test_outer_neumann():
    assert SOL.derivative(7.0) == pytest.approx(0.0, abs=1e-12)


def test_raw_profile_has_mean_one_over_mu():
    # the printed profile integrates to 1/mu; the rescaled one to 1
    from scipy import integrate

    raw = integrate.quad(lambda t: 4 * math.pi * t * t * float(SOL.raw(t)), 0, 1, epsrel=1e-13)[0] / SOL.volume
    assert raw == pytest.approx(1 / SOL.mu, rel=1e-10)
    assert SOL.cloud_mean() == pytest.approx(1.0, rel=1e-12)


def test_raw_pde():
    # printed form: Delta u - mu chi u + 1 = 0
    pts = np.array([[0.3, 0.2, 0.1], [2.0, 3.0, 1.0]])
    h = 1e-2
    f = SOL.raw

    def lap(p, hh):
        out = -6 * f(np.linalg.norm(p))
        for k in range(3):
            e = np.zeros(3)
            e[k] = hh
            out += f(np.linalg.norm(p + e)) + f(np.linalg.norm(p - e))
        return out / hh**2

    for p in pts:
        L = (4 * lap(p, h) - lap(p, 2 * h)) / 3
        chi = float(np.linalg.norm(p) < 1)
        assert L - SOL.mu * chi * f(np.linalg.norm(p)) + 1 == pytest.approx(0, abs=1e-6)


def test_verify_solution():
    res = verify_solution(SOL)
    assert res.value_jump < 1e-10 and res.flux_jump < 1e-10
    assert res.neumann_analytic < 1e-6 and res.neumann_fd < 1e-6
    assert res.pde_inner < 1e-6 and res.pde_outer < 1e-6
    assert res.normalization_error < 1e-6


def test_fd_residual_is_second_order():
    rng = np.random.default_rng(0)
    u = rng.normal(size=(32, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    pts = u * np.linspace(0.2, 0.8, 32)[:, None]
    hs = np.array([0.04, 0.02, 0.01])
    errs = [np.abs(pde_residual(SOL, pts, h, extrapolate=False)).max() for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.9 <= slope <= 2.1


def test_field_dips_towards_centre():
    rho = np.linspace(0, 7, 71)
    v = SOL.value(rho)
    assert np.all(np.diff(v) > 0)
    assert SOL.value(0.0) == pytest.approx(339.93972110961897, rel=1e-12)


def test_bad_parameters():
    with pytest.raises(ValueError):
        HomogenizedBallSolution(7.0, 7.5, 0.09)
    with pytest.raises(ValueError):
        HomogenizedBallSolution(7.0, 1.0, -1.0)


def test_integral_equation_scale():
    # w = m u satisfies 1 + w(0) + mu int_omega G(0, y) w(y) dy = 0
    m = SOL.integral_equation_scale()
    assert m == pytest.approx(-0.0027853078230945954, rel=1e-10)


def test_non_lattice_rejected(table1_n8):
    with pytest.raises(GeometryNotLattice):
        lattice_parameters(table1_n8)


def test_lattice_parameters():
    cl = cluster_from_config(bundled_config("lattice_64"))
    r, d = lattice_parameters(cl)
    assert r == 0.002 and d == pytest.approx(0.5)


def _ball_lattice(N, mu=0.09):
    d = (4 / 3 * math.pi / N) ** (1 / 3)
    return generate_ball_lattice(Domain(7.0), 1.0, d, mu * d**3 / (4 * math.pi))


@pytest.mark.slow
def test_refinement_reduces_mismatch():
    reps = []
    for N in (64, 512, 1728):
        cl = _ball_lattice(N)
        cs = solve_cluster(cl, context_for(cl.domain))
        reps.append(compare_lattice_to_homogenized(cl, cs, r=1.0))
    rms = [r.rms_scaled for r in reps]
    assert rms[0] >= rms[1] >= rms[2]
    assert rms[-1] < 1e-3
    # eigenvalue estimate from the homogenized field approaches Lambda_1
    gaps = [abs(r.Lambda1 - r.lambda_homogenized) / r.Lambda1 for r in reps]
    assert gaps[0] > gaps[1] > gaps[2]
    # sign conventions as printed do not match the coefficients
    assert all(r.rms_plus > 100 and r.rms_minus > 100 for r in reps)
