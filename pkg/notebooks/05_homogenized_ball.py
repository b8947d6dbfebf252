# %% [markdown]
# # Homogenized limit of a ball-shaped cloud
# Closed-form radial solution for a uniform absorbing cloud of radius r in B_7,
# and its comparison with lattice coefficients as the cloud is refined.

# %%
import numpy as np

from mesoeig.coefficients import solve_cluster
from mesoeig.geometry import Domain, generate_ball_lattice
from mesoeig.homogenize import HomogenizedBallSolution, compare_lattice_to_homogenized, verify_solution
from mesoeig.kernels import KernelContext

sol = HomogenizedBallSolution(7.0, 1.0, 0.09)
print(verify_solution(sol).as_dict())
rho = np.linspace(0.0, 7.0, 8)
print(np.column_stack([rho, sol.value(rho)]))

# %%
ctx = KernelContext(7.0)
mu, r = 0.09, 1.0
for n_target in (64, 512, 1728):
    cell = (4.0 * np.pi * r**3 / (3.0 * n_target)) ** (1.0 / 3.0)
    rad = mu * cell**3 / (4.0 * np.pi)
    cl = generate_ball_lattice(Domain(7.0), r, cell, rad)
    cmp = compare_lattice_to_homogenized(cl, solve_cluster(cl, ctx), r)
    print(f"N={cmp.n_inclusions:5d}  rms(C - m u)={cmp.rms_scaled:.2e}  "
          f"Lambda1={cmp.Lambda1:.6e}  -m mu={cmp.lambda_homogenized:.6e}")
