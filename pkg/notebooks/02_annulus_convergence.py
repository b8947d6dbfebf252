# %% [markdown]
# # Convergence against the exact annulus eigenvalue
# One sphere of radius a at the centre of B_7. The exact first Dirichlet-Neumann
# eigenvalue of the annulus comes from a bracketed root solve.

# %%
import numpy as np

from mesoeig.coefficients import solve_cluster, solve_higher_order
from mesoeig.geometry import Domain, build_cluster
from mesoeig.kernels import KernelContext
from mesoeig.oracle import AnnulusProblem, annulus_first_eigenvalue
from mesoeig.spectral import lambda_higher

R = 7.0
ctx = KernelContext(R)
radii = np.array([0.04, 0.02, 0.01, 0.005])

# %%
e1, e2 = [], []
for a in radii:
    cl = build_cluster(Domain(R), [((0.0, 0.0, 0.0), a)])
    cs, _ = solve_higher_order(cl, ctx, solve_cluster(cl, ctx))
    res = lambda_higher(cl, cs, ctx)
    exact = annulus_first_eigenvalue(AnnulusProblem(a, R))
    e1.append(abs(res.Lambda1 - exact))
    e2.append(abs(res.lam - exact))
    print(f"a={a:<6} exact={exact:.12e}  err1={e1[-1]:.3e}  err2={e2[-1]:.3e}")

# %%
print("leading slope", np.polyfit(np.log(radii), np.log(e1), 1)[0])
print("higher slope ", np.polyfit(np.log(radii), np.log(e2), 1)[0])
