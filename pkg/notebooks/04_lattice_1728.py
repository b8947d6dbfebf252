# %% [markdown]
# # A 12 x 12 x 12 lattice
# Dense LU solve of the leading system for 1728 identical spheres.

# %%
import time

import numpy as np

from mesoeig.coefficients import solve_cluster
from mesoeig.geometry import bundled_config, cluster_from_config
from mesoeig.kernels import KernelContext
from mesoeig.spectral import leading_result

ctx = KernelContext(7.0)
cl = cluster_from_config(bundled_config("lattice_1728"))

# %%
t0 = time.perf_counter()
cs = solve_cluster(cl, ctx)
print(f"solve {time.perf_counter() - t0:.2f} s, residual {cs.residual:.2e}")
print("C range", cs.C.min(), cs.C.max())
print(leading_result(cl, cs).as_report())

# %%
# corner spheres feel fewer neighbours than the lattice interior
dist = np.linalg.norm(cl.centers - cl.centers.mean(axis=0), axis=1)
print("C at most central sphere", cs.C[dist.argmin()], " at a corner", cs.C[dist.argmax()])
