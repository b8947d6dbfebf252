# %% [markdown]
# # Eigenfunction slices
# Leading and higher-order fields of the N = 8 cluster on the plane z = 0.
# Values inside inclusions are reported as NaN.

# %%
import numpy as np

from mesoeig.coefficients import solve_cluster, solve_higher_order
from mesoeig.geometry import bundled_config, cluster_from_config
from mesoeig.kernels import KernelContext
from mesoeig.spectral import GridSpec, boundary_residuals, field_grid

ctx = KernelContext(7.0)
cl = cluster_from_config(bundled_config("table1_N8"))
lead = solve_cluster(cl, ctx)
grid = GridSpec(kind="plane", axis=2, offset=0.0, nx=41, ny=41, extent=((-2.0, 3.0), (-2.0, 3.0)))

# %%
tab = field_grid(cl, lead, ctx, grid)
vals = tab.values
print("leading field: min", np.nanmin(vals), "max", np.nanmax(vals))

# %%
full, _ = solve_higher_order(cl, ctx, lead)
small = GridSpec(kind="plane", axis=2, offset=0.0, nx=5, ny=5, extent=((-2.0, 3.0), (-2.0, 3.0)))
tab2 = field_grid(cl, full, ctx, small, higher=True)
print("higher-order field: min", np.nanmin(tab2.values), "max", np.nanmax(tab2.values))

# %%
rep = boundary_residuals(cl, lead, ctx, 100)
print("max |u| on inclusion boundaries", rep.max_inclusion, " max |du/dn| on outer sphere", rep.max_neumann)
