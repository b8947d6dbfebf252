# %% [markdown]
# # Three-cluster eigenvalues
# Leading-order first eigenvalue for the bundled N = 8, 9, 10 clusters in the
# ball of radius 7, next to the reference values.

# %%
from mesoeig.coefficients import solve_cluster
from mesoeig.geometry import bundled_config, cluster_from_config
from mesoeig.kernels import KernelContext
from mesoeig.spectral import leading_result

ctx = KernelContext(7.0)
reference = {"table1_N8": 0.96588e-3, "table1_N9": 1.08686e-3, "table1_N10": 1.17062e-3}

# %%
for name, ref in reference.items():
    cl = cluster_from_config(bundled_config(name))
    res = leading_result(cl, solve_cluster(cl, ctx))
    print(f"{name:11s} N={len(cl):2d}  Lambda1={res.Lambda1:.10e}  ref={ref:.5e}  "
          f"rel={(res.Lambda1 - ref) / ref:+.3e}  eps/d^3={res.ratio:.2f}")
