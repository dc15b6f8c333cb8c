# %% [markdown]
# # How the field-grid spacing enters the error
#
# The plain toolkit rounds eps(t_mid) to the nearest grid node, an error of at
# most delta_eps / 2 per step.  Whether that becomes a first-order error in
# delta_eps depends on the field.
#
# For a smooth field the rounding residual changes sign as eps sweeps across
# the nodes and largely cancels over a time step sequence.  The measured rate
# is then faster than first order.  A field that parks a fixed fraction of a
# spacing away from every node shows the worst case: a clean first-order rate.

# %%
import numpy as np
from _plotting import loglog

from tdse_toolkit import PiecewiseConstant, build_toolkit, make_grid, propagate_reference, propagate_toolkit
from tdse_toolkit.harness import ExperimentConfig, fit_order, reference_state, run_eps_sweep

cfg = ExperimentConfig.from_dict()
reference_state(cfg)
report = run_eps_sweep(cfg)
fit = report.fits["toolkit"]
print(f"smooth sinusoid, N={cfg.raw['eps_sweep']['n_steps']}: slope {fit.slope:.3f} in delta_eps")
loglog(report, "toolkit error vs delta_eps (sinusoid)", "eps_sweep.png")

# %% [markdown]
# ## Off-grid plateaus
#
# The values +-E/3 sit exactly a third of a spacing from the nearest node of
# every dyadic grid on [-E, E], so the rounding error never cancels.

# %%
model, E, T, n = cfg.model, 7.5, 4.0, 64
field = PiecewiseConstant(np.array([0.0, T / 2]), np.array([E / 3, -E / 3]), T, declared_bounds=(-E, E))
exact = propagate_reference(model, field, n_start=64, tol=1e-11).final_state
points = []
for m in (8, 16, 32, 64, 128, 256, 512, 1024):
    res = propagate_toolkit(model, field, build_toolkit(model, make_grid(-E, E, m), T / n), n)
    points.append((2 * E / m, np.linalg.norm(res.final_state - exact)))
    print(f"m={m:5d}  delta_eps={2 * E / m:.4f}  error={points[-1][1]:.3e}")
print(f"off-grid plateaus: slope {fit_order(points)[0]:.3f} in delta_eps")
