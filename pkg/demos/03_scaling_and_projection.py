"""Diagonal scalings and the non-negativity constraint.

A scaled gradient step multiplies the gradient by a positive diagonal
matrix before stepping. With projection onto the non-negative orthant the
recurrence for P_k picks up a mask that zeros the clipped rows, so the
filter factors are no longer a function of the singular values alone.

Run with ``python demos/03_scaling_and_projection.py``.
"""

# %%
from gradfilters import make_problem, run, svd
from gradfilters.experiments import HEAT_BUDGET, scaling_methods, total_variation
from gradfilters.filters import filters_direct

p = make_problem("heat:n=64,kappa=2", noise=0.01, seed=0)
s = svd(p.A)

# %% Best error and how rough the filter curve at the best iterate is.
print(f"{'method':<8}{'best it':>8}{'min err':>9}{'filter TV':>11}")
for cfg in scaling_methods(HEAT_BUDGET):
    h = run(p, cfg)
    phi = filters_direct(h.records[h.best_iteration - 1].x, s, p.b).phi
    print(f"{cfg.name:<8}{h.best_iteration:>8}{h.min_error:>9.4f}{total_variation(phi):>11.2f}")

# %% The projected runs keep every iterate non-negative and reach the lowest
# errors, since the exact solution is itself non-negative.
