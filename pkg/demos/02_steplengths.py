"""Steplength rules on the same problem.

Exact line searches (steepest descent, minimal gradient) take many short
steps. Barzilai-Borwein type rules reach the same reconstruction quality
about three times sooner. The error curve of every rule first drops and
then rises again as noise enters the iterate.

Run with ``python demos/02_steplengths.py``.
"""

# %%
import numpy as np

from gradfilters import MethodConfig, make_problem, run

p = make_problem("heat:n=64,kappa=2", noise=0.01, seed=0)

# %%
rules = ["sd", "mg", "bb1", "bb2", "abb", "abbmin1", "cbb1"]
print(f"{'rule':<9}{'best it':>8}{'min err':>9}{'err@500':>9}{'err@5000':>10}")
for rule in rules:
    h = run(p, MethodConfig(steplength=rule, max_iterations=5000))
    e = h.errors
    print(f"{rule:<9}{h.best_iteration:>8}{h.min_error:>9.4f}{e[499]:>9.4f}{e[-1]:>10.4f}")

# %% Steps taken by BB1 oscillate wildly; SD's are bounded by the inverse
# extreme eigenvalues of A^T A but settle into a two-cycle.
h_sd = run(p, MethodConfig(steplength="sd", max_iterations=60))
h_bb = run(p, MethodConfig(steplength="bb1", max_iterations=60))
print("\nSD  steps 50..55:", np.round(h_sd.alphas[50:56], 1))
print("BB1 steps 50..55:", np.round(h_bb.alphas[50:56], 1))
