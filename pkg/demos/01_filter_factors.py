"""Filter factors of a gradient iteration, three ways.

A gradient method started at zero produces iterates of the form
x_k = P_k A^T b for a matrix P_k, and in the SVD basis those iterates are
weighted sums of the naive solution components. The weights are the filter
factors. This demo computes them from the matrix recurrence, directly from
the iterate, and (for unscaled runs) from the closed-form product, and
shows that they agree.

Run with ``python demos/01_filter_factors.py``.
"""

# %%
import numpy as np

from gradfilters import MethodConfig, make_problem, run, svd
from gradfilters.filters import (check_agreement, filters_direct, filters_from_polynomial,
                                 filters_nonscaled, replay_polynomials)
from gradfilters.spectral import true_filters

np.set_printoptions(precision=3, suppress=True, linewidth=100)

# %% A small inverse heat problem with 1% noise.
p = make_problem("heat:n=16,kappa=2", noise=0.01, seed=0)
s = svd(p.A)
print("singular values:", s.sigma[[0, 4, 8, 12, 15]])

# %% Steepest descent, 40 iterations.
h = run(p, MethodConfig(steplength="sd", max_iterations=40))
print(f"best iterate {h.best_iteration}, error {h.min_error:.4f}")

# %% Filters after 5 and 40 steps, from the recurrence and from the iterate.
for rec, state in replay_polynomials(h):
    if rec.k + 1 in (5, 40):
        poly = filters_from_polynomial(state, s, p.b).phi
        direct = filters_direct(rec.x, s, p.b).phi
        closed = filters_nonscaled(h.alphas[: rec.k + 1], s.sigma).phi
        print(f"\nafter {rec.k + 1} steps")
        print("  recurrence :", poly[::3])
        print("  direct     :", direct[::3])
        print("  closed form:", closed[::3])

# %% Large singular values pass almost unchanged; small ones are damped.
# The filters that reproduce x_true exactly are erratic by comparison,
# because they try to undo the noise.
print("\ntrue-solution filters:", true_filters(s, p.b, p.x_true).phi[::3])

# %% The agreement check over the whole run.
rep = check_agreement(h, s)
print(f"\nworst gap recurrence vs direct {rep.poly_vs_direct:.1e}, "
      f"vs closed form {rep.poly_vs_closed:.1e}")
