"""Filter factors of gradient iterates.

Starting from ``x_0 = 0`` every iterate is ``x_{k+1} = P_k(A^T A) A^T b`` for a
matrix "polynomial" ``P_k`` built by the recurrence

    P_k = P_{k-1} + alpha_k M_k (I - Omega P_{k-1}),    P_{-1} = 0,

with ``Omega = A^T A``; projections wrap the update with the 0/1 mask ``D_k``.
With ``Q_k = V^T P_k V`` the filter of component ``i`` is

    phi_i = sigma_i * (Q_k diag(sigma) U^T b)_i / (u_i^T b).

Three independent routes are provided: the recurrence above, the product
formula for unscaled runs, and direct extraction from the iterate.

The recurrence is replayed in ``numpy.longdouble`` by default. Long runs with
large or oscillating steplengths amplify rounding in ``P_k``, and the extra
digits keep that below the rounding already present in the logged iterates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver import RunHistory, best_iterate
from .spectral import FilterSet, SvdTriple, _check_b, extract_filters, true_filters


@dataclass
class PolynomialState:
    """``P_k(A^T A)`` as a dense matrix; ``k = -1`` is the zero start."""

    P: np.ndarray
    k: int = -1

    @classmethod
    def zero(cls, n: int, dtype=np.longdouble) -> "PolynomialState":
        return cls(np.zeros((n, n), dtype=dtype), -1)

    def iterate(self, Atb) -> np.ndarray:
        return self.P @ Atb


def _check(state: PolynomialState, record, AtA):
    n = state.P.shape[0]
    if AtA.shape != (n, n) or record.x.shape != (n,):
        raise ValueError("dimension mismatch between polynomial, record and A^T A")
    if record.k != state.k + 1:
        raise ValueError(f"record k={record.k} does not follow polynomial k={state.k}")


def _unconstrained_update(state, record, AtA) -> np.ndarray:
    R = np.eye(state.P.shape[0], dtype=state.P.dtype) - AtA @ state.P
    return state.P + record.alpha * record.scaling.apply(R)


def advance_unconstrained(state: PolynomialState, record, AtA) -> PolynomialState:
    _check(state, record, AtA)
    if record.mask is not None:
        raise ValueError("record comes from a projected run")
    return PolynomialState(_unconstrained_update(state, record, AtA), record.k)


def advance_projected_unit_lambda(state: PolynomialState, record, AtA) -> PolynomialState:
    """``P_k = D_k (P_{k-1} + alpha_k M_k (I - Omega P_{k-1}))``."""
    _check(state, record, AtA)
    if record.mask is None or record.lam is not None:
        raise ValueError("record does not come from a unit-lambda projected run")
    P = _unconstrained_update(state, record, AtA)
    return PolynomialState(np.where(record.mask[:, None], P, 0.0), record.k)


def advance_projected_lambda(state: PolynomialState, record, AtA) -> PolynomialState:
    """``P_k = P_{k-1} + lam [alpha D M - (I - D + alpha D M Omega) P_{k-1}]``."""
    _check(state, record, AtA)
    if record.mask is None or record.lam is None:
        raise ValueError("record does not come from a feasible-direction run")
    D = record.mask.astype(float)[:, None]
    n = state.P.shape[0]
    aDM = D * (record.alpha * record.scaling.apply(np.eye(n, dtype=state.P.dtype)))
    inner = (1.0 - D) * state.P + aDM @ (AtA @ state.P)
    return PolynomialState(state.P + record.lam * (aDM - inner), record.k)


def advance(state: PolynomialState, record, AtA) -> PolynomialState:
    """Dispatch on the record's mode."""
    if record.mask is None:
        return advance_unconstrained(state, record, AtA)
    if record.lam is None:
        return advance_projected_unit_lambda(state, record, AtA)
    return advance_projected_lambda(state, record, AtA)


def replay_polynomials(h: RunHistory, upto: int | None = None, dtype=np.longdouble):
    """Yield ``(record, P_k)`` for each record of ``h`` (optionally the first ``upto``)."""
    if not h.filters_available:
        raise ValueError("filter analysis needs the run to start from x_0 = 0")
    A = h.problem.A.astype(dtype)
    AtA = A.T @ A
    state = PolynomialState.zero(A.shape[1], dtype)
    for rec in h.records[:upto]:
        state = advance(state, rec, AtA)
        yield rec, state


def filters_from_polynomial(state: PolynomialState, svd_: SvdTriple, b) -> FilterSet:
    b = _check_b(svd_, b)
    if not np.any(b):
        raise ValueError("b is identically zero; filter factors are undefined")
    beta = svd_.coefficients(b)
    V = svd_.V.astype(state.P.dtype)
    Q = V.T @ state.P @ V
    num = svd_.sigma * (Q @ (svd_.sigma * beta))
    phi = np.full(beta.shape, np.nan)
    ok = beta != 0
    phi[ok] = (num[ok] / beta[ok]).astype(float)
    return FilterSet(phi, "recurrence", iteration=state.k + 1, sigma=svd_.sigma)


def filters_nonscaled(alphas, sigma) -> FilterSet:
    """``phi_i = 1 - prod_l (1 - alpha_l sigma_i^2)`` for ``M_k = I``."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if alphas.size == 0:
        raise ValueError("need at least one steplength")
    sigma = np.asarray(sigma, dtype=float)
    prod = np.prod(1.0 - np.multiply.outer(alphas, sigma**2), axis=0)
    return FilterSet(1.0 - prod, "closed_form", iteration=alphas.size, sigma=sigma)


def filters_nonscaled_history(alphas, sigma) -> np.ndarray:
    """Row ``k`` holds the closed-form filters of ``x_{k+1}``."""
    alphas = np.asarray(alphas, dtype=float)
    return 1.0 - np.cumprod(1.0 - np.multiply.outer(alphas, np.asarray(sigma) ** 2), axis=0)


def filters_direct(x, svd_: SvdTriple, b, iteration: int | None = None) -> FilterSet:
    return FilterSet(extract_filters(svd_, b, x), "direct", iteration=iteration,
                     sigma=svd_.sigma)


def relative_deviation(a: np.ndarray, b: np.ndarray) -> float:
    """``max |a - b| / max(|a|, |b|)`` over entries finite in both (0 when they agree exactly)."""
    a, b = np.asarray(a), np.asarray(b)
    ok = np.isfinite(a) & np.isfinite(b)
    diff = np.abs(a[ok] - b[ok])
    scale = np.maximum(np.abs(a[ok]), np.abs(b[ok]))
    nz = diff > 0
    return float(np.max(diff[nz] / scale[nz])) if np.any(nz) else 0.0


@dataclass
class AgreementReport:
    iterations: int
    poly_vs_direct: float
    poly_vs_closed: float | None
    poly_iterate: float


def check_agreement(h: RunHistory, svd_: SvdTriple, upto: int | None = None,
                    dtype=np.longdouble) -> AgreementReport:
    """Compare the three filter routes at every iteration of ``h``.

    ``poly_iterate`` is the worst ``||P_k A^T b - x_{k+1}|| / ||x_{k+1}||``.
    """
    b = h.problem.b
    Atb = h.problem.A.T @ b
    unscaled = h.config.scaling == "none" and h.config.projection == "none"
    closed = filters_nonscaled_history(h.alphas[:upto], svd_.sigma) if unscaled else None
    worst_d = worst_c = worst_x = 0.0
    count = 0
    for rec, state in replay_polynomials(h, upto, dtype):
        phi = filters_from_polynomial(state, svd_, b).phi
        worst_d = max(worst_d, relative_deviation(phi, filters_direct(rec.x, svd_, b).phi))
        if closed is not None:
            worst_c = max(worst_c, relative_deviation(phi, closed[rec.k]))
        xn = np.linalg.norm(rec.x)
        gap = np.linalg.norm((state.iterate(Atb) - rec.x).astype(float))
        worst_x = max(worst_x, float(gap / xn if xn > 0 else gap))
        count += 1
    return AgreementReport(count, worst_d, worst_c if closed is not None else None, worst_x)


def filter_convergence_report(h: RunHistory, svd_: SvdTriple, b=None,
                              iterations=(10, 30), include_best: bool = True) -> dict:
    """Recurrence filters at the requested iterate counts plus the true-solution filters.

    Keys are ``"true"``, ``"best"`` and the iteration numbers; an iteration
    beyond the run length raises ``IndexError``.
    """
    b = h.problem.b if b is None else b
    wanted = {int(j): str(j) for j in iterations}
    for j in wanted:
        if not 1 <= j <= len(h):
            raise IndexError(f"iteration {j} outside the run (1..{len(h)})")
    if include_best and h.records:
        best = best_iterate(h)[0] + 1
        wanted.setdefault(best, "best")
        labels_best = best
    else:
        labels_best = None
    out = {"true": true_filters(svd_, b, h.problem.x_true)}
    last = max(wanted, default=0)
    if last:
        for rec, state in replay_polynomials(h, last):
            j = rec.k + 1
            if j in wanted:
                fs = filters_from_polynomial(state, svd_, b)
                out[wanted[j]] = fs
                if j == labels_best:
                    out["best"] = fs
    return out
