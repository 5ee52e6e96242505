"""SVD facade and closed-form spectral filters (least squares, TSVD, Tikhonov)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PROVENANCES = ("recurrence", "direct", "closed_form", "true_solution", "tsvd", "tikhonov")


class RankDeficientError(np.linalg.LinAlgError):
    """Raised when a singular value falls below the full-rank tolerance."""

    def __init__(self, index: int, value: float, threshold: float):
        self.index = index
        self.value = value
        self.threshold = threshold
        super().__init__(f"singular value {index} (1-based) is {value:.3e}, "
                         f"not above threshold {threshold:.3e}")


@dataclass(frozen=True)
class SvdTriple:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    def coefficients(self, b) -> np.ndarray:
        """``U^T b``."""
        return self.U.T @ np.asarray(b, dtype=float)


@dataclass
class FilterSet:
    """Filter factors ``phi`` of one solution, with where they came from.

    ``iteration`` is the iterate count ``k`` of ``x_k`` (``None`` for direct
    methods). Entries whose coefficient ``u_i^T b`` vanishes are stored as NaN
    and reported by ``finite``.
    """

    phi: np.ndarray
    provenance: str
    iteration: int | None = None
    sigma: np.ndarray | None = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        self.phi = np.asarray(self.phi, dtype=float)
        if self.sigma is not None and len(self.sigma) != len(self.phi):
            raise ValueError("sigma and phi lengths differ")

    def __len__(self):
        return len(self.phi)

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.phi)

    def to_csv(self, path) -> Path:
        path = Path(path)
        sigma = self.sigma if self.sigma is not None else np.full(len(self), np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "sigma", "phi", "finite", "provenance", "iteration"])
            for i, (s, p, ok) in enumerate(zip(sigma, self.phi, self.finite), start=1):
                w.writerow([i, repr(float(s)), repr(float(p)), int(ok), self.provenance,
                            "" if self.iteration is None else self.iteration])
        return path

    @classmethod
    def from_csv(cls, path) -> "FilterSet":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        it = rows[0]["iteration"] if rows else ""
        return cls(phi=np.array([float(r["phi"]) for r in rows]),
                   provenance=rows[0]["provenance"] if rows else "direct",
                   iteration=int(it) if it else None,
                   sigma=np.array([float(r["sigma"]) for r in rows]))


def svd(A, rank_rtol: float | None = None) -> SvdTriple:
    """Thin SVD of ``A`` with singular values in descending order.

    Every singular value must be strictly positive. Passing ``rank_rtol``
    additionally requires ``sigma_n > rank_rtol * sigma_1`` (for example
    ``1e3 * eps`` for full rank at working precision); the offending index is
    reported on failure.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise ValueError(f"expected an m x n matrix with m >= n, got {A.shape}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    threshold = 0.0 if rank_rtol is None else rank_rtol * s[0]
    bad = np.flatnonzero(~(s > threshold))
    if bad.size:
        i = int(bad[0])
        raise RankDeficientError(i + 1, float(s[i]), threshold)
    return SvdTriple(U, s, Vt.T)


def _check_b(svd_: SvdTriple, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (svd_.U.shape[0],):
        raise ValueError(f"b has shape {b.shape}, expected ({svd_.U.shape[0]},)")
    return b


def assemble_from_filters(svd_: SvdTriple, b, phi) -> np.ndarray:
    """``sum_i phi_i (u_i^T b / sigma_i) v_i``."""
    b = _check_b(svd_, b)
    phi = phi.phi if isinstance(phi, FilterSet) else np.asarray(phi, dtype=float)
    if phi.shape != svd_.sigma.shape:
        raise ValueError("filter vector length does not match the SVD")
    return svd_.V @ (phi * svd_.coefficients(b) / svd_.sigma)


def least_squares_solution(svd_: SvdTriple, b) -> np.ndarray:
    return assemble_from_filters(svd_, b, np.ones(svd_.n))


def _ratio(num: np.ndarray, beta: np.ndarray) -> np.ndarray:
    out = np.full(beta.shape, np.nan)
    ok = beta != 0
    out[ok] = num[ok] / beta[ok]
    return out


def extract_filters(svd_: SvdTriple, b, x) -> np.ndarray:
    """Invert the SVD expansion: ``phi_i = sigma_i (v_i^T x) / (u_i^T b)``; NaN where ``u_i^T b = 0``."""
    b = _check_b(svd_, b)
    if not np.any(b):
        raise ValueError("b is identically zero; filter factors are undefined")
    return _ratio(svd_.sigma * (svd_.V.T @ np.asarray(x, dtype=float)), svd_.coefficients(b))


def true_filters(svd_: SvdTriple, b, x_true) -> FilterSet:
    return FilterSet(extract_filters(svd_, b, x_true), "true_solution", sigma=svd_.sigma)


def tsvd_filters(n: int, r: int) -> FilterSet:
    if not 1 <= r <= n:
        raise ValueError(f"truncation index must lie in [1, {n}], got {r}")
    phi = np.zeros(n)
    phi[:r] = 1.0
    return FilterSet(phi, "tsvd")


def tsvd_solve(svd_: SvdTriple, b, r: int) -> np.ndarray:
    return assemble_from_filters(svd_, b, tsvd_filters(svd_.n, r))


def tikhonov_filters(sigma, lam: float) -> FilterSet:
    if not lam > 0:
        raise ValueError(f"Tikhonov parameter must be positive, got {lam}")
    sigma = np.asarray(sigma, dtype=float)
    s2 = sigma**2
    return FilterSet(s2 / (s2 + lam), "tikhonov", sigma=sigma)


def tikhonov_solve(svd_: SvdTriple, b, lam: float) -> np.ndarray:
    return assemble_from_filters(svd_, b, tikhonov_filters(svd_.sigma, lam))
