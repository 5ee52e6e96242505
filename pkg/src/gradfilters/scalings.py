"""Scaling matrices ``M_k`` for the scaled gradient step ``x - alpha M g``.

Four kinds are supported and none is ever formed as a dense matrix:

* ``identity``
* ``cgls``: the rank-one update ``I - s y^T / (y^T s)`` that turns SD into CGLS
* ``isra``: ``diag(x / (A^T A x))``
* ``hmz``: ``diag(a x / (x + a (A^T A x - A^T b)^+))`` with a cyclic BB1 value ``a``

The diagonal kinds are clamped to ``[L_min, L_max]``; degenerate quotients
(0/0, x/0, inf, nan) are set to ``L_min``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("identity", "cgls", "isra", "hmz")
DEFAULT_L_MIN = 1e-3
DEFAULT_L_MAX = 1e8


@dataclass(frozen=True)
class ScalingDescriptor:
    kind: str = "identity"
    diag: np.ndarray | None = None
    s: np.ndarray | None = None
    y: np.ndarray | None = None
    L_min: float = DEFAULT_L_MIN
    L_max: float = DEFAULT_L_MAX

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scaling kind {self.kind!r}")
        if self.kind in ("isra", "hmz") and self.diag is None:
            raise ValueError(f"{self.kind} scaling needs diagonal entries")
        if self.kind == "cgls" and (self.s is None or self.y is None):
            raise ValueError("cgls scaling needs the (s, y) pair")

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    @property
    def is_diagonal(self) -> bool:
        return self.kind in ("identity", "isra", "hmz")

    def apply(self, v: np.ndarray) -> np.ndarray:
        return apply(self, v)

    def apply_inverse(self, v: np.ndarray) -> np.ndarray:
        return apply_inverse(self, v)


IDENTITY = ScalingDescriptor()


def _as_float(v) -> np.ndarray:
    v = np.asarray(v)
    return v if np.issubdtype(v.dtype, np.floating) else v.astype(float)


def apply(M: ScalingDescriptor, v) -> np.ndarray:
    """Return ``M v``. A 2-D ``v`` is treated column by column, i.e. ``M @ v``.

    Floating inputs keep their dtype, so extended-precision replays stay extended.
    """
    v = _as_float(v)
    if M.kind == "identity":
        return v.copy()
    if M.kind == "cgls":
        ys = M.y @ M.s
        return v - np.multiply.outer(M.s, M.y @ v) / ys
    d = M.diag if v.ndim == 1 else M.diag[:, None]
    return d * v


def apply_inverse(M: ScalingDescriptor, v) -> np.ndarray:
    v = _as_float(v)
    if M.kind == "identity":
        return v.copy()
    if M.kind == "cgls":
        raise ValueError("the cgls scaling is not inverted; use a diagonal or identity scaling")
    d = M.diag if v.ndim == 1 else M.diag[:, None]
    return v / d


def _clamp(q: np.ndarray, L_min: float, L_max: float) -> np.ndarray:
    if not 0 < L_min < L_max:
        raise ValueError(f"need 0 < L_min < L_max, got [{L_min}, {L_max}]")
    q = np.where(np.isfinite(q), q, L_min)
    return np.clip(q, L_min, L_max)


def build_identity(L_min=DEFAULT_L_MIN, L_max=DEFAULT_L_MAX) -> ScalingDescriptor:
    return ScalingDescriptor("identity", L_min=L_min, L_max=L_max)


def build_cgls(s_prev, y_prev) -> ScalingDescriptor:
    """Rank-one CGLS scaling; identity when there is no previous step yet."""
    if s_prev is None or y_prev is None:
        return IDENTITY
    s_prev = np.array(s_prev, dtype=float)
    y_prev = np.array(y_prev, dtype=float)
    if y_prev @ s_prev == 0:
        raise ValueError("y^T s = 0: the cgls scaling is undefined")
    return ScalingDescriptor("cgls", s=s_prev, y=y_prev)


def build_isra(x, AtA_x, L_min=DEFAULT_L_MIN, L_max=DEFAULT_L_MAX) -> ScalingDescriptor:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = x / np.asarray(AtA_x, dtype=float)
    return ScalingDescriptor("isra", diag=_clamp(q, L_min, L_max), L_min=L_min, L_max=L_max)


def build_hmz(x, g, alpha_cbb1: float, L_min=DEFAULT_L_MIN, L_max=DEFAULT_L_MAX) -> ScalingDescriptor:
    if not alpha_cbb1 > 0:
        raise ValueError(f"HMZ needs a positive cyclic BB1 value, got {alpha_cbb1}")
    x = np.asarray(x, dtype=float)
    gp = np.maximum(np.asarray(g, dtype=float), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = alpha_cbb1 * x / (x + alpha_cbb1 * gp)
    return ScalingDescriptor("hmz", diag=_clamp(q, L_min, L_max), L_min=L_min, L_max=L_max)


def as_dense(M: ScalingDescriptor, n: int) -> np.ndarray:
    """Materialize ``M`` (tests and debugging only)."""
    return apply(M, np.eye(n))
