"""Steplength rules for ``x_{k+1} = x_k - alpha_k M_k g_k`` on ``f(x) = ||Ax - b||^2 / 2``.

Each ``alpha_*`` function reads a :class:`StepState` and returns the raw
steplength; thresholding into ``[alpha_min, alpha_max]`` and the Armijo
reduction are separate steps. The adaptive rules (ABB_min1, cyclic BB1) keep
their memory on the state and update it when called.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scalings import IDENTITY, ScalingDescriptor, apply, apply_inverse

RULES = ("sd", "mg", "bb1", "bb2", "bb1s", "bb2s", "abb", "abbmin1", "cbb1", "asd", "fixed")
BB_FAMILY = ("bb1", "bb2", "bb1s", "bb2s", "abb", "abbmin1", "cbb1")

DEFAULT_PARAMS = {
    "abb": {"tau": 0.8},
    "abbmin1": {"tau": 0.5, "m": 3, "shrink": 0.9, "grow": 1.1},
    "cbb1": {"p": 4},
    "asd": {"tau": 0.8},
    "fixed": {"alpha": None},
}


class SteplengthError(ArithmeticError):
    """A steplength formula hit a zero or negative denominator."""


class Stationary(SteplengthError):
    """The gradient (or ``A M g``) vanished: nothing left to minimize along."""


class ArmijoError(RuntimeError):
    def __init__(self, q: int, z: float, decrease: float, required: float):
        self.q, self.z, self.decrease, self.required = q, z, decrease, required
        super().__init__(f"Armijo backtracking failed after q={q} reductions from z={z:.3e} "
                         f"(last decrease {decrease:.3e} < required {required:.3e})")


class CyclicBB1:
    """BB1 recomputed at k = 1, 1 + p, 1 + 2p, ... and reused in between."""

    def __init__(self, p: int = 4):
        if int(p) != p or p < 1:
            raise ValueError(f"cycle length must be a positive integer, got {p}")
        self.p = int(p)
        self.value: float | None = None

    def __call__(self, k: int, s, y) -> float:
        if self.value is None or (k - 1) % self.p == 0:
            self.value = bb1(s, y)
        return self.value


@dataclass
class StepState:
    A: np.ndarray
    x: np.ndarray
    g: np.ndarray
    M: ScalingDescriptor = IDENTITY
    k: int = 0
    s_prev: np.ndarray | None = None
    y_prev: np.ndarray | None = None
    bb2_history: list = field(default_factory=list)
    tau: float | None = None
    cbb1: CyclicBB1 | None = None

    def __post_init__(self):
        if (self.s_prev is None) != (self.y_prev is None):
            raise ValueError("s_prev and y_prev must both be given or both be absent")

    @property
    def has_history(self) -> bool:
        return self.s_prev is not None

    def _require_history(self):
        if not self.has_history:
            raise SteplengthError("BB-type rules need a previous step (k >= 1)")
        return self.s_prev, self.y_prev


def _ratio(num: float, den: float, what: str) -> float:
    if not den > 0 or not num > 0:
        raise SteplengthError(f"{what}: non-positive numerator or denominator ({num!r}/{den!r})")
    return num / den


def alpha_sd(state: StepState) -> float:
    """Exact minimizer of ``f(x - alpha M g)``: ``g^T M g / ||A M g||^2``."""
    d = apply(state.M, state.g)
    Ad = state.A @ d
    den = Ad @ Ad
    if den == 0:
        raise Stationary("A M g = 0")
    return _ratio(state.g @ d, den, "SD")


def alpha_mg(state: StepState) -> float:
    """Exact minimizer of ``||grad f(x - alpha M g)||``: ``g^T M A^T A g / ||A^T A M g||^2``."""
    A = state.A
    d = apply(state.M, state.g)
    AtAd = A.T @ (A @ d)
    den = AtAd @ AtAd
    if den == 0:
        raise Stationary("A^T A M g = 0")
    return _ratio(d @ (A.T @ (A @ state.g)), den, "MG")


def bb1(s, y) -> float:
    return _ratio(s @ s, s @ y, "BB1")


def bb2(s, y) -> float:
    return _ratio(s @ y, y @ y, "BB2")


def alpha_bb1(state: StepState) -> float:
    return bb1(*state._require_history())


def alpha_bb2(state: StepState) -> float:
    return bb2(*state._require_history())


def alpha_bb1s(state: StepState) -> float:
    """Scaled BB1: ``s^T M^-1 M^-1 s / s^T M^-1 y``."""
    s, y = state._require_history()
    Mis = apply_inverse(state.M, s)
    return _ratio(Mis @ Mis, Mis @ y, "BB1S")


def alpha_bb2s(state: StepState) -> float:
    """Scaled BB2: ``s^T M y / y^T M M y``."""
    s, y = state._require_history()
    My = apply(state.M, y)
    return _ratio(s @ My, My @ My, "BB2S")


def _bb_pair(state: StepState) -> tuple[float, float]:
    if state.M.is_identity:
        return alpha_bb1(state), alpha_bb2(state)
    return alpha_bb1s(state), alpha_bb2s(state)


def alpha_abb(state: StepState, tau: float = 0.8) -> float:
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    a1, a2 = _bb_pair(state)
    return a2 if a2 / a1 < tau else a1


def alpha_abbmin1(state: StepState, tau: float = 0.5, m: int = 3,
                  shrink: float = 0.9, grow: float = 1.1) -> float:
    """ABB_min1 with an adaptive switching threshold.

    ``tau`` only seeds ``state.tau`` on the first call. When ``BB2/BB1`` is
    below the threshold the smallest of the last ``m`` BB2 values is taken and
    the threshold shrinks; otherwise BB1 is taken and the threshold grows.
    """
    if state.tau is None:
        state.tau = tau
    a1, a2 = _bb_pair(state)
    state.bb2_history.append(a2)
    del state.bb2_history[:-m]
    if a2 / a1 < state.tau:
        state.tau *= shrink
        return min(state.bb2_history)
    state.tau *= grow
    return a1


def alpha_cbb1(state: StepState, p: int = 4) -> float:
    s, y = state._require_history()
    if state.cbb1 is None or state.cbb1.p != p:
        state.cbb1 = CyclicBB1(p)
    return state.cbb1(state.k, s, y)


def alpha_asd(state: StepState, tau: float = 0.8) -> float:
    """Adaptive SD: MG when ``MG/SD < tau``, SD otherwise."""
    a_sd, a_mg = alpha_sd(state), alpha_mg(state)
    return a_mg if a_mg / a_sd < tau else a_sd


def select_steplength(rule: str, state: StepState, **params) -> tuple[float, dict]:
    """Evaluate ``rule`` on ``state``; returns ``(alpha, info)``.

    BB-type rules use SD at k = 0, and also whenever their curvature quotient
    is not positive (possible once M changes between steps); ``info`` then
    carries ``bootstrap`` or ``fallback``. For BB-type rules ``info`` also
    keeps the raw (BB1, BB2) pair for later checks.
    """
    info: dict = {"rule": rule}
    if rule == "fixed":
        alpha = params.get("alpha")
        if alpha is None or not alpha > 0:
            raise ValueError("the fixed rule needs a positive alpha")
        return float(alpha), info
    if rule in BB_FAMILY and not state.has_history:
        info["bootstrap"] = "sd"
        return alpha_sd(state), info
    kw = {**DEFAULT_PARAMS.get(rule, {}), **params}
    if rule in BB_FAMILY:
        try:
            if rule in ("abb", "abbmin1") or state.M.is_identity:
                info["bb1"], info["bb2"] = _bb_pair(state)
            return _RULES[rule](state, **kw), info
        except Stationary:
            raise
        except SteplengthError as exc:
            info["fallback"] = "sd"
            info["reason"] = str(exc)
            return alpha_sd(state), info
    fn = _RULES.get(rule)
    if fn is None:
        raise ValueError(f"unknown steplength rule {rule!r}; choose from {RULES}")
    return fn(state, **kw), info


_RULES = {
    "sd": alpha_sd, "mg": alpha_mg, "bb1": alpha_bb1, "bb2": alpha_bb2,
    "bb1s": alpha_bb1s, "bb2s": alpha_bb2s, "abb": alpha_abb,
    "abbmin1": alpha_abbmin1, "cbb1": alpha_cbb1, "asd": alpha_asd,
}


def threshold_alpha(alpha: float, alpha_min: float = 1e-10, alpha_max: float = 1e10) -> float:
    """Clamp into ``[alpha_min, alpha_max]``; NaN and infinities map to ``alpha_min``."""
    if not 0 < alpha_min < alpha_max:
        raise ValueError(f"need 0 < alpha_min < alpha_max, got [{alpha_min}, {alpha_max}]")
    if not math.isfinite(alpha):
        return alpha_min
    return min(max(alpha, alpha_min), alpha_max)


def _backtrack(trial, z, beta, gamma, max_q):
    if not (0 < beta < 1 and 0 < gamma < 1):
        raise ValueError("Armijo needs beta, gamma in (0, 1)")
    if not z > 0:
        raise ValueError(f"initial step must be positive, got {z}")
    t = z
    for q in range(max_q + 1):
        decrease, required = trial(t)
        if decrease >= gamma * required:
            return t, q
        t *= beta
    raise ArmijoError(max_q, z, decrease, gamma * required)


def armijo(f, x, d, g, z: float, beta: float = 0.5, gamma: float = 1e-4,
           max_q: int = 60, decrease=None) -> tuple[float, int]:
    """Armijo rule along ``x - t d`` with ``d = M g``.

    Returns ``(beta**q * z, q)`` for the first ``q >= 0`` with
    ``f(x) - f(x - t d) >= gamma t g^T d``. ``decrease(x, p)``, if given,
    replaces the difference ``f(x) - f(x + p)`` (useful to avoid cancellation).
    """
    x, d, g = (np.asarray(v, dtype=float) for v in (x, d, g))
    gd = g @ d
    if not gd > 0:
        raise SteplengthError(f"not a descent direction: g^T M g = {gd!r}")
    dec = decrease or (lambda x0, p: f(x0) - f(x0 + p))
    return _backtrack(lambda t: (dec(x, -t * d), t * gd), z, beta, gamma, max_q)


def armijo_arc(f, x, d, g, z: float, beta: float = 0.5, gamma: float = 1e-4,
               max_q: int = 60, decrease=None) -> tuple[float, int]:
    """Armijo rule along the projection arc ``t -> max(x - t d, 0)``.

    Accepts the first ``t = beta**q z`` with
    ``f(x) - f(x(t)) >= gamma g^T (x - x(t))``.
    """
    x, d, g = (np.asarray(v, dtype=float) for v in (x, d, g))
    dec = decrease or (lambda x0, p: f(x0) - f(x0 + p))

    def trial(t):
        p = np.maximum(x - t * d, 0.0) - x
        return dec(x, p), -(g @ p)

    return _backtrack(trial, z, beta, gamma, max_q)


def armijo_direction(f, x, p, g, beta: float = 0.5, gamma: float = 1e-4,
                     max_q: int = 60, decrease=None) -> tuple[float, int]:
    """Armijo rule on ``lambda in (0, 1]`` along a feasible direction ``p``."""
    x, p, g = (np.asarray(v, dtype=float) for v in (x, p, g))
    gp = g @ p
    if not gp < 0:
        raise SteplengthError(f"feasible direction is not a descent direction: g^T p = {gp!r}")
    dec = decrease or (lambda x0, step: f(x0) - f(x0 + step))
    return _backtrack(lambda t: (dec(x, t * p), -t * gp), 1.0, beta, gamma, max_q)
