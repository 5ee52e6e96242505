"""Scaled (and optionally projected) gradient iterations with a full replay log.

Every iteration is stored as an :class:`IterationRecord` carrying the realized
steplength, the scaling used, the projection mask and the line-search
parameter, which is exactly what :mod:`gradfilters.filters` needs to rebuild
the iteration polynomial afterwards.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import steplengths as sl
from .problems import Problem
from .scalings import (DEFAULT_L_MAX, DEFAULT_L_MIN, IDENTITY, ScalingDescriptor,
                       build_cgls, build_hmz, build_isra)

log = logging.getLogger(__name__)

SCALINGS = ("none", "cgls", "isra", "hmz")
PRECISIONS = {"double": np.float64, "extended": np.longdouble}
PROJECTIONS = ("none", "feasible_direction", "projection_arc_unit_lambda")
_PROJECTION_ALIASES = {"arc": "projection_arc_unit_lambda", "projection_arc": "projection_arc_unit_lambda",
                       "unit": "projection_arc_unit_lambda", "lambda": "feasible_direction",
                       "feasible": "feasible_direction", "off": "none"}


@dataclass(frozen=True)
class MethodConfig:
    steplength: str = "sd"
    step_params: dict = field(default_factory=dict)
    scaling: str = "none"
    L_min: float = DEFAULT_L_MIN
    L_max: float = DEFAULT_L_MAX
    projection: str = "none"
    hmz_p: int = 4
    armijo_beta: float = 0.5
    armijo_gamma: float = 1e-4
    armijo_max_q: int = 60
    alpha_min: float = 1e-10
    alpha_max: float = 1e10
    max_iterations: int = 5000
    gtol: float = 0.0
    precision: str = "double"
    label: str | None = None

    def __post_init__(self):
        proj = _PROJECTION_ALIASES.get(self.projection, self.projection)
        object.__setattr__(self, "projection", proj)
        object.__setattr__(self, "scaling", "none" if self.scaling == "identity" else self.scaling)
        self.validate()

    def validate(self) -> None:
        if self.steplength not in sl.RULES:
            raise ValueError(f"unknown steplength {self.steplength!r}; choose from {sl.RULES}")
        if self.scaling not in SCALINGS:
            raise ValueError(f"unknown scaling {self.scaling!r}; choose from {SCALINGS}")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"unknown projection {self.projection!r}; choose from {PROJECTIONS}")
        if self.projection != "none" and self.scaling == "cgls":
            raise ValueError("projected methods need a diagonal or identity scaling, not cgls")
        if self.scaling == "cgls" and self.steplength in ("bb1s", "bb2s", "abb", "abbmin1"):
            raise ValueError("scaled BB rules need an invertible symmetric scaling; cgls is neither")
        if not 0 < self.L_min < self.L_max:
            raise ValueError("need 0 < L_min < L_max")
        if not 0 < self.alpha_min < self.alpha_max:
            raise ValueError("need 0 < alpha_min < alpha_max")
        if not (0 < self.armijo_beta < 1 and 0 < self.armijo_gamma < 1):
            raise ValueError("Armijo beta and gamma must lie in (0, 1)")
        if self.precision not in PRECISIONS:
            raise ValueError(f"unknown precision {self.precision!r}; choose from {tuple(PRECISIONS)}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.steplength == "fixed" and not self.step_params.get("alpha", 0) > 0:
            raise ValueError("the fixed steplength needs step_params={'alpha': value > 0}")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        base = self.steplength.upper() if self.scaling == "none" else self.scaling.upper()
        if self.steplength == "abbmin1":
            base = "ABB_min1"
        return base + ("_P" if self.projection != "none" else "")

    @property
    def uses_armijo(self) -> bool:
        return self.scaling != "none" or self.projection != "none"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class IterationRecord:
    """Iteration ``k``: ``x_k -> x_{k+1}``.

    ``x`` is the new iterate ``x_{k+1}``; ``grad_norm`` is ``||g_k||`` and
    ``objective``/``rel_error`` are evaluated at ``x_{k+1}``.
    """

    k: int
    alpha: float
    scaling: ScalingDescriptor
    x: np.ndarray
    grad_norm: float
    objective: float
    rel_error: float
    mask: np.ndarray | None = None
    lam: float | None = None
    raw_alpha: float | None = None
    armijo_q: int | None = None
    info: dict = field(default_factory=dict)


@dataclass
class RunHistory:
    problem: Problem
    config: MethodConfig
    records: list = field(default_factory=list)
    x0: np.ndarray | None = None
    stop_reason: str = "max_iterations"

    def __len__(self):
        return len(self.records)

    @property
    def filters_available(self) -> bool:
        return self.x0 is None or not np.any(self.x0)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.rel_error for r in self.records])

    @property
    def alphas(self) -> np.ndarray:
        return np.array([r.alpha for r in self.records])

    def iterate(self, j: int) -> np.ndarray:
        """``x_j``; ``x_0`` is the starting point."""
        if j == 0:
            return np.zeros(self.problem.n) if self.x0 is None else self.x0.copy()
        return self.records[j - 1].x

    @property
    def best_index(self) -> int:
        return best_iterate(self)[0]

    @property
    def min_error(self) -> float:
        return best_iterate(self)[1]

    @property
    def best_iteration(self) -> int:
        """Iteration count of the best iterate (``x_{best_index + 1}``)."""
        return self.best_index + 1


def best_iterate(h: RunHistory) -> tuple[int, float, np.ndarray]:
    """Record index with the smallest relative error (first one on ties)."""
    if not h.records:
        raise ValueError("empty run history")
    if not np.any(h.problem.x_true):
        raise ValueError("relative errors need a nonzero x_true")
    errs = h.errors
    if np.all(np.isnan(errs)):
        raise ValueError("no finite relative errors in the history")
    i = int(np.nanargmin(errs))
    return i, float(errs[i]), h.records[i].x


def _build_scaling(cfg: MethodConfig, A, x, g, s_prev, y_prev, hmz_cbb1, k) -> ScalingDescriptor:
    if cfg.scaling == "none":
        return IDENTITY
    if cfg.scaling == "cgls":
        return build_cgls(s_prev, y_prev)
    if cfg.scaling == "isra":
        return build_isra(x, A.T @ (A @ x), cfg.L_min, cfg.L_max)
    if s_prev is None:
        Ag = A @ g
        a = (g @ g) / (Ag @ Ag)
    else:
        a = hmz_cbb1(k, s_prev, y_prev)
    return build_hmz(x, g, a, cfg.L_min, cfg.L_max)


def run(p: Problem, cfg: MethodConfig, x0=None) -> RunHistory:
    """Run ``cfg`` on ``p`` from ``x0`` (zero by default) for ``cfg.max_iterations`` steps.

    Stops early when the gradient vanishes (or drops below ``gtol`` relative
    to ``||A^T b||``), when a steplength formula breaks down, or when an
    iterate stops being finite; the reason ends up in ``stop_reason``.

    ``cfg.precision = "extended"`` carries iterates and gradients in
    ``numpy.longdouble``. Large BB-type steps amplify rounding in the iterate
    by ``|1 - alpha sigma_i^2|`` per step; the extra digits keep logged
    iterates close to their exact polynomial image, at some cost in speed.
    """
    dt = PRECISIONS[cfg.precision]
    A, b, x_true = p.A.astype(dt), p.b.astype(dt), p.x_true
    n = A.shape[1]
    x = np.zeros(n, dtype=dt) if x0 is None else np.array(x0, dtype=dt)
    if cfg.projection != "none" and np.any(x < 0):
        raise ValueError("projected methods need a non-negative starting point")
    hist = RunHistory(p, cfg, x0=None if x0 is None else x.copy())
    xt_norm = np.linalg.norm(x_true)
    Atb = A.T @ b
    g_stop = cfg.gtol * np.linalg.norm(Atb)
    g = A.T @ (A @ x) - Atb
    state = sl.StepState(A, x, g)
    hmz_cbb1 = sl.CyclicBB1(cfg.hmz_p)
    beta, gamma, max_q = cfg.armijo_beta, cfg.armijo_gamma, cfg.armijo_max_q

    for k in range(cfg.max_iterations):
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0 or gnorm <= g_stop:
            hist.stop_reason = "converged"
            break

        def quad_decrease(x0_, step, g_=g):
            # f(x) - f(x + step), exact for the quadratic
            As = A @ step
            return -(g_ @ step) - 0.5 * (As @ As)

        M = _build_scaling(cfg, A, x, g, state.s_prev, state.y_prev, hmz_cbb1, k)
        state.k, state.x, state.g, state.M = k, x, g, M
        try:
            raw, info = sl.select_steplength(cfg.steplength, state, **cfg.step_params)
        except sl.Stationary:
            hist.stop_reason = "stationary"
            break
        except sl.SteplengthError as exc:
            hist.stop_reason = f"steplength_breakdown: {exc}"
            log.warning("%s stopped at k=%d: %s", cfg.name, k, exc)
            break
        alpha = float(sl.threshold_alpha(raw, cfg.alpha_min, cfg.alpha_max))
        d = M.apply(g)
        mask = lam = q = None
        try:
            if cfg.projection == "none":
                if cfg.uses_armijo:
                    alpha, q = sl.armijo(None, x, d, g, alpha, beta, gamma, max_q, quad_decrease)
                x_new = x - alpha * d
            elif cfg.projection == "projection_arc_unit_lambda":
                alpha, q = sl.armijo_arc(None, x, d, g, alpha, beta, gamma, max_q, quad_decrease)
                xbar = x - alpha * d
                mask = xbar >= 0
                x_new = np.where(mask, xbar, 0.0)
            else:
                xbar = x - alpha * d
                mask = xbar >= 0
                direction = np.where(mask, xbar, 0.0) - x
                if not np.any(direction):
                    hist.stop_reason = "stationary"
                    break
                lam, q = sl.armijo_direction(None, x, direction, g, beta, gamma, max_q,
                                             quad_decrease)
                x_new = x + lam * direction
        except (sl.ArmijoError, sl.SteplengthError) as exc:
            hist.stop_reason = f"line_search_failed: {exc}"
            log.warning("%s stopped at k=%d: %s", cfg.name, k, exc)
            break

        if not np.all(np.isfinite(x_new)):
            hist.stop_reason = "non_finite_iterate"
            log.error("%s produced a non-finite iterate at k=%d", cfg.name, k)
            break
        r = A @ x_new - b
        g_new = A.T @ r
        err = np.linalg.norm((x_new - x_true).astype(float)) / xt_norm if xt_norm > 0 else np.nan
        hist.records.append(IterationRecord(
            k=k, alpha=float(alpha), scaling=M, x=x_new, grad_norm=gnorm,
            objective=float(0.5 * (r @ r)), rel_error=float(err), mask=mask, lam=lam,
            raw_alpha=float(raw), armijo_q=q, info=info))
        s, y = x_new - x, g_new - g
        if s @ y > 0:
            state.s_prev, state.y_prev = s, y
        x, g = x_new, g_new
    return hist


def run_unconstrained(p: Problem, cfg: MethodConfig, x0=None) -> RunHistory:
    if cfg.projection != "none":
        raise ValueError("run_unconstrained needs projection='none'")
    return run(p, cfg, x0)


def run_projected(p: Problem, cfg: MethodConfig, x0=None) -> RunHistory:
    if cfg.projection == "none":
        raise ValueError("run_projected needs a projection mode")
    return run(p, cfg, x0)


def landweber_mode(p: Problem, alpha: float, k_max: int) -> RunHistory:
    """Fixed-step gradient iteration ``x_{k+1} = x_k - alpha g_k`` with ``0 < alpha < 2/sigma_1^2``."""
    s1 = np.linalg.norm(p.A, 2)
    if not 0 < alpha < 2 / s1**2:
        raise ValueError(f"Landweber needs 0 < alpha < 2/sigma_1^2 = {2 / s1**2:.6g}, got {alpha}")
    cfg = MethodConfig(steplength="fixed", step_params={"alpha": alpha}, max_iterations=k_max,
                       alpha_min=min(1e-10, alpha / 2), alpha_max=max(1e10, 2 * alpha),
                       label="Landweber")
    return run(p, cfg)


def replay_step(h: RunHistory, k: int) -> np.ndarray:
    """Recompute ``x_{k+1}`` from record ``k`` and ``x_k``."""
    rec = h.records[k]
    A, b = h.problem.A, h.problem.b
    x = h.iterate(k)
    g = A.T @ (A @ x - b)
    xbar = x - rec.alpha * rec.scaling.apply(g)
    if rec.mask is None:
        return xbar
    proj = np.where(rec.mask, xbar, 0.0)
    if rec.lam is None:
        return proj
    return x + rec.lam * (proj - x)


def replay_deviation(h: RunHistory) -> float:
    """Largest relative gap between logged iterates and their replay."""
    worst = 0.0
    for k, rec in enumerate(h.records):
        ref = np.linalg.norm(rec.x)
        gap = np.linalg.norm(replay_step(h, k) - rec.x)
        worst = max(worst, gap / ref if ref > 0 else gap)
    return worst


def save_history(h: RunHistory, directory, iterates: bool = False) -> Path:
    """Write ``summary.csv`` (always), ``iterates.csv`` (optional) and ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "alpha", "raw_alpha", "lambda", "armijo_q", "grad_norm",
                    "objective", "rel_error", "n_masked"])
        for r in h.records:
            w.writerow([r.k + 1, repr(r.alpha), repr(r.raw_alpha),
                        "" if r.lam is None else repr(r.lam),
                        "" if r.armijo_q is None else r.armijo_q,
                        repr(r.grad_norm), repr(r.objective), repr(r.rel_error),
                        "" if r.mask is None else int(np.sum(~r.mask))])
    if iterates:
        np.savetxt(d / "iterates.csv", np.array([r.x for r in h.records]), delimiter=",",
                   fmt="%.17g")
    manifest = {
        "method": h.config.name,
        "config": h.config.to_dict(),
        "problem": {"name": h.problem.name, "params": h.problem.params,
                    "noise_level": h.problem.noise_level, "seed": h.problem.rng_seed},
        "iterations": len(h),
        "stop_reason": h.stop_reason,
    }
    if h.records:
        i, e, _ = best_iterate(h)
        manifest.update(best_iteration=i + 1, min_error=e)
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return d
