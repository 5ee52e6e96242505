"""Experiment harness: method grids over noise seeds, summary tables, filter
curve bundles and restored images.

Everything written to disk is plain CSV, JSON or portable graymap, and each
bundle carries a manifest with the problem spec, seeds and method configs so
it can be regenerated exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .filters import filter_convergence_report
from .problems import make_problem
from .solver import MethodConfig, best_iterate, run
from .spectral import svd, true_filters

log = logging.getLogger(__name__)

HEAT = "heat:n=64,kappa=2"
BLUR = "blur:N=16,band=3,sigma=1.0"
NOISE = 0.01
SEEDS = tuple(range(10))
HEAT_BUDGET = 5000
BLUR_BUDGET = 3000


def table1_methods(max_iterations: int = HEAT_BUDGET) -> list[MethodConfig]:
    rules = [("mg", "MG"), ("sd", "SD"), ("bb1", "BB1"), ("bb2", "BB2"), ("abb", "ABB"),
             ("abbmin1", "ABB_min1")]
    return [MethodConfig(steplength=r, label=lab, max_iterations=max_iterations)
            for r, lab in rules]


def scaling_methods(max_iterations: int, projection: str = "projection_arc_unit_lambda"):
    """The seven rows of the scaling comparison, all with the SD steplength."""
    rows = [("none", "none", "SD"), ("cgls", "none", "CGLS"), ("isra", "none", "ISRA"),
            ("hmz", "none", "HMZ"), ("none", projection, "SD_P"),
            ("isra", projection, "ISRA_P"), ("hmz", projection, "HMZ_P")]
    return [MethodConfig(steplength="sd", scaling=s, projection=pr, label=lab,
                         max_iterations=max_iterations) for s, pr, lab in rows]


def table2_methods(max_iterations: int = HEAT_BUDGET, **kw):
    return scaling_methods(max_iterations, **kw)


def table3_methods(max_iterations: int = BLUR_BUDGET, **kw):
    return scaling_methods(max_iterations, **kw)


@dataclass
class RunSummary:
    method: str
    seed: int
    best_iteration: int | None = None
    min_error: float | None = None
    final_error: float | None = None
    peak_after_best: float | None = None  # largest error after the best iterate
    iterations: int = 0
    stop_reason: str = ""
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.best_iteration is not None


def summarize(h, seed: int) -> RunSummary:
    i, e, _ = best_iterate(h)
    peak = float(np.max(h.errors[i:]))
    return RunSummary(h.config.name, seed, i + 1, e, float(h.errors[-1]), peak, len(h), h.stop_reason)


def _run_one(task) -> RunSummary:
    spec, noise, seed, cfg = task
    try:
        return summarize(run(make_problem(spec, noise, seed), cfg), seed)
    except Exception as exc:  # one failing row must not sink the table
        log.error("%s seed %d failed: %s", cfg.name, seed, exc)
        return RunSummary(cfg.name, seed, error=f"{type(exc).__name__}: {exc}")


def run_grid(spec: str, methods, seeds=SEEDS, noise: float = NOISE, jobs: int = 1) -> list[RunSummary]:
    """Run every (method, seed) pair; results keep method order, then seed order."""
    for cfg in methods:
        cfg.validate()
    tasks = [(spec, noise, s, cfg) for cfg in methods for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


@dataclass
class Table:
    title: str
    spec: str
    noise: float
    seeds: list
    methods: list
    runs: list = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.runs)

    def by_method(self, name: str) -> list[RunSummary]:
        return [r for r in self.runs if r.method == name]

    def aggregate(self, name: str) -> dict:
        ok = [r for r in self.by_method(name) if r.ok]
        out = {"method": name, "runs": len(ok)}
        for key in ("best_iteration", "min_error"):
            v = np.array([getattr(r, key) for r in ok], dtype=float)
            out.update({f"{key}_median": float(np.median(v)) if v.size else np.nan,
                        f"{key}_min": float(v.min()) if v.size else np.nan,
                        f"{key}_max": float(v.max()) if v.size else np.nan})
        return out

    def median(self, name: str, key: str = "min_error") -> float:
        return self.aggregate(name)[f"{key}_median"]

    def rows(self) -> list[dict]:
        """Per-seed rows, each method followed by its median row (omitted for one seed)."""
        out = []
        for cfg in self.methods:
            for r in self.by_method(cfg.name):
                out.append({"method": r.method, "seed": r.seed, "best_iteration": r.best_iteration,
                            "min_error": r.min_error, "final_error": r.final_error,
                            "iterations": r.iterations, "stop_reason": r.stop_reason,
                            "error": r.error or ""})
            if len(self.seeds) > 1:
                a = self.aggregate(cfg.name)
                out.append({"method": cfg.name, "seed": "median",
                            "best_iteration": a["best_iteration_median"],
                            "min_error": a["min_error_median"], "final_error": "",
                            "iterations": "", "stop_reason": "",
                            "error": f"min/max error {a['min_error_min']:.4g}/{a['min_error_max']:.4g}"})
        return out

    def write_csv(self, path) -> Path:
        path = Path(path)
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["method"])
            w.writeheader()
            w.writerows(rows)
        return path

    def to_text(self) -> str:
        lines = [f"{self.title}  ({self.spec}, noise {self.noise}, seeds {list(self.seeds)})",
                 f"{'method':<10}{'seed':>8}{'best it':>10}{'min err':>10}{'final err':>11}  note"]
        for r in self.rows():
            bi = "" if r["best_iteration"] in (None, "") else f"{r['best_iteration']:.0f}"
            me = "" if r["min_error"] in (None, "") else f"{r['min_error']:.4f}"
            fe = "" if r["final_error"] in (None, "") else f"{r['final_error']:.4f}"
            note = r["error"] or ("" if r["stop_reason"] in ("", "max_iterations") else r["stop_reason"])
            lines.append(f"{r['method']:<10}{r['seed']!s:>8}{bi:>10}{me:>10}{fe:>11}  {note}")
        return "\n".join(lines)

    def manifest(self) -> dict:
        return {"title": self.title, "problem": self.spec, "noise": self.noise,
                "seeds": list(self.seeds), "methods": [c.to_dict() for c in self.methods]}

    def save(self, directory, stem: str) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.write_csv(d / f"{stem}.csv")
        (d / f"{stem}.txt").write_text(self.to_text() + "\n")
        (d / f"{stem}.json").write_text(json.dumps(self.manifest(), indent=2, default=str))
        return d


def make_table(title, spec, methods, seeds=SEEDS, noise=NOISE, jobs=1) -> Table:
    seeds = list(seeds)
    t = Table(title, spec, noise, seeds, list(methods))
    t.runs = run_grid(spec, t.methods, seeds, noise, jobs)
    return t


def table1(seeds=SEEDS, jobs=1, spec=HEAT, noise=NOISE) -> Table:
    return make_table("steplength comparison", spec, table1_methods(), seeds, noise, jobs)


def table2(seeds=SEEDS, jobs=1, spec=HEAT, noise=NOISE) -> Table:
    return make_table("scaling comparison (heat)", spec, table2_methods(), seeds, noise, jobs)


def table3(seeds=SEEDS, jobs=1, spec=BLUR, noise=NOISE) -> Table:
    return make_table("scaling comparison (blur)", spec, table3_methods(), seeds, noise, jobs)


# -- filter curves -------------------------------------------------------------

def filter_figures(directory, spec=HEAT, methods=None, iterations=(10, 30), noise=NOISE,
                   seed=0) -> dict:
    """Write filter curves (one CSV per method and snapshot) plus a manifest.

    Snapshots past the end of a run are skipped and listed as warnings.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    methods = list(methods) if methods is not None else scaling_methods(HEAT_BUDGET)
    p = make_problem(spec, noise, seed)
    s = svd(p.A)
    manifest = {"problem": spec, "noise": noise, "seed": seed, "iterations": list(iterations),
                "curves": [], "warnings": []}
    tf = true_filters(s, p.b, p.x_true)
    tf.to_csv(d / "true_filters.csv")
    manifest["curves"].append({"file": "true_filters.csv", "kind": "true", "method": None})
    for cfg in methods:
        h = run(p, cfg)
        wanted = []
        for j in iterations:
            if 1 <= j <= len(h):
                wanted.append(j)
            else:
                manifest["warnings"].append(
                    f"{cfg.name}: iteration {j} beyond run length {len(h)}; curve omitted")
        if not wanted and not h.records:
            continue
        rep = filter_convergence_report(h, s, iterations=wanted, include_best=bool(iterations))
        for key, fs in rep.items():
            if key == "true":
                continue
            fname = f"{cfg.name}_{key}.csv"
            fs.to_csv(d / fname)
            manifest["curves"].append({"file": fname, "kind": "best" if key == "best" else "snapshot",
                                       "method": cfg.name, "iteration": fs.iteration,
                                       "config": cfg.to_dict()})
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
    return manifest


def total_variation(phi) -> float:
    phi = np.asarray(phi, dtype=float)
    phi = phi[np.isfinite(phi)]
    return float(np.sum(np.abs(np.diff(phi))))


# -- images ----------------------------------------------------------------------

def vector_to_image(v, N: int | None = None) -> np.ndarray:
    """Undo the column-major flattening used by the blur problem."""
    v = np.asarray(v, dtype=float)
    N = int(round(np.sqrt(v.size))) if N is None else N
    if N * N != v.size:
        raise ValueError(f"vector of length {v.size} is not a square image")
    return v.reshape((N, N), order="F")


def write_pgm(path, img, lo: float = 0.0, hi: float = 1.0) -> Path:
    """Binary 8-bit graymap; values are mapped linearly from ``[lo, hi]`` and clipped."""
    img = np.asarray(img, dtype=float)
    if not hi > lo:
        raise ValueError("need hi > lo")
    g = np.clip(np.round(255 * (img - lo) / (hi - lo)), 0, 255).astype(np.uint8)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{g.shape[1]} {g.shape[0]}\n255\n".encode("ascii"))
        fh.write(g.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    # header is four whitespace-separated tokens followed by a single whitespace byte;
    # pixel bytes may themselves look like whitespace, so do not split the payload
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError("not a binary graymap")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data[m.end(): m.end() + w * h], dtype=np.uint8).reshape(h, w)


def images(directory, spec=BLUR, methods=None, noise=NOISE, seed=0) -> dict:
    """True, measured and best restored images, plus ``errors.json`` with pixel ranges."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    methods = list(methods) if methods is not None else table3_methods()
    p = make_problem(spec, noise, seed)
    if int(round(np.sqrt(p.n))) ** 2 != p.n:
        raise ValueError(f"problem size {p.n} is not a square image")
    lo, hi = float(p.x_true.min()), float(p.x_true.max())
    side = {"problem": spec, "noise": noise, "seed": seed, "display_range": [lo, hi], "images": {}}

    def emit(name, v, err=None, it=None):
        write_pgm(d / f"{name}.pgm", vector_to_image(v), lo, hi)
        side["images"][name] = {"file": f"{name}.pgm", "rel_error": err, "best_iteration": it,
                                "pixel_min": float(np.min(v)), "pixel_max": float(np.max(v)),
                                "negative_pixels": int(np.sum(v < 0))}

    emit("true", p.x_true, 0.0)
    emit("measured", p.b)
    for cfg in methods:
        h = run(p, cfg)
        i, e, x = best_iterate(h)
        emit(cfg.name, x, e, i + 1)
    (d / "errors.json").write_text(json.dumps(side, indent=2))
    return side


def method_by_name(name: str, max_iterations: int = HEAT_BUDGET) -> MethodConfig:
    """Look up one of the named table rows (``SD``, ``ABB_min1``, ``ISRA_P``, ...)."""
    pool = table1_methods(max_iterations) + scaling_methods(max_iterations)
    for cfg in pool:
        if cfg.name.lower() == name.lower():
            return cfg
    raise ValueError(f"unknown method {name!r}; known: {sorted({c.name for c in pool})}")
