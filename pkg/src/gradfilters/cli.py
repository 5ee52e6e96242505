"""Command line entry point: ``gradfilters <subcommand> [options]``.

Options may also come from ``--config FILE``, a plain ``key = value`` file
whose keys are the long option names (``max-iter = 300``, ``seeds = 0-4``).
Command line flags win over the file, the file wins over built-in defaults.
Lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .filters import filter_convergence_report
from .problems import load_csv, load_npz, make_problem, parse_kv, save_csv, save_npz
from .solver import MethodConfig, best_iterate, run, save_history
from .spectral import svd

log = logging.getLogger("gradfilters")

DEFAULTS = {
    "problem": None, "noise": ex.NOISE, "seed": 0, "seeds": "0-9", "jobs": 1, "out": None,
    "steplength": "sd", "scaling": "none", "projection": "none", "Lmin": 1e-3, "Lmax": 1e8,
    "max_iter": None, "gtol": 0.0, "precision": "double", "iterates": False, "filters": False,
    "iterations": "10,30", "methods": None, "format": "npz", "verbose": False,
}
_BOOL = {"iterates", "filters", "verbose"}
_TYPES = {"noise": float, "seed": int, "jobs": int, "Lmin": float, "Lmax": float,
          "max_iter": int, "gtol": float}


def parse_seeds(text) -> list[int]:
    """``"0-9"``, ``"1,3,5"`` or a mix such as ``"0-2,7"``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    if not out:
        raise ValueError(f"empty seed list {text!r}")
    return out


def parse_int_list(text) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def read_config(path) -> dict:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key = key.strip().lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise ValueError(f"{path}:{lineno}: unknown option {key!r}")
        val = val.strip()
        if key in _BOOL:
            cfg[key] = val.lower() in ("1", "true", "yes", "on")
        elif key in _TYPES:
            try:
                cfg[key] = _TYPES[key](val)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad value {val!r} for {key}") from None
        else:
            cfg[key] = val
    return cfg


def parse_steplength(text: str) -> tuple[str, dict]:
    """``"abbmin1:tau=0.5,m=3"`` -> ``("abbmin1", {"tau": 0.5, "m": 3})``."""
    rule, _, params = text.partition(":")
    return rule.strip().lower(), parse_kv(params)


def load_problem(opts):
    src = opts.problem or ex.HEAT
    path = Path(src)
    if path.suffix == ".npz" and path.exists():
        return load_npz(path)
    if path.is_dir() and (path / "problem.json").exists():
        return load_csv(path)
    return make_problem(src, float(opts.noise), int(opts.seed))


def method_config(opts, default_budget: int) -> MethodConfig:
    rule, params = parse_steplength(opts.steplength)
    return MethodConfig(steplength=rule, step_params=params, scaling=opts.scaling,
                        projection=opts.projection, L_min=float(opts.Lmin), L_max=float(opts.Lmax),
                        max_iterations=int(opts.max_iter or default_budget),
                        gtol=float(opts.gtol), precision=opts.precision)


def _budget(p) -> int:
    return ex.BLUR_BUDGET if p.name == "blur" else ex.HEAT_BUDGET


def _out(opts, default: str) -> Path:
    d = Path(opts.out or default)
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- subcommands -------------------------------------------------------------------

def cmd_generate(opts) -> int:
    p = load_problem(opts)
    d = _out(opts, "problem")
    if opts.format == "csv":
        save_csv(p, d)
    else:
        save_npz(p, d / "problem.npz")
    print(f"{p.name} {p.shape} noise {p.noise_level} seed {p.rng_seed} -> {d}")
    return 0


def _write_filters(h, opts, d: Path) -> dict:
    requested = parse_int_list(opts.iterations)
    wanted = [j for j in requested if 1 <= j <= len(h)]
    rep = filter_convergence_report(h, svd(h.problem.A), iterations=wanted)
    d.mkdir(parents=True, exist_ok=True)
    for key, fs in rep.items():
        fs.to_csv(d / f"{key}.csv")
    p = h.problem
    (d / "manifest.json").write_text(json.dumps(
        {"method": h.config.to_dict(), "problem": p.name, "params": p.params,
         "noise": p.noise_level, "seed": p.rng_seed, "curves": sorted(rep),
         "skipped_iterations": sorted(set(requested) - set(wanted))}, indent=2))
    return rep


def cmd_run(opts) -> int:
    p = load_problem(opts)
    cfg = method_config(opts, _budget(p))
    h = run(p, cfg)
    d = _out(opts, f"run_{cfg.name}")
    save_history(h, d, iterates=bool(opts.iterates))
    if opts.filters and h.records:
        _write_filters(h, opts, d / "filters")
    if h.records:
        i, e, _ = best_iterate(h)
        print(f"{cfg.name}: {len(h)} iterations ({h.stop_reason}), best iteration {i + 1}, "
              f"min error {e:.4f}, final error {h.errors[-1]:.4f}")
    else:
        print(f"{cfg.name}: no iterations ({h.stop_reason})")
    return 0 if h.records else 1


def cmd_filters(opts) -> int:
    p = load_problem(opts)
    cfg = method_config(opts, _budget(p))
    h = run(p, cfg)
    if not h.records:
        print(f"{cfg.name}: no iterations ({h.stop_reason})", file=sys.stderr)
        return 1
    d = _out(opts, f"filters_{cfg.name}")
    rep = _write_filters(h, opts, d)
    print(f"{cfg.name}: wrote {len(rep)} filter curves to {d}")
    return 0


def _table(opts, fn, stem) -> int:
    kw = {"seeds": parse_seeds(opts.seeds), "jobs": int(opts.jobs), "noise": float(opts.noise)}
    if opts.problem:
        kw["spec"] = opts.problem
    t = fn(**kw)
    t.save(_out(opts, "results"), stem)
    print(t.to_text())
    bad = [r for r in t.runs if not r.ok]
    for r in bad:
        print(f"FAILED {r.method} seed {r.seed}: {r.error}", file=sys.stderr)
    return 0 if not bad else 1


def cmd_table1(opts):
    return _table(opts, ex.table1, "table1")


def cmd_table2(opts):
    return _table(opts, ex.table2, "table2")


def cmd_table3(opts):
    return _table(opts, ex.table3, "table3")


def _methods(opts, default_budget: int):
    budget = int(opts.max_iter or default_budget)
    names = opts.methods or "SD,CGLS,ISRA,HMZ,SD_P,ISRA_P,HMZ_P"
    return [ex.method_by_name(m.strip(), budget) for m in names.split(",") if m.strip()]


def cmd_figures(opts) -> int:
    spec = opts.problem or ex.HEAT
    budget = ex.BLUR_BUDGET if spec.startswith("blur") else ex.HEAT_BUDGET
    man = ex.filter_figures(_out(opts, "figures"), spec, _methods(opts, budget),
                            parse_int_list(opts.iterations), float(opts.noise), int(opts.seed))
    for w in man["warnings"]:
        print("warning:", w, file=sys.stderr)
    print(f"wrote {len(man['curves'])} curves")
    return 0


def cmd_images(opts) -> int:
    spec = opts.problem or ex.BLUR
    side = ex.images(_out(opts, "images"), spec, _methods(opts, ex.BLUR_BUDGET),
                     float(opts.noise), int(opts.seed))
    for name, info in side["images"].items():
        err = "" if info["rel_error"] is None else f"{info['rel_error']:.4f}"
        print(f"{name:<10}{err:>8}  range [{info['pixel_min']:.3f}, {info['pixel_max']:.3f}]")
    return 0


COMMANDS = {
    "generate": (cmd_generate, "generate a (noisy) test problem and save it"),
    "run": (cmd_run, "run one method and save its iteration history"),
    "filters": (cmd_filters, "run one method and save its filter factors"),
    "table1": (cmd_table1, "steplength comparison on heat"),
    "table2": (cmd_table2, "scaling comparison on heat"),
    "table3": (cmd_table3, "scaling comparison on blur"),
    "figures": (cmd_figures, "filter-curve bundles for several methods"),
    "images": (cmd_images, "best restored images as graymaps"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="key = value file with defaults for any option")
    g.add_argument("--problem", help="spec such as heat:n=64,kappa=2, or a saved .npz / CSV directory")
    g.add_argument("--noise", type=float, help="relative noise level (default 0.01)")
    g.add_argument("--seed", type=int, help="noise seed for single-run commands (default 0)")
    g.add_argument("--seeds", help="seed list for tables, e.g. 0-9 or 0,3,5 (default 0-9)")
    g.add_argument("--jobs", type=int, help="parallel worker processes (default 1)")
    g.add_argument("--out", help="output directory")
    g.add_argument("-v", "--verbose", action="store_true")
    m = common.add_argument_group("method options")
    m.add_argument("--steplength", help="rule[:k=v,...], e.g. sd, bb1, abbmin1:tau=0.5")
    m.add_argument("--scaling", help="none | cgls | isra | hmz")
    m.add_argument("--projection", help="none | feasible_direction | projection_arc_unit_lambda")
    m.add_argument("--Lmin", type=float, help="lower clamp of diagonal scalings")
    m.add_argument("--Lmax", type=float, help="upper clamp of diagonal scalings")
    m.add_argument("--max-iter", dest="max_iter", type=int, help="iteration budget")
    m.add_argument("--gtol", type=float, help="stop once ||g|| <= gtol ||A^T b||")
    m.add_argument("--precision", choices=("double", "extended"))
    m.add_argument("--iterates", action="store_true", help="also save every iterate (run)")
    m.add_argument("--filters", action="store_true", help="also save filter factors (run)")
    m.add_argument("--iterations", help="filter snapshots, e.g. 10,30")
    m.add_argument("--methods", help="named rows, e.g. SD,ISRA,HMZ_P (figures, images)")
    m.add_argument("--format", choices=("npz", "csv"), help="problem file format (generate)")

    parser = argparse.ArgumentParser(prog="gradfilters", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=helptext, description=helptext)
    return parser


def resolve(ns: argparse.Namespace) -> argparse.Namespace:
    given = vars(ns)
    from_file = read_config(given["config"]) if "config" in given else {}
    merged = {**DEFAULTS, **from_file, **given}
    return argparse.Namespace(**merged)


def main(argv=None) -> int:
    try:
        opts = resolve(build_parser().parse_args(argv))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if opts.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[opts.command][0](opts)
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
