"""Test problems: the ``heat`` and ``blur`` generators of Regularization Tools.

Both generators are straight ports of Hansen's MATLAB routines. The blur image
is stacked column by column (Fortran order) exactly as ``reshape`` does in
MATLAB, so vectors compare entry for entry with the original.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz


@dataclass(frozen=True)
class Problem:
    """A linear inverse problem ``b = A x_true + eta``."""

    A: np.ndarray
    x_true: np.ndarray
    b_exact: np.ndarray
    b: np.ndarray
    eta: np.ndarray
    noise_level: float = 0.0
    rng_seed: int | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    @property
    def n(self) -> int:
        return self.A.shape[1]


def from_arrays(A, x_true, b=None, name="custom") -> Problem:
    """Wrap user arrays in a noiseless :class:`Problem` (``b`` defaults to ``A @ x_true``)."""
    A = np.asarray(A, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise ValueError(f"A must be m x n with m >= n, got shape {A.shape}")
    b_exact = A @ x_true
    b = b_exact.copy() if b is None else np.asarray(b, dtype=float)
    return Problem(A, x_true, b_exact, b, b - b_exact, name=name)


def generate_heat(n: int, kappa: float = 1.0) -> Problem:
    """Inverse heat equation: a Volterra integral equation of the first kind on [0, 1].

    The kernel is discretized with the midpoint rule, giving a lower-triangular
    Toeplitz ``A``. The exact solution is a smooth bump supported on the first
    half of the interval.
    """
    if int(n) != n or n < 4 or n % 2:
        raise ValueError(f"heat needs an even order n >= 4, got {n}")
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    n = int(n)
    h = 1.0 / n
    t = h / 2 + h * np.arange(n)
    c = h / (2 * kappa * math.sqrt(math.pi))
    d = 1.0 / (4 * kappa**2)
    k = c * t**-1.5 * np.exp(-d / t)
    r = np.zeros(n)
    r[0] = k[0]
    A = toeplitz(k, r)

    x = np.zeros(n)
    for i in range(1, n // 2 + 1):
        ti = i * 20.0 / n
        if ti < 2:
            x[i - 1] = 0.75 * ti**2 / 4
        elif ti < 3:
            x[i - 1] = 0.75 + (ti - 2) * (3 - ti)
        else:
            x[i - 1] = 0.75 * math.exp(-(ti - 3) * 2)
    b = A @ x
    return Problem(A, x, b, b.copy(), np.zeros(n), name="heat",
                   params={"n": n, "kappa": float(kappa)})


def _mround(v: float) -> int:
    # MATLAB round(): halves away from zero
    return int(math.floor(v + 0.5))


def _blur_image(N: int) -> np.ndarray:
    # MATLAB grows the array on out-of-range assignment; pad and crop instead
    X = np.zeros((2 * N + 8, 2 * N + 8))
    N2, N3, N6, N12 = _mround(N / 2), _mround(N / 3), _mround(N / 6), _mround(N / 12)

    ii, jj = np.meshgrid(np.arange(1, N6 + 1), np.arange(1, N3 + 1), indexing="ij")

    def quadrants(T):
        T = np.hstack([np.fliplr(T), T])
        return np.vstack([np.flipud(T), T])

    if N6 > 0 and N3 > 0:
        # large ellipse
        T = quadrants(((ii / N6) ** 2 + (jj / N3) ** 2 < 1).astype(float))
        X[2:2 + 2 * N6, N3 - 1:N3 - 1 + 2 * N3] = T
        # smaller ellipse, overlap of value 3 clipped back to 2
        T = quadrants(((ii / N6) ** 2 + (jj / N3) ** 2 < 0.6).astype(float))
        X[N6:N6 + 2 * N6, N3 - 1:N3 - 1 + 2 * N3] += 2 * T
        X[X == 3] = 2

    # triangle
    T = np.triu(np.ones((N3, N3)))
    X[N3 + N12:N3 + N12 + N3, 1:1 + N3] = 3 * T

    # cross
    T = np.zeros((2 * N6 + 1, 2 * N6 + 1))
    T[N6, :] = 1
    T[:, N6] = 1
    X[N2 + N12:N2 + N12 + T.shape[0], N2:N2 + T.shape[1]] = 4 * T
    return X[:N, :N]


def generate_blur(N: int, band: int = 3, sigma: float = 0.7) -> Problem:
    """Image deblurring with a truncated Gaussian point spread function.

    ``A`` is ``kron(T, T) / (2 pi sigma^2)`` with ``T`` the N x N symmetric banded
    Toeplitz matrix of Gaussian weights. The N x N test image (two ellipses,
    a triangle and a cross) is returned column-stacked in ``x_true``.
    """
    if int(N) != N or N < 2:
        raise ValueError(f"blur needs N >= 2, got {N}")
    if int(band) != band or band < 1 or band > N:
        raise ValueError(f"band must lie in [1, N={N}], got {band}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    N, band = int(N), int(band)
    z = np.zeros(N)
    z[:band] = np.exp(-np.arange(band) ** 2 / (2 * sigma**2))
    T = toeplitz(z)
    A = np.kron(T, T) / (2 * math.pi * sigma**2)
    x = _blur_image(N).reshape(-1, order="F").copy()
    b = A @ x
    return Problem(A, x, b, b.copy(), np.zeros(N * N), name="blur",
                   params={"N": N, "band": band, "sigma": float(sigma)})


def add_noise(p: Problem, noise_level: float, rng_seed: int) -> Problem:
    """Add white Gaussian noise scaled to ``||eta|| / ||b_exact|| = noise_level``.

    Draws come from ``numpy.random.Generator(PCG64(rng_seed)).standard_normal``
    (ziggurat sampler), so a seed pins the realization.
    """
    if noise_level < 0:
        raise ValueError(f"noise_level must be >= 0, got {noise_level}")
    m = p.b_exact.shape[0]
    if noise_level == 0:
        eta = np.zeros(m)
    else:
        eta0 = np.random.Generator(np.random.PCG64(rng_seed)).standard_normal(m)
        nrm = np.linalg.norm(eta0)
        if nrm == 0:
            raise ValueError("degenerate noise draw with zero norm")
        eta = eta0 * (noise_level * np.linalg.norm(p.b_exact) / nrm)
    return replace(p, eta=eta, b=p.b_exact + eta, noise_level=float(noise_level),
                   rng_seed=rng_seed)


_SPEC_RE = re.compile(r"^\s*(\w+)\s*(?::(.*))?$")


def parse_kv(text: str | None) -> dict:
    """Parse ``"a=1,b=0.5,c=x"`` into a dict with ints/floats converted."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if not item.strip():
            continue
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        out[key.strip()] = _convert(val.strip())
    return out


def _convert(val: str):
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    return val


def problem_from_spec(spec: str) -> Problem:
    """Build a noiseless problem from ``"heat:n=64"`` or ``"blur:N=16,band=3,sigma=0.7"``."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise ValueError(f"bad problem spec {spec!r}")
    kind, kw = m.group(1).lower(), parse_kv(m.group(2))
    if kind == "heat":
        return generate_heat(**{"n": 64, **kw})
    if kind == "blur":
        return generate_blur(**{"N": 16, **kw})
    raise ValueError(f"unknown problem {kind!r}; expected heat or blur")


def make_problem(spec: str, noise: float = 0.0, seed: int = 0) -> Problem:
    return add_noise(problem_from_spec(spec), noise, seed)


# -- serialization -----------------------------------------------------------

_ARRAYS = ("A", "x_true", "b_exact", "b", "eta")


def _meta(p: Problem) -> dict:
    return {"name": p.name, "params": p.params, "noise_level": p.noise_level,
            "rng_seed": p.rng_seed, "shape": list(p.A.shape)}


def save_npz(p: Problem, path) -> None:
    """Write the problem into one compressed ``.npz`` container."""
    np.savez_compressed(path, **{k: getattr(p, k) for k in _ARRAYS},
                        meta=np.array(json.dumps(_meta(p))))


def load_npz(path) -> Problem:
    with np.load(path) as data:
        meta = json.loads(str(data["meta"]))
        arrays = {k: data[k] for k in _ARRAYS}
    return Problem(**arrays, noise_level=meta["noise_level"], rng_seed=meta["rng_seed"],
                   name=meta["name"], params=meta["params"])


def save_csv(p: Problem, directory) -> Path:
    """Write ``A.csv`` (one row of A per line), one CSV per vector, and ``problem.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    np.savetxt(d / "A.csv", p.A, delimiter=",", fmt="%.17g")
    for key in ("x_true", "b_exact", "b", "eta"):
        np.savetxt(d / f"{key}.csv", getattr(p, key), delimiter=",", fmt="%.17g")
    (d / "problem.json").write_text(json.dumps(_meta(p), indent=2))
    return d


def load_csv(directory) -> Problem:
    d = Path(directory)
    meta = json.loads((d / "problem.json").read_text())
    A = np.loadtxt(d / "A.csv", delimiter=",", ndmin=2)
    vecs = {k: np.loadtxt(d / f"{k}.csv", delimiter=",", ndmin=1)
            for k in ("x_true", "b_exact", "b", "eta")}
    return Problem(A, **vecs, noise_level=meta["noise_level"], rng_seed=meta["rng_seed"],
                   name=meta["name"], params=meta["params"])
