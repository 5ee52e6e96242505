"""Randomized invariants, driven by hypothesis."""

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from gradfilters.filters import filters_direct, filters_nonscaled
from gradfilters.problems import add_noise, from_arrays, generate_blur, generate_heat
from gradfilters.scalings import ScalingDescriptor, apply, build_hmz, build_isra
from gradfilters.solver import MethodConfig, run
from gradfilters.spectral import assemble_from_filters, extract_filters, svd, tikhonov_filters
from gradfilters.steplengths import (StepState, alpha_bb1, alpha_bb1s, alpha_bb2, alpha_bb2s,
                                     alpha_mg, alpha_sd, armijo, bb1, bb2, threshold_alpha)

SETTINGS = settings(max_examples=60, deadline=None)
seeds = st.integers(0, 2**32 - 1)
floats = st.floats(-1e3, 1e3, allow_nan=False)


def rng_matrix(seed, m, n, shift=0.0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, n)) + shift * np.eye(m, n), rng


@SETTINGS
@given(seeds, st.integers(1, 8))
def test_filter_round_trip(seed, n):
    A, rng = rng_matrix(seed, n, n, shift=1.0)
    s = svd(A)
    b, x = rng.standard_normal(n), rng.standard_normal(n)
    assume(np.min(np.abs(s.U.T @ b)) > 1e-6 * np.linalg.norm(b))
    back = assemble_from_filters(s, b, extract_filters(s, b, x))
    np.testing.assert_allclose(back, x, rtol=1e-10, atol=1e-10 * np.linalg.norm(x))


@SETTINGS
@given(st.lists(st.floats(1e-4, 1e2), min_size=2, max_size=10, unique=True),
       st.floats(1e-6, 1e2), st.floats(1.01, 10.0))
def test_tikhonov_monotone(sig, lam, factor):
    sig = np.sort(np.array(sig))[::-1]
    phi = tikhonov_filters(sig, lam).phi
    assert np.all((phi > 0) & (phi < 1))
    assert np.all(np.diff(phi) < 0)  # smaller sigma, smaller filter
    assert np.all(tikhonov_filters(sig, lam * factor).phi < phi)


@SETTINGS
@given(seeds, st.integers(1, 6))
def test_sd_mg_and_bb_orderings(seed, n):
    A, rng = rng_matrix(seed, n + 2, n)
    g, s = rng.standard_normal(n), rng.standard_normal(n)
    y = A.T @ (A @ s)
    assume(s @ y > 1e-8 * (s @ s))
    state = StepState(A, np.zeros(n), g, s_prev=s, y_prev=y, k=1)
    assert alpha_mg(state) <= alpha_sd(state) * (1 + 1e-12)
    assert alpha_bb2(state) <= alpha_bb1(state) * (1 + 1e-12)


@SETTINGS
@given(seeds, st.integers(1, 6), st.floats(1e-2, 1e2))
def test_scaled_bb_change_of_variables(seed, n, c):
    A, rng = rng_matrix(seed, n + 2, n)
    s = rng.standard_normal(n)
    y = A.T @ (A @ s)
    d = rng.uniform(0.1, 10, n)
    M = ScalingDescriptor("isra", diag=d)
    st_ = StepState(A, np.zeros(n), rng.standard_normal(n), M=M, s_prev=s, y_prev=y, k=1)
    assume((s / d) @ y > 1e-8 and (s @ (d * y)) > 1e-8)
    np.testing.assert_allclose(alpha_bb1s(st_), bb1(s / d, y), rtol=1e-12)
    np.testing.assert_allclose(alpha_bb2s(st_), bb2(s, d * y), rtol=1e-12)
    # alpha M is invariant when M is rescaled by a constant
    st_c = StepState(A, np.zeros(n), st_.g, M=ScalingDescriptor("isra", diag=c * d),
                     s_prev=s, y_prev=y, k=1)
    np.testing.assert_allclose(c * alpha_bb1s(st_c), alpha_bb1s(st_), rtol=1e-10)
    np.testing.assert_allclose(c * alpha_bb2s(st_c), alpha_bb2s(st_), rtol=1e-10)


@SETTINGS
@given(arrays(float, st.integers(1, 12), elements=floats),
       arrays(float, 12, elements=floats), st.floats(0.5, 10.0), seeds)
def test_diagonal_scalings_clamped_and_positive(x, grad, p, seed):
    n = x.size
    grad = grad[:n]
    Ax = grad + 1.0  # arbitrary second vector of matching length
    v = np.random.default_rng(seed).standard_normal(n)
    for M in (build_isra(x, Ax), build_hmz(x, grad, p)):
        assert np.all((M.diag >= 1e-3) & (M.diag <= 1e8))
        assert v @ apply(M, v) > 0


@SETTINGS
@given(st.floats(allow_nan=True, allow_infinity=True))
def test_threshold_range(a):
    t = threshold_alpha(a)
    assert 1e-10 <= t <= 1e10


@SETTINGS
@given(seeds, st.floats(1e-4, 0.2), st.integers(2, 20).map(lambda h: 2 * h))
def test_noise_norm_exact(seed, level, n):
    p = add_noise(generate_heat(n), level, seed)
    ratio = np.linalg.norm(p.eta) / np.linalg.norm(p.b_exact)
    assert abs(ratio - level) <= 1e-12 * max(1.0, level)
    again = add_noise(generate_heat(n), level, seed)
    np.testing.assert_array_equal(again.b, p.b)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 24).map(lambda h: 2 * h), st.floats(0.5, 5.0))
def test_heat_is_lower_triangular_toeplitz(n, kappa):
    A = generate_heat(n, kappa).A
    assert not np.any(np.triu(A, 1))
    for d in range(n):
        diag = np.diag(A, -d)
        np.testing.assert_array_equal(diag, diag[0])


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 9).flatmap(lambda N: st.tuples(st.just(N), st.integers(1, N))),
       st.floats(0.3, 2.0))
def test_blur_symmetric_nonnegative(size, sigma):
    N, band = size
    A = generate_blur(N, band, sigma).A
    assert A.shape == (N * N, N * N)
    np.testing.assert_array_equal(A, A.T)
    assert A.min() >= 0


@SETTINGS
@given(st.floats(0.05, 1.9), arrays(float, st.integers(1, 6), elements=st.floats(0.05, 1.0)),
       st.integers(0, 60))
def test_landweber_closed_form(alpha, sigma, k):
    phi = filters_nonscaled(np.full(k + 1, alpha), sigma).phi
    np.testing.assert_allclose(phi, oracles.landweber_filters(alpha, sigma, k), rtol=1e-12, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(2, 6))
def test_nonscaled_filters_depend_only_on_sigma(seed, n):
    A, rng = rng_matrix(seed, n, n, shift=2.0)
    p = from_arrays(A, rng.standard_normal(n))
    h = run(p, MethodConfig(max_iterations=4))
    s = svd(A)
    ok = np.abs(s.U.T @ p.b) > 1e-8 * np.linalg.norm(p.b)
    direct = filters_direct(h.records[-1].x, s, p.b).phi
    closed = filters_nonscaled(h.alphas, s.sigma).phi
    np.testing.assert_allclose(direct[ok], closed[ok], rtol=1e-7, atol=1e-9)


@SETTINGS
@given(seeds, st.integers(1, 5), st.floats(1e-3, 1e6))
def test_armijo_certificate_and_gamma_monotone(seed, n, z):
    A, rng = rng_matrix(seed, n + 1, n)
    b, x = rng.standard_normal(n + 1), rng.standard_normal(n)
    g = A.T @ (A @ x - b)
    assume(g @ g > 1e-12)
    f = lambda v: oracles.f_value(A, b, v)  # noqa: E731
    t, _ = armijo(f, x, g, g, z)
    assert f(x) - f(x - t * g) >= 1e-4 * t * (g @ g) - 1e-12 * abs(f(x))
    t_hi, _ = armijo(f, x, g, g, z, gamma=0.9)
    assert t_hi <= t


@settings(max_examples=20, deadline=None)
@given(seeds, st.sampled_from(["arc", "feasible"]), st.sampled_from(["none", "isra", "hmz"]))
def test_projected_iterates_nonnegative(seed, mode, scaling):
    A, rng = rng_matrix(seed, 8, 6, shift=1.0)
    p = from_arrays(np.abs(A), rng.standard_normal(6))
    h = run(p, MethodConfig(scaling=scaling, projection=mode, max_iterations=25))
    x = np.zeros(6)
    for rec in h.records:
        assert rec.x.min() >= 0
        # the mask is the sign pattern of the unprojected point
        xbar = x - rec.alpha * apply(rec.scaling, p.A.T @ (p.A @ x - p.b))
        np.testing.assert_array_equal(rec.mask, xbar >= 0)
        x = rec.x
