import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from psskit.approx import SemialgSet, fit_points, inner_pss, outer_pss
from psskit.errors import DegenerateFiber, InputError, SamplingError
from psskit.fixtures import disk_set
from psskit.moments import Box, l1_norm
from psskit.poly import MultiPoly
from psskit.sampler import (
    PolyDensity,
    UnivariateCdf,
    acceptance_rate,
    draw_poly_density,
    invert_cdf,
    marginal_cdf,
    sample_stream,
    uniform_sample,
)


def xs(n):
    return [MultiPoly.variable(n, i) for i in range(n)]


def rng(seed=0):
    return np.random.default_rng(seed)


@pytest.fixture(scope="module")
def disk_density():
    res = outer_pss(disk_set(), 8)
    return res, PolyDensity.from_result(res)


def disk_marginal_cdf(t):
    t = np.clip(t, -1, 1)
    return 0.5 + (t * np.sqrt(1 - t * t) + np.arcsin(t)) / math.pi


# -- marginal CDF ----------------------------------------------------------------


def test_cdf_linear_density():
    x = xs(1)[0]
    F = marginal_cdf(2 * x, Box([0], [1]), 0)
    np.testing.assert_allclose(F.coeffs, [0, 0, 1], atol=1e-15)


def test_cdf_constant_density():
    F = marginal_cdf(MultiPoly.constant(1, 1.0), Box([-2], [5]), 0)
    np.testing.assert_allclose(F.coeffs[:2], [0, 1])
    assert not F.coeffs[2:].any()


def test_cdf_suffix_integral():
    x1, x2 = xs(2)
    F = marginal_cdf(x1 * x2**2, Box([0, 0], [1, 1]), 0)
    np.testing.assert_allclose(F.coeffs, [0, 0, 1 / 6], rtol=1e-15)


def test_cdf_second_axis_uses_prefix():
    x1, x2 = xs(2)
    F = marginal_cdf(x1 * x2**2, Box([0, 0], [1, 1]), 1, prefix=[0.5])
    # 0.5 * x2^3 / 3
    np.testing.assert_allclose(F.coeffs, [0, 0, 0, 0.5 / 3], rtol=1e-15)


def test_cdf_degenerate_fiber_signals():
    x1, x2 = xs(2)
    with pytest.raises(DegenerateFiber):
        marginal_cdf(x1 * x2, Box([0, 0], [1, 1]), 1, prefix=[0.0])


def test_cdf_argument_checks():
    x1, _ = xs(2)
    with pytest.raises(InputError):
        marginal_cdf(x1, Box([0, 0], [1, 1]), 2)
    with pytest.raises(InputError):
        marginal_cdf(x1, Box([0, 0], [1, 1]), 1, prefix=[])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_cdf_total_equals_mass(n, seed):
    g = rng(seed)
    a = g.uniform(-2, 1, n)
    b = a + g.uniform(0.3, 2, n)
    # nonnegative on the box: a square plus a positive constant
    q = MultiPoly(n, {tuple(g.integers(0, 3, n)): g.standard_normal() for _ in range(4)})
    p = q * q + 0.1
    F = marginal_cdf(p, Box(a, b), 0)
    mass = l1_norm(p, Box(a, b))
    assert F.total == pytest.approx(mass, rel=1e-9)


# -- inversion -------------------------------------------------------------------


def test_invert_square():
    assert invert_cdf(UnivariateCdf(np.array([0, 0, 1.0]), 0, 1), 0.25) == pytest.approx(0.5, abs=1e-15)


def test_invert_identity():
    assert invert_cdf(UnivariateCdf(np.array([0, 1.0]), 0, 1), 0.7) == pytest.approx(0.7, abs=1e-15)


def test_invert_plateau_takes_left_end():
    F = UnivariateCdf(np.array([0.3]), 0.0, 1.0)
    assert invert_cdf(F, 0.3) == 0.0


def test_invert_flat_point():
    # (t - 1/2)^3 is flat at 1/2
    F = UnivariateCdf(np.array([-0.125, 0.75, -1.5, 1.0]), 0.0, 1.0)
    assert invert_cdf(F, 0.0) == pytest.approx(0.5, abs=1e-5)


def test_invert_out_of_range():
    with pytest.raises(InputError):
        invert_cdf(UnivariateCdf(np.array([0, 1.0]), 0, 1), 1.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.floats(0, 1), st.integers(0, 2**31 - 1))
def test_invert_tolerance(k, u, seed):
    g = rng(seed)
    # increasing: antiderivative of a positive polynomial
    dens = np.abs(g.standard_normal(k)) + 0.01
    C = np.concatenate([[g.standard_normal()], dens / np.arange(1, k + 1)])
    a, b = sorted(g.uniform(0, 3, 2))
    if b - a < 1e-3:
        b = a + 1.0
    F = UnivariateCdf(C, a, b)
    Fa, Fb = F(a), F(b)
    w = Fa + u * (Fb - Fa)
    xi = invert_cdf(F, w)
    assert a <= xi <= b
    assert abs(F(xi) - w) <= 1e-12 * (Fb - Fa) + 4 * np.finfo(float).eps * max(abs(Fa), abs(Fb))


# -- drawing from the density ----------------------------------------------------


def test_density_uniform_on_box():
    B = Box([-1, 2], [3, 2.5])
    pd = PolyDensity(MultiPoly.constant(2, 1.0), B)
    X = draw_poly_density(pd, rng(1), size=10_000)
    for i in range(2):
        u = (X[:, i] - B.a[i]) / (B.b[i] - B.a[i])
        assert stats.kstest(u, "uniform").pvalue > 0.01


def test_density_linear_law():
    x = xs(1)[0]
    pd = PolyDensity(2 * x, Box([0], [1]))
    X = draw_poly_density(pd, rng(2), size=10_000)[:, 0]
    assert stats.kstest(X**2, "uniform").pvalue > 0.01


def test_density_product_marginal_chi2():
    x1, x2 = xs(2)
    pd = PolyDensity((1 + x1) * (x2**2 + 0.5), Box([0, 0], [1, 1]))
    X = draw_poly_density(pd, rng(3), size=10_000)
    edges = np.linspace(0, 1, 21)
    cdf = (edges + edges**2 / 2) / 1.5
    expected = np.diff(cdf) * len(X)
    observed, _ = np.histogram(X[:, 0], edges)
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_density_single_draw_shape():
    pd = PolyDensity(MultiPoly.constant(3, 2.0), Box([0] * 3, [1] * 3))
    x = draw_poly_density(pd, rng(4))
    assert x.shape == (3,)


def test_density_refuses_uncertified_and_bad_mass():
    X = np.array([[0.0, 0.0]])
    fit = fit_points(X, Box([-1, -1], [1, 1]), 0, grid=3)
    with pytest.raises(InputError, match="certified"):
        PolyDensity.from_result(fit)
    with pytest.raises(InputError):
        PolyDensity(MultiPoly.constant(1, 0.0), Box([0], [1]))
    with pytest.raises(InputError):
        PolyDensity(MultiPoly.constant(2, 1.0), Box([0], [1]))


def test_density_refuses_inner_result():
    res = inner_pss(SemialgSet(2, [], Box([-1, -1], [1, 1])), 2)
    with pytest.raises(InputError, match="outer"):
        PolyDensity.from_result(res)


# -- rejection sampler ------------------------------------------------------------


def test_sampler_on_box_accepts_everything():
    B = Box([0, 0], [2, 1])
    K = SemialgSet(2, [], B)
    pd = PolyDensity(MultiPoly.constant(2, 1.0), B)
    batch = uniform_sample(K, pd, 2000, seed=3)
    assert batch.proposals == batch.accepted == 2000
    assert batch.empirical_rate == 1.0
    assert acceptance_rate(K, pd, B.volume()) == 1.0
    assert stats.kstest(batch.samples[:, 0] / 2, "uniform").pvalue > 0.01


def test_sampler_reproducible_and_prefix_stable(disk_density):
    _, pd = disk_density
    K = disk_set()
    a = uniform_sample(K, pd, 300, seed=11)
    b = uniform_sample(K, pd, 300, seed=11)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert a.report() == b.report()
    head = uniform_sample(K, pd, 100, seed=11)
    np.testing.assert_array_equal(head.samples, a.samples[:100])
    tail = uniform_sample(K, pd, 200, seed=11, first_index=100)
    np.testing.assert_array_equal(tail.samples, a.samples[100:])
    other = uniform_sample(K, pd, 100, seed=12)
    assert not np.array_equal(other.samples, head.samples)


def test_sampler_law_on_disk(disk_density):
    res, pd = disk_density
    K = disk_set()
    batch = uniform_sample(K, pd, 10_000, seed=5)
    assert K.contains(batch.samples).all()
    assert res.box.contains(batch.samples).all()
    for i in range(2):
        assert stats.kstest(batch.samples[:, i], disk_marginal_cdf).pvalue > 0.01
    # overall acceptance: P(in K) * P(accept | in K) = vol K / mass
    gamma = acceptance_rate(K, pd, math.pi)
    sigma = math.sqrt(gamma * (1 - gamma) / batch.proposals)
    assert abs(batch.empirical_rate - gamma) <= 3 * sigma
    # some proposals inside K are rejected because p > 1 there
    assert batch.in_set_rejections > 0
    assert batch.in_set_rejections + batch.outside_rejections + batch.accepted == batch.proposals


def test_sampler_keeps_rejected_points(disk_density):
    _, pd = disk_density
    batch = uniform_sample(disk_set(), pd, 200, seed=2, keep_rejected=True)
    assert batch.rejected is not None
    assert len(batch.rejected) == batch.proposals - batch.accepted


def test_acceptance_rate_monotone_on_disk():
    K = disk_set()
    rates = [acceptance_rate(K, PolyDensity.from_result(outer_pss(K, d)), math.pi) for d in (2, 4, 6, 8)]
    assert all(a <= b + 1e-9 for a, b in zip(rates, rates[1:]))
    assert rates[-1] <= 1.0


def test_acceptance_rate_callable_volume(disk_density):
    _, pd = disk_density
    assert acceptance_rate(disk_set(), pd, lambda K: math.pi) == pytest.approx(math.pi / pd.mass)


def test_sampler_aborts_on_tiny_rate():
    x = xs(1)[0]
    K = SemialgSet(1, [1e-10 - x**2], Box([-1], [1]))
    pd = PolyDensity(MultiPoly.constant(1, 1.0), K.box)
    with pytest.raises(SamplingError, match="acceptance rate"):
        uniform_sample(K, pd, 50, seed=0)


def test_sampler_argument_checks(disk_density):
    _, pd = disk_density
    with pytest.raises(InputError):
        uniform_sample(disk_set(), pd, -1)
    with pytest.raises(InputError):
        uniform_sample(SemialgSet(1, [], Box([0], [1])), pd, 1)
    with pytest.raises(InputError):
        sample_stream(-1, 0)


def test_empty_batch():
    B = Box([0], [1])
    batch = uniform_sample(SemialgSet(1, [], B), PolyDensity(MultiPoly.constant(1, 1.0), B), 0)
    assert batch.samples.shape == (0, 1) and batch.proposals == 0
