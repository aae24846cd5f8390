import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from mlayout.errors import BadPrior
from mlayout.priors import Beta, Normal, ScaledBeta, Uniform, constrain, inverse_transform, transform, unconstrain

bounds = st.tuples(st.floats(-50, 50), st.floats(0.01, 60)).map(lambda t: (t[0], t[0] + t[1]))


@given(bounds, st.lists(st.floats(0.001, 0.999), min_size=1, max_size=100))
def test_uniform_equals_unit_scaledbeta(b, zs):
    lo, hi = b
    x = lo + (hi - lo) * np.asarray(zs)
    np.testing.assert_allclose(Uniform(lo, hi).logpdf(x), ScaledBeta(1, 1, lo, hi).logpdf(x), rtol=0, atol=1e-12)


@given(st.floats(0.2, 20), st.floats(0.2, 20), bounds, st.floats(0.01, 0.99))
def test_scaledbeta_matches_scipy(a, b, bd, z):
    lo, hi = bd
    x = lo + (hi - lo) * z
    expected = stats.beta(a, b, loc=lo, scale=hi - lo).logpdf(x)
    assert ScaledBeta(a, b, lo, hi).logpdf(x) == pytest.approx(expected, rel=1e-9, abs=1e-9)


def test_normal_logpdf():
    assert Normal(0, 1).logpdf(0.3) == pytest.approx(stats.norm.logpdf(0.3))


def test_transform_examples():
    x, logj = transform(Uniform(0, 5.3), 0.0)
    assert x == pytest.approx(2.65)
    assert logj == pytest.approx(math.log(5.3) + 2 * math.log(0.5))
    assert transform(Normal(0, 1), 1.7) == (1.7, 0.0)
    xs = [transform(Uniform(0, 1), u)[0] for u in np.linspace(0, 30, 50)]
    assert all(np.diff(xs) >= 0) and xs[-1] <= 1.0 and xs[-1] > 0.999999


@given(bounds, st.floats(-15, 15))
def test_transform_round_trip(b, u):
    prior = Uniform(*b)
    x, _ = transform(prior, u)
    assert inverse_transform(prior, x) == pytest.approx(u, abs=1e-6)


@given(st.floats(0.3, 10), st.floats(0.3, 10), st.floats(-8, 8))
def test_unconstrained_density_is_logpdf_plus_jacobian(a, b, u):
    prior = ScaledBeta(a, b, -1.0, 3.0)
    x, logj = transform(prior, u)
    lp, _ = prior.log_density_unconstrained(u)
    assert lp == pytest.approx(prior.logpdf(x) + logj, rel=1e-9, abs=1e-9)


@given(st.floats(0.3, 10), st.floats(0.3, 10), st.floats(-8, 8))
def test_unconstrained_gradient(a, b, u):
    prior = ScaledBeta(a, b, 0.0, 2.0)
    h = 1e-6
    _, g = prior.log_density_unconstrained(u)
    fd = (prior.log_density_unconstrained(u + h)[0] - prior.log_density_unconstrained(u - h)[0]) / (2 * h)
    assert g == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_vector_constrain_round_trip(rng):
    priors = [Uniform(0, 48.4), Normal(0, 1), Beta(2, 3)]
    u = rng.normal(size=(20, 3))
    np.testing.assert_allclose(unconstrain(priors, constrain(priors, u)), u, atol=1e-9)


def test_samples_inside_support_and_mean(rng):
    prior = ScaledBeta(2, 5, 1, 3)
    s = prior.sample(rng, 20000)
    assert s.min() >= 1 and s.max() <= 3
    assert s.mean() == pytest.approx(prior.mean(), abs=0.01)


@pytest.mark.parametrize("args", [(0, 1, 0, 1), (1, -1, 0, 1), (1, 1, 2, 1), (1, 1, 0, math.inf)])
def test_bad_prior(args):
    with pytest.raises(BadPrior):
        ScaledBeta(*args)


def test_bad_normal():
    with pytest.raises(BadPrior):
        Normal(0, 0)
