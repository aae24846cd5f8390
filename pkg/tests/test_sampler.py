import math

import numpy as np
import pytest

from mlayout import sampler as S
from mlayout.density import DensityFn
from mlayout.errors import AllDivergent, NonFiniteStart
from mlayout.layout import LayoutSpec, capability, observed, validate
from mlayout import expr as E
from mlayout.priors import Normal, Uniform
from mlayout.sampler.nuts import DualAveraging, adaptation_windows, regularized_variance

from conftest import coin_table

SMALL = S.SamplerConfig(chains=2, tune=400, draws=600, seed=11)


def gaussian(cov):
    prec = np.linalg.inv(cov)

    def f(theta):
        return -0.5 * theta @ prec @ theta, -prec @ theta
    return f


def test_config_validation():
    for bad in [dict(chains=0), dict(draws=0), dict(target_accept=1.0), dict(max_treedepth=0),
                dict(algorithm="hmc")]:
        with pytest.raises(ValueError):
            S.SamplerConfig(**bad)


def test_derive_seed_stable():
    assert S.derive_seed(0, "split:0") == S.derive_seed(0, "split:0")
    assert S.derive_seed(0, "split:0") != S.derive_seed(0, "split:1")
    assert 0 <= S.derive_seed(2**70, "x") < 2**63


def test_chain_streams_differ():
    a, b = S.chain_rng(1, 0).random(4), S.chain_rng(1, 1).random(4)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, S.chain_rng(1, 0).random(4))


def test_dual_averaging_converges():
    # acceptance falls with step size as exp(-eps); target 0.8 -> eps = log(1.25)
    da = DualAveraging(1.0, 0.8)
    eps = 1.0
    for _ in range(3000):
        eps = da.update(math.exp(-eps))
    assert da.final == pytest.approx(math.log(1.25), rel=0.05)


def test_regularized_variance_formula(rng):
    x = rng.normal(0, 2, size=(45, 3))
    expected = (45 / 50) * x.var(axis=0, ddof=1) + 1e-3 * 5 / 50
    np.testing.assert_allclose(regularized_variance(x), expected)


def test_adaptation_windows():
    assert adaptation_windows(1000) == (150, 500, 900)


def test_standard_normal_moments():
    cfg = S.SamplerConfig(chains=2, tune=1000, draws=1000, seed=0)
    layout = validate(LayoutSpec("n", (capability("a", Normal(0, 1)), observed("y", E.Ref("a")))))
    import pandas as pd
    from mlayout.table import InstanceTable

    d = DensityFn(layout, InstanceTable(pd.DataFrame(index=[]), outcomes=np.array([])), 0.5)
    tr = S.sample(d, cfg)
    x = tr.pooled()[:, 0]
    assert abs(x.mean()) < 0.05 + 3 * x.std() / math.sqrt(S.ess_bulk(tr.draws[:, :, 0]))
    assert x.std() == pytest.approx(1.0, abs=0.05)


def test_correlated_gaussian_covariance():
    cov = np.array([[1.0, 0.8], [0.8, 2.0]])
    tr = S.sample(gaussian(cov), S.SamplerConfig(chains=2, tune=1000, draws=3000, seed=5), dim=2)
    emp = np.cov(tr.pooled().T)
    assert np.all(np.abs(emp - cov) <= 0.1 * np.abs(cov))


def test_coin_nuts_and_rwm(coin):
    d = DensityFn(coin, coin_table(7, 3), 0.3)
    nuts = S.sample(d, SMALL)
    assert nuts.pooled().mean() == pytest.approx(8 / 12, abs=0.02)
    assert nuts.divergence_count == 0
    rwm = S.sample_rwm(d, S.SamplerConfig(chains=2, tune=1000, draws=3000, seed=3, algorithm="rwm"))
    assert rwm.pooled().mean() == pytest.approx(nuts.pooled().mean(), abs=0.03)
    assert rwm.algorithm == "rwm" and rwm.draws.shape == (2, 3000, 1)


def test_rwm_prior_recovery():
    layout = validate(LayoutSpec("u", (capability("a", Uniform(0, 5.3)), observed("y", E.Ref("a") / 5.3))))
    import pandas as pd
    from mlayout.table import InstanceTable

    d = DensityFn(layout, InstanceTable(pd.DataFrame(index=[]), outcomes=np.array([])), 0.5)
    tr = S.run(d, S.SamplerConfig(chains=2, tune=1000, draws=4000, seed=1, algorithm="rwm"))
    assert tr.pooled().mean() == pytest.approx(2.65, abs=0.1)


@pytest.mark.parametrize("algorithm", ["nuts", "rwm"])
def test_determinism(coin, algorithm):
    d = DensityFn(coin, coin_table(3, 5), 0.3)
    cfg = S.SamplerConfig(chains=2, tune=100, draws=100, seed=9, algorithm=algorithm)
    assert S.run(d, cfg).tobytes() == S.run(d, cfg).tobytes()
    other = S.SamplerConfig(chains=2, tune=100, draws=100, seed=10, algorithm=algorithm)
    assert S.run(d, cfg).tobytes() != S.run(d, other).tobytes()


def test_trace_shape_and_csv(coin, tmp_path):
    d = DensityFn(coin, coin_table(3, 5), 0.3)
    tr = S.sample(d, S.SamplerConfig(chains=4, tune=50, draws=30, seed=2))
    assert tr.draws.shape == (4, 30, 1) and tr.n_chains == 4
    tr.to_csv(tmp_path / "t.csv")
    back = S.Trace.read_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.draws, tr.draws)
    np.testing.assert_array_equal(back.divergent, tr.divergent)
    assert list(back.to_frame().columns[:2]) == ["chain", "draw"]


def test_max_treedepth_warning(caplog):
    cfg = S.SamplerConfig(chains=1, tune=20, draws=20, max_treedepth=1, seed=0)
    # a badly scaled target forces long trajectories
    tr = S.sample(gaussian(np.diag([1e-4, 1e4])), cfg, dim=2)
    assert any("max_treedepth" in w for w in tr.warnings)


def test_all_divergent():
    # finite at the start only, so every trajectory fails
    calls = {"n": 0}

    def pit(theta):
        calls["n"] += 1
        return (0.0, np.zeros_like(theta)) if calls["n"] == 1 else (math.nan, np.zeros_like(theta))

    with pytest.raises(AllDivergent):
        S.sample(pit, S.SamplerConfig(chains=1, tune=5, draws=5), dim=1)


def test_non_finite_start():
    with pytest.raises(NonFiniteStart):
        S.sample(lambda th: (math.nan, th), S.SamplerConfig(chains=1, tune=5, draws=5), dim=2)


def test_divergences_flagged():
    # a log density with a huge jump: energy errors above 1000 are divergent
    def jump(theta):
        x = theta[0]
        return (-0.5 * x * x - (5000.0 if x > 0.5 else 0.0)), np.array([-x])

    tr = S.sample(jump, S.SamplerConfig(chains=1, tune=200, draws=300, seed=4), dim=1)
    assert tr.divergence_count > 0
    assert np.all(tr.pooled()[:, 0] <= 0.5 + 1e-9)
