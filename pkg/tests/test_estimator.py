import numpy as np
import pandas as pd
import pytest
from sklearn.base import clone

from mlayout import AggregateBaselineClassifier, MeasurementLayoutClassifier
from mlayout import synthetic as Syn
from mlayout.estimator import check_instance_table

from conftest import coin_table

FAST = dict(chains=2, tune=200, draws=200, seed=1)


@pytest.fixture(scope="module")
def aaio_data():
    import mlayout
    layout = mlayout.load_layout("aaio")
    t = Syn.gen_aaio_instances(200, seed=5)
    truth = {"navigationAbility": 2.5, "visualAbility": 0.9, "rightleftBias": 0.0, "noiseLevel": 0.1}
    return t.with_outcomes(Syn.simulate_from_profile(layout, truth, t, seed=6))


def test_params_round_trip():
    est = MeasurementLayoutClassifier("op", draws=50, uniform_priors=("flatNavAbility",))
    params = est.get_params()
    assert params["layout"] == "op" and params["draws"] == 50
    c = clone(est)
    assert c.get_params() == params
    c.set_params(seed=9)
    assert c.seed == 9 and est.seed == 0


def test_fit_predict_shapes(aaio_data):
    est = MeasurementLayoutClassifier("aaio", **FAST).fit(aaio_data)
    proba = est.predict_proba(aaio_data)
    assert proba.shape == (len(aaio_data), 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert set(np.unique(est.predict(aaio_data))) <= {0, 1}
    assert est.n_features_in_ == 4 and list(est.classes_) == [0, 1]
    assert est.trace_.draws.shape[:2] == (2, 200)
    assert 0 < est.nu_ < 1
    rep = est.brier_report(aaio_data)
    assert rep.brier == pytest.approx(np.mean((proba[:, 1] - aaio_data.outcomes) ** 2))


def test_model_beats_baseline_in_sample(aaio_data):
    est = MeasurementLayoutClassifier("aaio", **FAST).fit(aaio_data)
    base = AggregateBaselineClassifier().fit(aaio_data)
    assert est.brier_report(aaio_data).brier < base.brier_report(aaio_data).brier


def test_y_overrides_outcomes(coin):
    t = coin_table(3, 7)
    y = np.ones(10, int)
    base = AggregateBaselineClassifier().fit(t, y)
    assert base.rate_ == 1.0
    np.testing.assert_array_equal(base.predict(t), np.ones(10))


def test_coin_layout_object(coin):
    est = MeasurementLayoutClassifier(coin, **FAST).fit(coin_table(8, 2))
    assert est.profile_["p"].mean == pytest.approx(9 / 12, abs=0.03)


def test_check_instance_table_errors():
    with pytest.raises(TypeError):
        check_instance_table(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        check_instance_table(pd.DataFrame({"a": [1.0]}), require_outcomes=True)
    t = check_instance_table({"a": [1.0, 2.0]}, [0, 1])
    assert t.has_outcomes and len(t) == 2


def test_unfitted_raises():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        AggregateBaselineClassifier().predict_proba(coin_table(1, 1))


def test_bad_nu_mode(coin):
    with pytest.raises(ValueError):
        MeasurementLayoutClassifier(coin, nu_mode="median", **FAST).fit(coin_table(2, 2))


