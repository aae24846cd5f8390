import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlayout import sampler as S
from mlayout.errors import LayoutMismatch, LengthMismatch, SubsetEmpty, TooFewInstances, UnknownDimension
from mlayout.evaluation import (
    aggregate_baseline,
    brier,
    characteristic_grid,
    n_test_for,
    predict,
    repeat_eval,
    rmse_profiles,
    split,
)
from mlayout.synthetic import forward_probability, gen_aaio_instances, simulate_from_profile

HIGH = {"navigationAbility": 5.3, "visualAbility": 1.9, "rightleftBias": 0.0, "noiseLevel": 0.0}


def _const_trace(layout, rows):
    x = np.asarray(rows, dtype=float)[None]
    c, d = 1, x.shape[1]
    return S.Trace(layout.parameter_names, x, np.zeros((c, d), bool), np.ones((c, d), int),
                   np.ones((c, d)), np.ones(c), layout_name=layout.name)


# predictions already at the grouping resolution, so each group shares one value
groupable = st.integers(0, 10**6).map(lambda k: round(k / 10**6, 6))


@settings(max_examples=300)
@given(st.lists(st.tuples(st.sampled_from([0.0, 0.1, 0.25, 0.5, 1.0]) | groupable, st.integers(0, 1)),
                min_size=1, max_size=60))
def test_decomposition_identity(case):
    p, y = zip(*case)
    r = brier(p, y)
    assert abs(r.brier - (r.calibration + r.refinement)) <= 1e-12
    assert min(r.brier, r.calibration, r.refinement) >= 0


def test_brier_examples():
    r = brier(np.full(100, 0.5), np.r_[np.ones(50), np.zeros(50)])
    assert (r.brier, r.calibration, r.refinement) == pytest.approx((0.25, 0.0, 0.25))
    y = np.r_[np.ones(10), np.zeros(90)]
    r = brier(y, y)
    assert (r.brier, r.calibration, r.refinement) == (0.0, 0.0, 0.0)
    r = brier(np.full(100, 0.1), y)
    assert r.brier == pytest.approx(0.09) and r.calibration == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(LengthMismatch):
        brier([0.5], [1, 0])


def test_aggregate_baseline():
    assert aggregate_baseline(np.r_[np.ones(5), np.zeros(5)]).rate == 0.5
    base = aggregate_baseline(np.ones(20))
    assert brier(base.predict(10), np.ones(10)).brier == 0.0
    assert aggregate_baseline(np.r_[np.ones(1), np.zeros(9)]).rate == pytest.approx(0.1)


def test_split_sizes_and_determinism():
    t = gen_aaio_instances(69, seed=0)
    tr, te = split(t, 0.2, seed=3)
    assert len(te) == 14 and len(tr) == 55
    assert sorted(np.r_[tr.ids, te.ids].tolist()) == list(range(69))
    tr2, te2 = split(t, 0.2, seed=3)
    np.testing.assert_array_equal(te.ids, te2.ids)
    assert not np.array_equal(split(t, 0.2, seed=4)[1].ids, te.ids)
    with pytest.raises(TooFewInstances):
        split(gen_aaio_instances(3, seed=0), 0.99)


@given(st.integers(1, 5000), st.floats(0.01, 0.99))
def test_n_test_rounding(n, frac):
    k = n_test_for(n, frac)
    assert k >= 1
    x = n * frac
    assert k == max(1, int(np.floor(x)) if x - np.floor(x) <= 0.5 else int(np.ceil(x))) or abs(x - round(x)) < 1e-9


def test_predict_single_draw_is_forward(aaio):
    t = gen_aaio_instances(50, seed=2)
    preds = predict(aaio, _const_trace(aaio, [[5.3, 1.9, 0.0, 0.0]]), t, nu=0.5)
    q, _ = forward_probability(aaio, HIGH, t, nu=0.5)
    np.testing.assert_allclose(preds.p, q, rtol=1e-14)


def test_predict_is_draw_average(coin):
    t = pd.DataFrame(index=range(3))
    from mlayout.table import InstanceTable

    preds = predict(coin, _const_trace(coin, [[0.2], [0.6]]), InstanceTable(t), nu=0.5)
    np.testing.assert_allclose(preds.p, 0.4)


def test_perfect_profile_predictions(op):
    from mlayout.synthetic import gen_op_instances, scale_counts
    from mlayout.table import InstanceTable

    f = gen_op_instances(scale_counts(200), seed=5).frame
    # low-demand variants of every instance
    easy = f.assign(goalDistance=f.goalDistance * 0.5, goalSize=4.0, timeUnderOcc=0.5,
                    numberOfPositions=f.numberOfPositions.clip(upper=4))
    best = [[48.4, 4.4, 6.0, 1.0, 1.0, 1.0, 56.0, 0.0, 0.0]]
    preds = predict(op, _const_trace(op, best), InstanceTable(easy), nu=0.0)
    assert preds.p.min() > 0.9


def test_predict_layout_mismatch(aaio, op):
    with pytest.raises(LayoutMismatch):
        predict(op, _const_trace(aaio, [[5.3, 1.9, 0.0, 0.0]]), gen_aaio_instances(5), nu=0.5)


def test_rmse():
    truth = pd.DataFrame({"a": [0.2, 0.8], "b": [1.0, 0.0]}, index=[1, 2])
    assert rmse_profiles(truth, truth) == {"a": 0.0, "b": 0.0}
    inf = truth.copy()
    inf.loc[1, "a"] = 0.7
    assert rmse_profiles(inf, truth, subset=[1])["a"] == pytest.approx(0.5)
    assert rmse_profiles(inf, truth)["a"] == pytest.approx(np.sqrt(0.25 / 2))
    with pytest.raises(SubsetEmpty):
        rmse_profiles(inf, truth, subset=[9])


def test_grid(aaio):
    t = gen_aaio_instances(300, seed=1)
    g = characteristic_grid(t.with_outcomes(np.ones(300, int)), "rewardSize", "rewardDistance", 4, 3, layout=aaio)
    assert g.count.sum() == 300
    assert np.all(g.rate[g.count > 0] == 1.0)
    np.testing.assert_allclose(g.x_edges, np.linspace(0, 1.9, 5))
    with pytest.raises(UnknownDimension):
        characteristic_grid(t.with_outcomes(np.ones(300, int)), "nope", "XPos")


def test_grid_failures_in_high_demand_corner(aaio):
    t = gen_aaio_instances(3000, seed=8)
    prof = {"navigationAbility": 3.0, "visualAbility": 1.2, "rightleftBias": 0.0, "noiseLevel": 0.05}
    data = t.with_outcomes(simulate_from_profile(aaio, prof, t, seed=8))
    g = characteristic_grid(data, "rewardSize", "rewardDistance", 3, 3, layout=aaio)
    # both features are demands: the low corner beats the high corner
    assert g.rate[0, 0] > g.rate[2, 2] + 0.3


def test_grid_csv_empty_cells(tmp_path):
    from mlayout.table import InstanceTable

    t = InstanceTable({"a": [0.0, 0.1], "b": [0.0, 0.1]}, outcomes=[1, 0])
    g = characteristic_grid(t, "a", "b", 2, 2)
    g.to_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "x_bin,y_bin,x_lo,x_hi,y_lo,y_hi,rate,count"
    assert any(line.endswith(",,0") for line in lines)


def test_repeat_eval_counts(aaio):
    t = gen_aaio_instances(80, seed=0)
    data = t.with_outcomes(simulate_from_profile(aaio, HIGH | {"noiseLevel": 0.3}, t, seed=0))
    rep = repeat_eval(aaio, data, repeats=3, config=S.SamplerConfig(tune=60, draws=60, seed=1))
    d = rep.to_dict()
    assert d["repeats"] == 3 and len(d["per_repeat"]) == 3
    assert set(d) >= {"ML BS", "Agg BS", "ML Cal", "Agg Cal", "ML Ref", "Agg Ref"}
