import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_series, tiny_setup
from epiwave.baselines import (BaselineConfig, LstmForecaster, Seq2SeqForecaster, ha_all, ha_forecasts, ha_window,
                               make_baseline)
from epiwave.core.gradcheck import finite_diff_check
from epiwave.experiment import ExperimentConfig
from epiwave.experiment import runner
from epiwave.model import ModelConfig, forecast, loss_and_grads, prepare, train
from epiwave.model.train import loss_value
from epiwave.wmn import SnapshotSeries, fit_stats


# --- historical averages ----------------------------------------------------------------

def test_ha_all_examples():
    assert np.all(ha_all(np.full((9, 3), 4.0), 8, 7) == 4.0)
    out = ha_all(np.array([[0.0], [10.0]]), 1, 3)
    assert out.shape == (3, 1) and np.all(out == 5.0)
    cases = np.random.default_rng(0).integers(0, 9, (30, 2)).astype(float)
    assert np.array_equal(ha_all(cases, 20, 1)[0], ha_all(cases, 20, 14)[5])


def test_ha_window_examples():
    cases = np.concatenate([np.random.default_rng(0).uniform(0, 100, (15, 2)), np.full((21, 2), 3.0)])
    assert np.all(ha_window(cases, 35, 21, 7) == 3.0)
    ramp = np.arange(1.0, 22.0)[:, None]
    assert np.all(ha_window(ramp, 20, 21, 7) == 11.0)
    cases = np.random.default_rng(1).integers(0, 9, (30, 3)).astype(float)
    assert np.array_equal(ha_window(cases, 20, 21, 4), ha_all(cases, 20, 4))
    with pytest.raises(ValueError, match="history"):
        ha_window(cases, 19, 21, 7)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (25, 4), elements=st.floats(0, 1e4)), st.permutations(range(4)))
def test_ha_equivariant_and_district_independent(cases, perm):
    perm = list(perm)
    anchors = [10, 24]
    for kind in ("ha_all", "ha_window"):
        base = ha_forecasts(kind, cases, anchors, 7, 3)
        assert np.array_equal(ha_forecasts(kind, cases[:, perm], anchors, 7, 3), base[:, :, perm])
        poked = cases.copy()
        poked[:, 0] += 5.0
        assert np.array_equal(ha_forecasts(kind, poked, anchors, 7, 3)[:, :, 1:], base[:, :, 1:])


def test_baseline_config_validation():
    with pytest.raises(ValueError):
        BaselineConfig("ha_window", features="IW")
    with pytest.raises(ValueError):
        BaselineConfig("arima")
    with pytest.raises(ValueError):
        BaselineConfig("lstm", features="W")
    with pytest.raises(ValueError):
        make_baseline(BaselineConfig("ha_all"), ModelConfig(), 3, 2)
    assert make_baseline(BaselineConfig("seq2seq", "IW"), ModelConfig(k=2), 3, 2).name == "seq2seq_IW"


# --- neural baselines ------------------------------------------------------------------------

def test_lstm_fits_a_constant_series():
    rng = np.random.default_rng(0)
    days, n = 300, 3
    s = SnapshotSeries(rng.integers(0, 5, (days, n, n)).astype(float), rng.integers(0, 5, (days, n, 2)).astype(float),
                       np.full((days, n), 4.0), ["a", "b", "c"], ["x", "y"], "2020-04-01")
    cfg = ModelConfig(k=2, d1=21, d2=7, seed=0)
    data = prepare(s, fit_stats(s, range(days)), [0, 1])
    model = LstmForecaster(cfg, n, 2, "I")
    res = train(model, data, list(range(20, days - 7)))
    assert res.log[-1]["train_loss"] < 1e-3


def test_seq2seq_without_encoder_state_ignores_its_input():
    _, data, cfg, batch = tiny_setup(hidden=5)
    model = Seq2SeqForecaster(cfg, 4, 3, "IW")
    p = model.init_params(np.random.default_rng(0))
    for name in p:
        if name.startswith("enc."):
            p[name] = np.zeros_like(p[name])
    out = forecast(model, p, batch)  # (B, D2, n)
    assert np.all(out == out[0, :, 0][None, :, None])


def test_seq2seq_decoder_starts_from_encoder_state():
    _, _, cfg, batch = tiny_setup(hidden=5)
    model = Seq2SeqForecaster(cfg, 4, 3, "I")
    p = model.init_params(np.random.default_rng(0))
    out = forecast(model, p, batch)
    assert len(np.unique(out[:, 0, :])) > 1


@pytest.mark.parametrize("cls,features", [(LstmForecaster, "I"), (LstmForecaster, "IW"),
                                          (Seq2SeqForecaster, "I"), (Seq2SeqForecaster, "IW")])
def test_baseline_gradients(cls, features):
    _, _, cfg, batch = tiny_setup(seed=3, hidden=5)
    model = cls(cfg, 4, 3, features)
    p = model.init_params(np.random.default_rng(1))
    _, grads = loss_and_grads(model, p, batch)
    report = finite_diff_check(lambda q: loss_value(model, q, batch), p, grads)
    assert all(r.passed for r in report), [(r.name, r.max_rel_error) for r in report if not r.passed]


def test_iw_features_see_search():
    _, data, cfg, batch = tiny_setup(hidden=5)
    for cls in (LstmForecaster, Seq2SeqForecaster):
        i_only = cls(cfg, 4, 3, "I")
        with_search = cls(cfg, 4, 3, "IW")
        p = with_search.init_params(np.random.default_rng(0))
        muted = batch.__class__(batch.anchors, batch.adjacency, np.zeros_like(batch.search), batch.cases,
                                batch.elapsed, batch.target)
        assert not np.array_equal(forecast(with_search, p, batch), forecast(with_search, p, muted))
        q = i_only.init_params(np.random.default_rng(0))
        assert np.array_equal(forecast(i_only, q, batch), forecast(i_only, q, muted))


# --- fair comparison ------------------------------------------------------------------------------

def test_every_model_sees_the_same_windows_and_stats(tmp_path, monkeypatch):
    series = random_series(days=80, n_w=4)
    exp = ExperimentConfig(data=tmp_path, out=tmp_path / "out", scenarios=[(7, 3)], seeds=[0],
                           model={"epochs": 1, "k": 3, "hidden": 4, "spatial_dim": 3}, save_models=False)
    seen = {}
    real_train = runner.train

    def spy(model, data, train_anchors, val_anchors):
        seen[model.name] = (data, list(train_anchors), list(val_anchors))
        return real_train(model, data, train_anchors, val_anchors)

    monkeypatch.setattr(runner, "train", spy)
    ctx = runner.Context(series, exp)
    outcomes = [runner.execute(ctx, runner.RunSpec(m, 7, 3, 0)) for m in
                ("sabgnn", "sabgnn_wsa", "lstm_I", "lstm_IW", "seq2seq_I", "seq2seq_IW", "ha_all", "ha_window")]
    assert all(o.error is None for o in outcomes), [o.error for o in outcomes]
    first = seen["sabgnn"]
    for name, (data, tr, va) in seen.items():
        assert data is first[0] and tr == first[1] and va == first[2], name
    assert all(np.array_equal(o.anchors, outcomes[0].anchors) for o in outcomes)
