import json

import numpy as np
import pytest

from epiwave.core import AdamState, NonFiniteGradient, adam_step, finite_diff_check, load_params, save_params
from epiwave.core.checkpoint import dump_params, load_params_dict
from epiwave.core.gradcheck import NondeterministicLoss


def test_adam_defaults():
    s = AdamState()
    assert (s.lr, s.beta1, s.beta2, s.eps) == (1e-4, 0.9, 0.999, 1e-8)


def test_adam_zero_gradient_leaves_params_and_decays_moments():
    p = {"w": np.array([1.0, -2.0])}
    s = AdamState()
    adam_step(p, {"w": np.zeros(2)}, s)
    assert np.array_equal(p["w"], [1.0, -2.0])

    s = AdamState()
    adam_step(p, {"w": np.array([1.0, 1.0])}, s)
    m0, v0 = s.m["w"].copy(), s.v["w"].copy()
    adam_step(p, {"w": np.zeros(2)}, s)
    assert np.allclose(s.m["w"], 0.9 * m0) and np.allclose(s.v["w"], 0.999 * v0)
    for _ in range(300):
        adam_step(p, {"w": np.zeros(2)}, s)
    assert np.all(np.abs(s.m["w"]) < 1e-12)
    assert s.step == 302


def test_adam_constant_gradient_step_tends_to_lr():
    p = {"w": np.zeros(3)}
    s = AdamState(lr=1e-3)
    g = {"w": np.array([0.5, -2.0, 1e-3])}
    for _ in range(10_000):
        prev = p["w"].copy()
        adam_step(p, g, s)
    step = np.abs(p["w"] - prev)
    assert np.allclose(step, 1e-3, rtol=0.05)


def test_adam_quadratic_converges():
    p = {"w": np.array(0.0)}
    s = AdamState(lr=1e-3)
    for _ in range(50_000):
        adam_step(p, {"w": 2.0 * (p["w"] - 3.0)}, s)
        if abs(p["w"] - 3.0) < 1e-3 and _ > 10:
            break
    assert abs(p["w"] - 3.0) < 1e-3


def test_adam_nan_gradient_names_parameter_and_updates_nothing():
    p = {"a": np.ones(2), "b": np.ones(2)}
    with pytest.raises(NonFiniteGradient, match="'b'"):
        adam_step(p, {"a": np.ones(2), "b": np.array([1.0, np.nan])}, AdamState())
    assert np.array_equal(p["a"], np.ones(2))


def test_adam_frozen_and_shape_mismatch():
    p = {"a": np.ones(2), "b": np.ones(2)}
    adam_step(p, {"a": np.ones(2), "b": np.ones(2)}, AdamState(lr=0.1), frozen=("b",))
    assert np.array_equal(p["b"], np.ones(2)) and not np.array_equal(p["a"], np.ones(2))
    with pytest.raises(ValueError):
        adam_step(p, {"a": np.ones(3)}, AdamState())


def test_gradcheck_sum_of_params():
    params = {"a": np.random.default_rng(0).normal(size=(2, 3)), "b": np.ones(4)}
    report = finite_diff_check(lambda p: float(p["a"].sum() + p["b"].sum()), params,
                               {"a": np.ones((2, 3)), "b": np.ones(4)})
    assert all(r.passed and r.max_rel_error < 1e-8 for r in report)


def test_gradcheck_flags_exactly_the_corrupted_tensor():
    params = {"a": np.array([0.3, -0.2]), "b": np.array([[1.5]])}

    def loss(p):
        return float((p["a"] ** 2).sum() + np.sin(p["b"]).sum())

    grads = {"a": 2 * params["a"], "b": np.cos(params["b"])}
    grads["b"] = grads["b"] * 1.01
    report = {r.name: r.passed for r in finite_diff_check(loss, params, grads)}
    assert report == {"a": True, "b": False}


def test_gradcheck_restores_params():
    params = {"a": np.array([0.25, 0.5])}
    finite_diff_check(lambda p: float((p["a"] ** 3).sum()), params, {"a": 3 * params["a"] ** 2})
    assert np.array_equal(params["a"], [0.25, 0.5])


def test_gradcheck_rejects_nondeterministic_loss():
    rng = np.random.default_rng(0)
    with pytest.raises(NondeterministicLoss):
        finite_diff_check(lambda p: float(p["a"].sum() + rng.random()), {"a": np.ones(2)}, {"a": np.ones(2)})


def test_checkpoint_round_trip(tmp_path):
    params = {"w": np.random.default_rng(1).normal(size=(3, 2)), "b": np.array([0.1]), "s": np.array(2.5)}
    save_params(params, tmp_path / "p.json")
    back = load_params(tmp_path / "p.json")
    assert list(back) == list(params)
    for k in params:
        assert back[k].shape == params[k].shape and np.array_equal(back[k], params[k])


def test_checkpoint_rejects_bad_documents():
    doc = dump_params({"w": np.ones((2, 2))})
    with pytest.raises(ValueError, match="version"):
        load_params_dict({**doc, "version": 99})
    with pytest.raises(ValueError, match="format"):
        load_params_dict({**doc, "format": "other"})
    bad = json.loads(json.dumps(doc))
    bad["tensors"]["w"]["shape"] = [3, 2]
    with pytest.raises(ValueError, match="shape"):
        load_params_dict(bad)
