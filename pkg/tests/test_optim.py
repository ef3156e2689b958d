import numpy as np
import pytest

from roadeta.optim import AdamState, NaNGradient, ParamStore, adam_step


def make_store(values):
    store = ParamStore()
    for name, value in values.items():
        store.register(name, value)
    return store


def test_register_shares_reference():
    store = ParamStore()
    w = store.register("w", np.zeros((2, 2)))
    store.param("w")[0, 0] = 5.0
    assert w[0, 0] == 5.0


def test_zero_grads():
    store = make_store({"w": np.ones(3)})
    store.grad("w")[:] = 2.0
    store.zero_grads()
    assert np.array_equal(store.grad("w"), np.zeros(3))


def test_adam_zero_gradient_keeps_params():
    store = make_store({"w": np.array([1.0, -2.0])})
    opt = AdamState(store, lr=0.01)
    adam_step(store, opt)
    assert np.array_equal(store.param("w"), [1.0, -2.0])
    assert opt.step == 1


def test_adam_first_step_closed_form():
    # scalar param 0, grad 1, lr 1e-3: bias-corrected step is lr/(1+eps)
    store = make_store({"w": np.array([0.0])})
    store.grad("w")[:] = 1.0
    opt = AdamState(store, lr=0.001)
    adam_step(store, opt)
    expected = -0.001 / (1.0 + 1e-8)
    assert store.param("w")[0] == pytest.approx(expected, abs=1e-12)
    assert abs(store.param("w")[0] + 0.001) < 1e-9


def test_adam_lr_zero_is_identity():
    rng = np.random.default_rng(0)
    store = make_store({"w": rng.normal(size=(4, 3))})
    before = store.param("w").copy()
    opt = AdamState(store, lr=0.0)
    for _ in range(5):
        store.grad("w")[:] = rng.normal(size=(4, 3))
        adam_step(store, opt)
    assert np.array_equal(store.param("w"), before)


def test_adam_two_runs_bitwise_identical():
    def run():
        rng = np.random.default_rng(7)
        store = make_store({"w": rng.normal(size=(5, 5))})
        opt = AdamState(store, lr=0.01)
        for _ in range(20):
            store.zero_grads()
            store.grad("w")[:] = rng.normal(size=(5, 5))
            adam_step(store, opt)
        return store.param("w").copy()

    assert np.array_equal(run(), run())


def test_adam_gradients_untouched():
    store = make_store({"w": np.zeros(2)})
    store.grad("w")[:] = 3.0
    adam_step(store, AdamState(store, lr=0.1))
    assert np.array_equal(store.grad("w"), [3.0, 3.0])


def test_adam_rejects_nan_gradient():
    store = make_store({"w": np.zeros(2)})
    store.grad("w")[0] = np.nan
    with pytest.raises(NaNGradient):
        adam_step(store, AdamState(store, lr=0.1))


def test_state_dict_round_trip():
    store = make_store({"a": np.ones(2), "b": np.zeros((2, 2))})
    snapshot = store.state_dict()
    store.param("a")[:] = 9.0
    store.load_state_dict(snapshot)
    assert np.array_equal(store.param("a"), [1.0, 1.0])
