import numpy as np
import pytest

from sentvae.autodiff import (
    OptimizerState,
    Tape,
    concat,
    finite_difference_check,
    forward_backward,
    optimizer_step,
)


def test_sum_of_squares_gradient():
    tape = Tape()
    x = tape.param("x", np.array([3.0]))
    loss = (x * x).sum()
    grads = forward_backward(tape, loss)
    np.testing.assert_allclose(grads["x"], [6.0])


def test_linear_gradient_wrt_matrix_is_input_replicated():
    tape = Tape()
    w = tape.param("w", np.arange(6.0).reshape(2, 3))
    x = tape.const(np.array([1.0, 2.0, 3.0]))
    loss = (w @ x).sum()
    grads = forward_backward(tape, loss)
    np.testing.assert_allclose(grads["w"], np.tile([1.0, 2.0, 3.0], (2, 1)))


def test_unused_parameter_gets_zero_gradient():
    tape = Tape()
    x = tape.param("x", np.array([2.0]))
    tape.param("unused", np.ones((3, 2)))
    loss = (x * x).sum()
    grads = forward_backward(tape, loss)
    np.testing.assert_array_equal(grads["unused"], np.zeros((3, 2)))


def test_non_scalar_loss_rejected():
    tape = Tape()
    x = tape.param("x", np.ones(3))
    with pytest.raises(ValueError, match="scalar"):
        forward_backward(tape, x * x)


def test_nan_in_forward_reported_with_node():
    tape = Tape()
    x = tape.param("x", np.array([-1.0]))
    with pytest.raises(FloatingPointError, match="log"):
        x.log()


def test_mixing_tapes_rejected():
    a = Tape().param("a", np.ones(2))
    b = Tape().param("b", np.ones(2))
    with pytest.raises(ValueError, match="tapes"):
        a + b


def _random_two_layer_net(seed=0):
    rng = np.random.default_rng(seed)
    tape = Tape()
    x = tape.const(rng.normal(size=4))
    w1 = tape.param("w1", rng.normal(size=(3, 4)) * 0.5)
    b1 = tape.param("b1", rng.normal(size=3) * 0.1)
    w2 = tape.param("w2", rng.normal(size=(2, 3)) * 0.5)
    b2 = tape.param("b2", rng.normal(size=2) * 0.1)
    h = ((w1 @ x) + b1).tanh()
    out = ((w2 @ h) + b2).tanh()
    return tape, (out * out).sum()


def test_two_layer_tanh_network_matches_finite_differences():
    tape, loss = _random_two_layer_net()
    assert finite_difference_check(tape, loss, step=1e-6) < 1e-5


def test_finite_difference_exact_for_linear():
    tape = Tape()
    w = tape.param("w", np.array([1.5, -2.0, 0.5]))
    loss = (w * tape.const([2.0, 3.0, -1.0])).sum()
    assert finite_difference_check(tape, loss, step=1e-4) < 1e-10


def test_finite_difference_quadratic():
    tape = Tape()
    w = tape.param("w", np.array([0.7, -1.2]))
    loss = (w * w).sum()
    assert finite_difference_check(tape, loss, step=1e-6) < 1e-6


def test_finite_difference_softmax():
    rng = np.random.default_rng(7)
    tape = Tape()
    w = tape.param("w", rng.normal(size=5))
    p = w.softmax()
    loss = (p * tape.const(rng.normal(size=5))).sum()
    assert finite_difference_check(tape, loss, step=1e-6) < 1e-5


def test_finite_difference_rejects_bad_step():
    tape = Tape()
    w = tape.param("w", np.ones(2))
    loss = (w * w).sum()
    with pytest.raises(ValueError, match="step"):
        finite_difference_check(tape, loss, step=0.0)


@pytest.mark.parametrize("op", ["matmul", "concat", "slice", "gather", "mul_broadcast"])
def test_finite_difference_structured_ops(op):
    rng = np.random.default_rng(hash(op) % 2**32)
    tape = Tape()
    w = tape.param("w", rng.normal(size=(3, 4)))
    if op == "matmul":
        out = w.matmul(tape.const(rng.normal(size=(3, 2))), ta=True)
    elif op == "concat":
        out = concat([w, w * 2.0], axis=1)
    elif op == "slice":
        out = w[1:, :2]
    elif op == "gather":
        out = w[np.array([0, 2, 0])]  # repeated rows must accumulate
    else:
        out = w * tape.const(rng.normal(size=(1, 4)))
    loss = (out * out).sum()
    assert finite_difference_check(tape, loss, step=1e-6) < 1e-6


def test_gradient_of_sum_of_losses_is_sum_of_gradients():
    rng = np.random.default_rng(3)
    vals = rng.normal(size=(2, 3))
    scale = rng.normal(size=(2, 3))

    def build(which):
        tape = Tape()
        w = tape.param("w", vals.copy())
        la = (w * w).sum()
        lb = (w.tanh() * tape.const(scale)).sum()
        loss = {"a": la, "b": lb, "both": la + lb}[which]
        return forward_backward(tape, loss)["w"]

    np.testing.assert_allclose(build("both"), build("a") + build("b"), rtol=1e-12)


def test_identical_tapes_produce_bitwise_identical_gradients():
    g1 = _random_two_layer_net(seed=11)
    g2 = _random_two_layer_net(seed=11)
    r1 = forward_backward(*g1)
    r2 = forward_backward(*g2)
    for name in r1:
        assert np.array_equal(r1[name], r2[name])


def test_sgd_step_matches_definition():
    state = OptimizerState(kind="sgd", lr=0.1)
    params = {"p": np.array([1.0])}
    optimizer_step(state, params, {"p": np.array([2.0])})
    np.testing.assert_allclose(params["p"], [0.8])
    assert state.step_count == 1


def test_zero_learning_rate_leaves_params_but_counts_steps():
    for kind in ("sgd", "adam"):
        state = OptimizerState(kind=kind, lr=0.0)
        params = {"p": np.array([1.25, -3.5])}
        before = params["p"].copy()
        optimizer_step(state, params, {"p": np.array([2.0, -1.0])})
        optimizer_step(state, params, {"p": np.array([0.5, 0.5])})
        assert np.array_equal(params["p"], before)
        assert state.step_count == 2


def test_adam_first_step_is_sign_scaled():
    state = OptimizerState(kind="adam", lr=0.01)
    params = {"p": np.array([1.0])}
    g = np.array([0.5])
    optimizer_step(state, params, {"p": g})
    expected = 1.0 - 0.01 * 0.5 / (abs(0.5) + 1e-8)
    np.testing.assert_allclose(params["p"], [expected], rtol=1e-12)


def test_optimizer_rejects_bad_gradients():
    state = OptimizerState(kind="sgd", lr=0.1)
    with pytest.raises(ValueError, match="shape"):
        optimizer_step(state, {"p": np.ones(2)}, {"p": np.ones(3)})
    with pytest.raises(ValueError, match="non-finite"):
        optimizer_step(state, {"p": np.ones(2)}, {"p": np.array([1.0, np.nan])})
    with pytest.raises(KeyError):
        optimizer_step(state, {"p": np.ones(2)}, {})


def test_param_rebinding_conflict_rejected():
    tape = Tape()
    tape.param("w", np.ones(2))
    with pytest.raises(ValueError, match="already bound"):
        tape.param("w", np.ones(2))
