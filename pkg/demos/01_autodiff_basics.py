"""A tour of the autodiff core: tapes, gradients, and the numeric verifier.

Run: python demos/01_autodiff_basics.py   (finishes in a couple of seconds)
"""

import numpy as np

from sentvae.autodiff import OptimizerState, Tape, finite_difference_check, forward_backward, optimizer_step

rng = np.random.default_rng(0)

print("-- a scalar chain ---------------------------------------------------")
tape = Tape()
x = tape.param("x", np.array([3.0]))
loss = (x * x).sum()
grads = forward_backward(tape, loss)
print(f"d(x^2)/dx at x=3: {grads['x'][0]}  (expect 6)")

print()
print("-- a two-layer tanh network, checked against finite differences -----")
tape = Tape()
w1 = tape.param("w1", rng.normal(size=(8, 5)) * 0.5)
b1 = tape.param("b1", np.zeros(8))
w2 = tape.param("w2", rng.normal(size=(3, 8)) * 0.5)
inputs = tape.const(rng.normal(size=5))
hidden = ((w1 @ inputs) + b1).tanh()
out = (w2 @ hidden).tanh()
loss = (out * out).sum()
err = finite_difference_check(tape, loss, step=1e-6)
print(f"max relative error, analytic vs central differences: {err:.2e}")

print()
print("-- optimizers come in two flavors ------------------------------------")
params = {"p": np.array([1.0])}
optimizer_step(OptimizerState(kind="sgd", lr=0.1), params, {"p": np.array([2.0])})
print(f"sgd:  1.0 with grad 2.0 at lr 0.1 -> {params['p'][0]}")
params = {"p": np.array([1.0])}
state = OptimizerState(kind="adam", lr=0.1)
optimizer_step(state, params, {"p": np.array([2.0])})
print(f"adam: first step moves by ~lr regardless of grad scale -> {params['p'][0]:.4f}")
print(f"      step counter: {state.step_count}")
