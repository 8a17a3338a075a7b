"""Parameterized layers: embeddings, LSTM cell, highway stack, losses.

Each layer exists in two forms that are pinned together by tests: a plain
numpy reference working on single vectors (the contract surface, used by
the decoders), and a tape-graph builder working on batches (used by
training).  Layers are pure functions of immutable parameter values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor, concat
from .util import as_generator

INIT_SCALE = 0.08  # uniform init half-width; forget gate bias starts at 1.0


@dataclass
class EmbeddingTable:
    """Learned dictionary of token embedding vectors, one row per token id."""

    vocab_size: int
    dim: int
    weight: np.ndarray  # (vocab_size, dim)


@dataclass
class LstmCellParams:
    """Single-layer LSTM cell parameters.

    The four gate blocks (input, forget, output, candidate) are stored
    fused: `w` is (input_dim + hidden_dim, 4*hidden_dim) and `b` is
    (4*hidden_dim,), blocks ordered i, f, o, g.
    """

    input_dim: int
    hidden_dim: int
    w: np.ndarray
    b: np.ndarray


@dataclass
class LstmState:
    """Hidden and cell vectors; |h_i| <= |tanh(c_i)| < 1 elementwise."""

    h: np.ndarray
    c: np.ndarray


@dataclass
class HighwayParams:
    """Dimension-preserving gated feedforward stack."""

    dim: int
    transform_w: list[np.ndarray]
    transform_b: list[np.ndarray]
    gate_w: list[np.ndarray]
    gate_b: list[np.ndarray]

    @property
    def layer_count(self) -> int:
        return len(self.transform_w)


def _uniform(rng, shape, dtype):
    return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape).astype(dtype)


def init_embedding(vocab_size, dim, rng, dtype=np.float32) -> EmbeddingTable:
    rng = as_generator(rng)
    return EmbeddingTable(vocab_size, dim, _uniform(rng, (vocab_size, dim), dtype))


def init_lstm(input_dim, hidden_dim, rng, dtype=np.float32, forget_bias=1.0) -> LstmCellParams:
    rng = as_generator(rng)
    w = _uniform(rng, (input_dim + hidden_dim, 4 * hidden_dim), dtype)
    b = np.zeros(4 * hidden_dim, dtype=dtype)
    b[hidden_dim : 2 * hidden_dim] = forget_bias
    return LstmCellParams(input_dim, hidden_dim, w, b)


def init_highway(dim, count, rng, dtype=np.float32) -> HighwayParams:
    rng = as_generator(rng)
    p = HighwayParams(dim, [], [], [], [])
    for _ in range(count):
        p.transform_w.append(_uniform(rng, (dim, dim), dtype))
        p.transform_b.append(np.zeros(dim, dtype=dtype))
        p.gate_w.append(_uniform(rng, (dim, dim), dtype))
        p.gate_b.append(np.zeros(dim, dtype=dtype))
    return p


def init_affine(in_dim, out_dim, rng, dtype=np.float32) -> tuple[np.ndarray, np.ndarray]:
    rng = as_generator(rng)
    return _uniform(rng, (in_dim, out_dim), dtype), np.zeros(out_dim, dtype=dtype)


# ---------------------------------------------------------------------------
# numpy reference forms (single vector)
# ---------------------------------------------------------------------------


def sigmoid_np(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_softmax_np(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def lstm_step(params: LstmCellParams, state: LstmState, x: np.ndarray) -> LstmState:
    """One gated recurrence update for a single input vector.

    i, f, o = sigmoid(affine), g = tanh(affine),
    c' = f*c + i*g, h' = o*tanh(c').
    """
    if x.shape != (params.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({params.input_dim},)")
    if state.h.shape != (params.hidden_dim,) or state.c.shape != (params.hidden_dim,):
        raise ValueError("state dimensions do not match the cell")
    pre = np.concatenate([x, state.h]) @ params.w + params.b
    hd = params.hidden_dim
    i = sigmoid_np(pre[:hd])
    f = sigmoid_np(pre[hd : 2 * hd])
    o = sigmoid_np(pre[2 * hd : 3 * hd])
    g = np.tanh(pre[3 * hd :])
    c = f * state.c + i * g
    return LstmState(o * np.tanh(c), c)


def zero_state(hidden_dim: int, dtype=np.float64) -> LstmState:
    return LstmState(np.zeros(hidden_dim, dtype=dtype), np.zeros(hidden_dim, dtype=dtype))


def highway_apply(params: HighwayParams, x: np.ndarray) -> np.ndarray:
    """Per layer: y = g * relu(affine(x)) + (1 - g) * x, g = sigmoid(affine(x))."""
    if x.shape[-1] != params.dim:
        raise ValueError(f"input dim {x.shape[-1]} does not match layer dim {params.dim}")
    y = x
    for wt, bt, wg, bg in zip(
        params.transform_w, params.transform_b, params.gate_w, params.gate_b
    ):
        t = np.maximum(y @ wt + bt, 0.0)
        g = sigmoid_np(y @ wg + bg)
        y = g * t + (1.0 - g) * y
    return y


def softmax_cross_entropy(logits: np.ndarray, target: int) -> float:
    """-log softmax(logits)[target], computed with max subtraction."""
    v = logits.shape[0]
    if not 0 <= target < v:
        raise ValueError(f"target {target} out of range for {v} classes")
    z = logits - logits.max()
    return float(np.log(np.exp(z).sum()) - z[target])


def feature_dropout(x: np.ndarray, rate: float, rng) -> np.ndarray:
    """Standard inverted dropout on feature vectors.  Off by default everywhere:
    it did not help the latent variable get used, so no module enables it."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    keep = as_generator(rng).random(x.shape) >= rate
    return x * keep / (1.0 - rate)


# ---------------------------------------------------------------------------
# tape-graph forms (batched, rows = sequences)
# ---------------------------------------------------------------------------


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return (x @ w) + b


def relu_graph(x: Tensor) -> Tensor:
    mask = x.tape.const(x.data > 0)
    return x * mask


def lstm_cell_graph(
    w: Tensor, b: Tensor, hidden_dim: int, x: Tensor, h: Tensor, c: Tensor
) -> tuple[Tensor, Tensor]:
    """Batched cell update; rows of x/h/c are independent sequences."""
    pre = affine(concat([x, h], axis=1), w, b)
    hd = hidden_dim
    i = pre[:, 0:hd].sigmoid()
    f = pre[:, hd : 2 * hd].sigmoid()
    o = pre[:, 2 * hd : 3 * hd].sigmoid()
    g = pre[:, 3 * hd :].tanh()
    c_new = (f * c) + (i * g)
    return o * c_new.tanh(), c_new


def highway_graph(
    x: Tensor,
    transform_w: list[Tensor],
    transform_b: list[Tensor],
    gate_w: list[Tensor],
    gate_b: list[Tensor],
) -> Tensor:
    y = x
    for wt, bt, wg, bg in zip(transform_w, transform_b, gate_w, gate_b):
        t = relu_graph(affine(y, wt, bt))
        g = affine(y, wg, bg).sigmoid()
        y = (g * t) + ((g * -1.0) + 1.0) * y
    return y


def cross_entropy_rows(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Per-row -log softmax(logits)[target] for a batch of logit rows.

    Stable form: the row maximum is folded in as a constant, which cancels
    exactly in logsumexp(x) - x[target] and leaves gradients untouched.
    """
    tape = logits.tape
    n = logits.data.shape[0]
    shift = tape.const(-logits.data.max(axis=1, keepdims=True))
    z = logits + shift
    logsum = z.exp().sum(axis=1).log()
    picked = z[np.arange(n), np.asarray(targets, dtype=np.int64)]
    return logsum + (picked * -1.0)


def kl_standard_normal_graph(mu: Tensor, logvar: Tensor) -> Tensor:
    """Total KL(N(mu, diag exp(logvar)) || N(0, I)) over all rows, in nats."""
    terms = (mu * mu) + logvar.exp() + (logvar * -1.0) + (-1.0)
    return terms.sum() * 0.5
