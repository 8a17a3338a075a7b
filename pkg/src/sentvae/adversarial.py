"""Distinguishability evaluation of imputed completions.

A generator fills the masked final span of real sentences; the resulting
labeled dataset (real vs completed, balanced by construction, with each
sentence and its completed twin pinned to the same split) feeds two
discriminators: a bag-of-unigrams logistic regression and an LSTM reader.
The headline number is the adversarial error: test accuracy minus the 50%
chance level, in percentage points -- lower means the generator is harder
to distinguish.  An independently trained RNNLM provides a typicality
score (mean sentence NLL) as a complementary metric.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .autodiff import OptimizerState, Tape, forward_backward, optimizer_step
from .corpus import mask_for_imputation
from .layers import affine, init_affine, init_embedding, init_lstm, lstm_cell_graph
from .model import RnnlmParams, _length_mask, rnnlm_loss
from .util import substream, worker_count

__all__ = [
    "LabeledSentence",
    "AdvDatasetSplit",
    "UnigramClassifier",
    "ClassifierMetrics",
    "LstmClassifierConfig",
    "adversarial_error",
    "build_adversarial_dataset",
    "train_unigram_classifier",
    "train_lstm_classifier",
    "rnnlm_typicality_score",
    "write_metrics_report",
]


@dataclass(frozen=True)
class LabeledSentence:
    ids: tuple[int, ...]
    label: int  # 1 = real corpus sentence, 0 = imputed completion
    origin: str = "model"
    pair_id: int = -1  # index of the source sentence; twins share it


@dataclass
class AdvDatasetSplit:
    train: list[LabeledSentence] = field(default_factory=list)
    dev: list[LabeledSentence] = field(default_factory=list)
    test: list[LabeledSentence] = field(default_factory=list)


def adversarial_error(accuracy: float) -> float:
    """(accuracy - 0.5) * 100 percentage points; signed, may dip below 0."""
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {accuracy}")
    return (accuracy - 0.5) * 100.0


def build_adversarial_dataset(
    sentences: Sequence[Sequence[int]],
    imputer: Callable[[object], list[int]],
    seed: int = 0,
    origin: str = "model",
) -> AdvDatasetSplit:
    """Pair every sentence with its imputed twin and split 80/10/10.

    The twin always lands in the same split as its source, so a classifier
    can never train on a sentence whose completion it is tested on.
    Imputation runs per sentence in a small thread pool (SENTVAE_THREADS
    caps it); results keep the input order, so the split is deterministic.
    """
    instances = [mask_for_imputation(list(s)) for s in sentences]
    workers = min(worker_count(), max(1, len(instances)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            completions = list(pool.map(imputer, instances))
    else:
        completions = [imputer(inst) for inst in instances]
    pairs = []
    for pair_id, (inst, completed) in enumerate(zip(instances, completions)):
        completed = list(completed)
        if len(completed) != len(inst.ids):
            raise RuntimeError("imputer returned a sequence of the wrong length")
        if any(k and completed[i] != inst.ids[i] for i, k in enumerate(inst.known)):
            raise RuntimeError("imputer altered a known token")
        pairs.append(
            (
                LabeledSentence(tuple(inst.ids), 1, origin, pair_id),
                LabeledSentence(tuple(completed), 0, origin, pair_id),
            )
        )
    rng = substream(seed, "adv-split")
    order = rng.permutation(len(pairs))
    n = len(pairs)
    n_train = int(round(0.8 * n))
    n_dev = int(round(0.1 * n))
    split = AdvDatasetSplit()
    for rank, idx in enumerate(order):
        bucket = (
            split.train if rank < n_train else split.dev if rank < n_train + n_dev else split.test
        )
        bucket.extend(pairs[idx])
    for bucket in (split.train, split.dev, split.test):
        rng.shuffle(bucket)  # interleave labels within the split
    return split


@dataclass
class UnigramClassifier:
    """Bag-of-unigrams logistic regression over the full vocabulary."""

    weights: np.ndarray  # (V,)
    bias: float
    l2: float
    binary_features: bool = False


def unigram_features(
    items: Sequence[LabeledSentence], vocab_size: int, binary: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Token-count matrix (EOS included) and label vector."""
    x = np.zeros((len(items), vocab_size))
    y = np.empty(len(items))
    for row, item in enumerate(items):
        np.add.at(x[row], np.asarray(item.ids, dtype=np.int64), 1.0)
        y[row] = item.label
    if binary:
        x = (x > 0).astype(np.float64)
    return x, y


@dataclass
class ClassifierMetrics:
    accuracy: float
    adversarial_error_pp: float

    def __post_init__(self):
        expected = adversarial_error(self.accuracy)
        if abs(self.adversarial_error_pp - expected) > 1e-9:
            raise ValueError("adversarial error must equal (accuracy - 0.5) * 100")


def _check_two_classes(items: Sequence[LabeledSentence], name: str) -> None:
    labels = {item.label for item in items}
    if labels != {0, 1}:
        raise ValueError(f"{name} split is degenerate: labels present = {sorted(labels)}")


def _logreg_fit(x, y, l2, lr=0.5, steps=400):
    """Full-batch gradient descent on mean log loss + l2 * ||w||^2 / 2."""
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(steps):
        margin = x @ w + b
        p = 1.0 / (1.0 + np.exp(-np.clip(margin, -35, 35)))
        err = p - y
        gw = x.T @ err / n + l2 * w
        gb = float(err.mean())
        w -= lr * gw
        b -= lr * gb
    return w, b


def train_unigram_classifier(
    split: AdvDatasetSplit,
    l2_grid: Sequence[float] = (1e-4, 1e-3, 1e-2),
    seed: int = 0,
    binary_features: bool = False,
    vocab_size: int | None = None,
) -> tuple[UnigramClassifier, ClassifierMetrics]:
    """Grid over L2 strengths, early selection on dev accuracy, test metrics."""
    for name, items in (("train", split.train), ("dev", split.dev), ("test", split.test)):
        if not items:
            raise ValueError(f"{name} split is empty")
    _check_two_classes(split.train, "train")
    if vocab_size is None:
        vocab_size = 1 + max(max(item.ids) for bucket in (split.train, split.dev, split.test) for item in bucket)
    xtr, ytr = unigram_features(split.train, vocab_size, binary_features)
    xdev, ydev = unigram_features(split.dev, vocab_size, binary_features)
    xte, yte = unigram_features(split.test, vocab_size, binary_features)
    best = None
    for l2 in l2_grid:
        w, b = _logreg_fit(xtr, ytr, l2)
        dev_acc = float((((xdev @ w + b) > 0) == (ydev > 0.5)).mean())
        if best is None or dev_acc > best[0]:
            best = (dev_acc, l2, w, b)
    _, l2, w, b = best
    clf = UnigramClassifier(w, float(b), l2, binary_features)
    test_acc = float((((xte @ w + b) > 0) == (yte > 0.5)).mean())
    return clf, ClassifierMetrics(test_acc, adversarial_error(test_acc))


def unigram_predict(clf: UnigramClassifier, ids: Sequence[int]) -> int:
    x = np.zeros(clf.weights.shape[0])
    np.add.at(x, np.asarray(ids, dtype=np.int64), 1.0)
    if clf.binary_features:
        x = (x > 0).astype(np.float64)
    return int((x @ clf.weights + clf.bias) > 0)


@dataclass(frozen=True)
class LstmClassifierConfig:
    embedding_dim: int = 32
    hidden_dim: int = 64
    lr: float = 2e-3
    batch_size: int = 64
    max_epochs: int = 10
    patience: int = 3


def train_lstm_classifier(
    split: AdvDatasetSplit, cfg: LstmClassifierConfig = LstmClassifierConfig(), seed: int = 0
) -> ClassifierMetrics:
    """Recurrent reader: embedded tokens -> LSTM -> sigmoid on the state at
    each sentence's final EOS; log loss, early stopping on dev accuracy."""
    for name, items in (("train", split.train), ("dev", split.dev), ("test", split.test)):
        if not items:
            raise ValueError(f"{name} split is empty")
    _check_two_classes(split.train, "train")
    vocab_size = 1 + max(
        max(item.ids) for bucket in (split.train, split.dev, split.test) for item in bucket
    )
    rng = substream(seed, "lstm-classifier")
    dtype = np.float32
    emb = init_embedding(vocab_size, cfg.embedding_dim, rng, dtype)
    cell = init_lstm(cfg.embedding_dim, cfg.hidden_dim, rng, dtype)
    head_w, head_b = init_affine(cfg.hidden_dim, 1, rng, dtype)
    arrays = {
        "emb": emb.weight,
        "cell.w": cell.w,
        "cell.b": cell.b,
        "head.w": head_w,
        "head.b": head_b,
    }

    def read_logits(tape, items):
        ids = [item.ids for item in items]
        lengths = np.array([len(s) for s in ids], dtype=np.int64)
        width = int(lengths.max())
        mat = np.zeros((len(ids), width), dtype=np.int64)
        for row, s in enumerate(ids):
            mat[row, : len(s)] = s
        mask = _length_mask(lengths, width, np.float64)
        temb = tape.param("emb", arrays["emb"])
        tw = tape.param("cell.w", arrays["cell.w"])
        tb = tape.param("cell.b", arrays["cell.b"])
        h = tape.const(np.zeros((len(ids), cfg.hidden_dim)))
        c = tape.const(np.zeros((len(ids), cfg.hidden_dim)))
        for t in range(width):
            x = temb[mat[:, t]]
            h_new, c_new = lstm_cell_graph(tw, tb, cfg.hidden_dim, x, h, c)
            m = tape.const(mask[:, t : t + 1])
            keep = tape.const(1.0 - mask[:, t : t + 1])
            h = (h_new * m) + (h * keep)
            c = (c_new * m) + (c * keep)
        return affine(h, tape.param("head.w", arrays["head.w"]), tape.param("head.b", arrays["head.b"]))[:, 0]

    def accuracy(items):
        hits = 0
        for start in range(0, len(items), 256):
            chunk = items[start : start + 256]
            logits = read_logits(Tape(dtype=dtype), chunk)
            pred = logits.data > 0
            hits += int(sum(p == bool(item.label) for p, item in zip(pred, chunk)))
        return hits / len(items)

    opt = OptimizerState(kind="adam", lr=cfg.lr)
    best_dev = -1.0
    best_arrays = {k: v.copy() for k, v in arrays.items()}
    since_best = 0
    train_items = list(split.train)
    done = False
    for _ in range(cfg.max_epochs):
        order = rng.permutation(len(train_items))
        for start in range(0, len(train_items), cfg.batch_size):
            chunk = [train_items[i] for i in order[start : start + cfg.batch_size]]
            labels = np.array([item.label for item in chunk], dtype=np.float64)
            tape = Tape(dtype=dtype)
            logits = read_logits(tape, chunk)
            # stable binary log loss: softplus(-sign * logit)
            sign = tape.const(2.0 * labels - 1.0)
            a = logits * sign * -1.0
            m = tape.const(np.maximum(a.data, 0.0))
            loss = ((a - m).exp() + (m * -1.0).exp()).log().sum() * (1.0 / len(chunk))
            loss = loss + m.sum() * (1.0 / len(chunk))
            grads = forward_backward(tape, loss)
            optimizer_step(opt, arrays, grads)
        dev_acc = accuracy(split.dev)
        if dev_acc > best_dev:
            best_dev = dev_acc
            best_arrays = {k: v.copy() for k, v in arrays.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                done = True
        if done:
            break
    for k, v in arrays.items():
        v[...] = best_arrays[k]
    test_acc = accuracy(split.test)
    return ClassifierMetrics(test_acc, adversarial_error(test_acc))


def rnnlm_typicality_score(scorer: RnnlmParams, sentences: Sequence[Sequence[int]]) -> float:
    """Mean exact NLL the scoring model assigns to whole sentences.

    The scorer must be trained independently of whatever generated the
    sentences for the number to mean anything.
    """
    if not sentences:
        raise ValueError("no sentences to score")
    return float(np.mean([rnnlm_loss(scorer, s, keep_rate=1.0) for s in sentences]))


def write_metrics_report(path, rows) -> None:
    """CSV report: model,classifier,accuracy,adv_err_pp,mean_rnnlm_nll."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("model,classifier,accuracy,adv_err_pp,mean_rnnlm_nll\n")
        for row in rows:
            f.write(",".join(str(c) for c in row) + "\n")
