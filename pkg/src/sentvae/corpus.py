"""Tokenized-corpus handling: vocabulary, encoding, dropout, masks, batches.

Corpus files are UTF-8, one pre-tokenized sentence per line with
whitespace-separated tokens (no lowercasing or re-tokenization happens
here).  Encoded sequences end with EOS and never contain PAD.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .util import as_generator

PAD, UNK, SOS, EOS = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<sos>", "<eos>")

VOCAB_MAGIC = "sentvae-vocab v1"


@dataclass(frozen=True)
class Vocabulary:
    """Dense token-id mapping with ids 0-3 reserved for PAD/UNK/SOS/EOS."""

    tokens: tuple[str, ...]  # full list including reserved, index == id

    def __post_init__(self):
        if self.tokens[:4] != RESERVED_TOKENS:
            raise ValueError("vocabulary must start with the four reserved tokens")

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def index(self) -> dict[str, int]:
        # regular tokens only; reserved surface forms encode via the UNK rule
        if not hasattr(self, "_index"):
            object.__setattr__(
                self, "_index", {tok: i for i, tok in enumerate(self.tokens) if i >= 4}
            )
        return self._index


def build_vocabulary(
    corpus: Iterable[str], max_size: int | None = None, min_frequency: int = 1
) -> Vocabulary:
    """Count tokens and rank by frequency, ties broken lexicographically.

    `max_size` counts the four reserved ids.  Tokens filtered out here
    simply encode to UNK later.
    """
    counts: dict[str, int] = {}
    for line in corpus:
        for tok in line.split():
            if tok in RESERVED_TOKENS:
                continue
            counts[tok] = counts.get(tok, 0) + 1
    if not counts:
        raise ValueError("empty corpus: no tokens to build a vocabulary from")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [tok for tok, n in ranked if n >= min_frequency]
    if max_size is not None:
        if max_size < len(RESERVED_TOKENS):
            raise ValueError(f"max_size must be at least {len(RESERVED_TOKENS)}")
        kept = kept[: max_size - len(RESERVED_TOKENS)]
    return Vocabulary(RESERVED_TOKENS + tuple(kept))


def encode_sentence(vocab: Vocabulary, line: str) -> list[int]:
    """Token ids for one line, OOV mapped to UNK, EOS appended."""
    toks = line.split()
    if not toks:
        raise ValueError("cannot encode an empty line")
    index = vocab.index
    return [index.get(tok, UNK) for tok in toks] + [EOS]


def decode_tokens(vocab: Vocabulary, ids: Sequence[int]) -> str:
    """Surface text: PAD/SOS/EOS dropped, remaining tokens joined by spaces."""
    words = []
    for i in ids:
        if not 0 <= i < vocab.size:
            raise ValueError(f"token id {i} out of range for vocabulary of size {vocab.size}")
        if i in (PAD, SOS, EOS):
            continue
        words.append(vocab.tokens[i])
    return " ".join(words)


def save_vocabulary(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(VOCAB_MAGIC + "\n")
        for tok in vocab.tokens[4:]:
            f.write(tok + "\n")


def load_vocabulary(path) -> Vocabulary:
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header != VOCAB_MAGIC:
            raise ValueError(f"not a vocabulary file (header {header!r})")
        tokens = tuple(line.rstrip("\n") for line in f)
    return Vocabulary(RESERVED_TOKENS + tokens)


def load_corpus(path, vocab: Vocabulary) -> list[list[int]]:
    """Encode every non-empty line of a corpus file."""
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(encode_sentence(vocab, line))
    return out


@dataclass(frozen=True)
class WordDropoutConfig:
    """Keep rate for decoder-side conditioning tokens plus an RNG seed."""

    keep_rate: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.keep_rate <= 1.0:
            raise ValueError(f"keep rate must lie in [0, 1], got {self.keep_rate}")


def apply_word_dropout(
    inputs: Sequence[int],
    cfg: WordDropoutConfig | float,
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Replace conditioning tokens (not SOS, not PAD) by UNK with prob 1-k.

    Operates on decoder inputs only; targets are never touched.  Pass a
    Generator to share a stream across calls, otherwise the config seed
    starts a fresh one.
    """
    if isinstance(cfg, WordDropoutConfig):
        k = cfg.keep_rate
        rng = as_generator(cfg.seed) if rng is None else rng
    else:
        k = float(cfg)
        if not 0.0 <= k <= 1.0:
            raise ValueError(f"keep rate must lie in [0, 1], got {k}")
        rng = as_generator(rng)
    if k == 1.0:
        return list(inputs)
    protected = (SOS, PAD, EOS)
    if k == 0.0:  # inputless decoding is deterministic; draw nothing
        return [tok if tok in protected else UNK for tok in inputs]
    draws = rng.random(len(inputs))
    return [
        tok if tok in protected or draws[i] < k else UNK for i, tok in enumerate(inputs)
    ]


def word_dropout_matrix(
    inputs: np.ndarray, k: float, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Batched form of apply_word_dropout over a padded (B, T) input matrix."""
    if k == 1.0:
        return inputs
    protected = (inputs == SOS) | (inputs == PAD) | (inputs == EOS)
    if k == 0.0:
        return np.where(protected, inputs, UNK)
    keep = rng.random(inputs.shape) < k
    return np.where(keep | protected, inputs, UNK)


@dataclass(frozen=True)
class ImputationInstance:
    """A full sequence plus a per-position known/unknown mask.

    Unknown positions are the final fifth of the content tokens in surface
    order (ceil, at least one); EOS is always known.
    """

    ids: tuple[int, ...]
    known: tuple[bool, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.known):
            raise ValueError("mask length must equal sequence length")


def mask_for_imputation(ids: Sequence[int]) -> ImputationInstance:
    """Mark the last max(1, ceil(0.2 * n)) content tokens unknown."""
    ids = list(ids)
    if not ids:
        raise ValueError("cannot mask an empty sequence")
    has_eos = ids[-1] == EOS
    n = len(ids) - 1 if has_eos else len(ids)
    if n < 1:
        raise ValueError("sequence has no content tokens to impute")
    unknown = max(1, math.ceil(0.2 * n))
    known = [True] * len(ids)
    for pos in range(n - unknown, n):
        known[pos] = False
    return ImputationInstance(tuple(ids), tuple(known))


@dataclass
class Batch:
    """Padded id matrix with per-sequence lengths and a direction flag.

    `direction` names the order the rows are currently in: "l2r" is
    surface order, "r2l" means content tokens are reversed with EOS kept
    final.  Padding appears only after each row's length.
    """

    ids: np.ndarray  # (B, T) int64
    lengths: np.ndarray  # (B,) int64, includes EOS
    direction: str = "l2r"

    def __post_init__(self):
        if self.direction not in ("l2r", "r2l"):
            raise ValueError(f"direction must be 'l2r' or 'r2l', got {self.direction!r}")

    @property
    def size(self) -> int:
        return self.ids.shape[0]


def reverse_content(ids: Sequence[int]) -> list[int]:
    """Reverse content tokens, keeping a trailing EOS in place."""
    ids = list(ids)
    if ids and ids[-1] == EOS:
        return ids[-2::-1] + [EOS]
    return ids[::-1]


def to_surface(ids: Sequence[int], direction: str) -> list[int]:
    """Restore model-order token ids to surface order."""
    if direction == "l2r":
        return list(ids)
    if direction == "r2l":
        return reverse_content(ids)
    raise ValueError(f"direction must be 'l2r' or 'r2l', got {direction!r}")


def make_batch(sequences: Sequence[Sequence[int]], direction: str = "l2r") -> Batch:
    """Pad sequences (given in surface order) into a batch; reverse if r2l."""
    if not sequences:
        raise ValueError("cannot build an empty batch")
    seqs = [list(s) for s in sequences]
    if direction == "r2l":
        seqs = [reverse_content(s) for s in seqs]
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    width = int(lengths.max())
    ids = np.full((len(seqs), width), PAD, dtype=np.int64)
    for row, s in enumerate(seqs):
        ids[row, : len(s)] = s
    return Batch(ids, lengths, direction)


def reverse_batch(batch: Batch) -> Batch:
    """Flip every row between surface and reversed order; involutive."""
    ids = batch.ids.copy()
    for row in range(batch.size):
        n = int(batch.lengths[row])
        ids[row, :n] = reverse_content(batch.ids[row, :n].tolist())
    return Batch(ids, batch.lengths.copy(), "r2l" if batch.direction == "l2r" else "l2r")


def iter_batches(
    sequences: Sequence[Sequence[int]],
    batch_size: int,
    direction: str = "l2r",
    rng: np.random.Generator | None = None,
):
    """Yield batches covering `sequences`; shuffled when rng is given."""
    if batch_size < 1:
        raise ValueError("batch size must be positive")
    order = np.arange(len(sequences))
    if rng is not None:
        order = rng.permutation(len(sequences))
    for start in range(0, len(sequences), batch_size):
        chunk = [sequences[i] for i in order[start : start + batch_size]]
        yield make_batch(chunk, direction)
