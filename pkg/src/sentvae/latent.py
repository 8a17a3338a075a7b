"""Latent-space analysis: prior sampling, round-trips, homotopies, stretches.

All decodes here are greedy and deterministic, so differences between
outputs reflect the latent codes alone, not decoder sampling noise.
Everything is pure over a frozen model and embarrassingly parallel per
request.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary, decode_tokens, to_surface
from .decoding import BeamConfig, greedy_decode
from .model import VaeParams, decode_session, encode_posterior, sample_latent
from .util import substream

__all__ = [
    "HomotopyRequest",
    "StretchConfig",
    "RoundTrip",
    "sample_prior_decode",
    "posterior_roundtrip",
    "homotopy",
    "stretch_transform",
    "pair_features",
    "decode_latent",
    "write_homotopy_report",
]


def decode_latent(params: VaeParams, z: np.ndarray, vocab: Vocabulary | None, max_length: int):
    ids = greedy_decode(
        decode_session(params, z), cfg=BeamConfig(width=1, max_length=max_length)
    )
    surface = to_surface(ids, params.config.direction)
    return decode_tokens(vocab, surface) if vocab is not None else surface


def sample_prior_decode(
    params: VaeParams,
    count: int,
    seed: int = 0,
    vocab: Vocabulary | None = None,
    max_length: int = 30,
) -> list:
    """Greedy decodes of `count` standard-normal prior draws.

    Returns surface-order token-id lists, or text when a vocabulary is
    given.  Deterministic per seed; distinct seeds give distinct draws.
    """
    rng = substream(seed, "prior-sample")
    out = []
    for _ in range(count):
        z = rng.standard_normal(params.config.z_dim)
        out.append(decode_latent(params, z, vocab, max_length))
    return out


@dataclass
class RoundTrip:
    """Greedy decodes from the posterior mean and from posterior samples."""

    mean_decode: list
    sample_decodes: list


def posterior_roundtrip(
    params: VaeParams,
    x,
    n_samples: int = 0,
    seed: int = 0,
    vocab: Vocabulary | None = None,
    max_length: int = 30,
) -> RoundTrip:
    """Encode x, then decode from the mean and from n posterior samples."""
    post = encode_posterior(params, x)
    rng = substream(seed, "roundtrip")
    mean_decode = decode_latent(params, post.mean, vocab, max_length)
    samples = []
    for _ in range(n_samples):
        z = sample_latent(post, rng.standard_normal(params.config.z_dim))
        samples.append(decode_latent(params, z, vocab, max_length))
    return RoundTrip(mean_decode, samples)


@dataclass(frozen=True)
class HomotopyRequest:
    """Linear path between two codes, decoded at T evenly spaced points."""

    z1: np.ndarray
    z2: np.ndarray
    steps: int = 8
    dedupe: bool = True

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("homotopy needs at least the two endpoints")
        if np.asarray(self.z1).shape != np.asarray(self.z2).shape:
            raise ValueError("endpoints must share a dimension")


def homotopy(
    params: VaeParams,
    req: HomotopyRequest,
    vocab: Vocabulary | None = None,
    max_length: int = 30,
) -> list[tuple[float, object]]:
    """(t, sentence) pairs along z(t) = z1 * (1 - t) + z2 * t.

    The blend weights are computed as exact complementary fractions
    (i and steps-1-i over steps-1), so swapping the endpoints reverses the
    decoded list bitwise.  With dedupe, consecutive duplicate sentences
    collapse to the first t that produced them.
    """
    z1 = np.asarray(req.z1, dtype=np.float64)
    z2 = np.asarray(req.z2, dtype=np.float64)
    denom = req.steps - 1
    out = []
    for i in range(req.steps):
        a = (denom - i) / denom
        b = i / denom
        sentence = decode_latent(params, z1 * a + z2 * b, vocab, max_length)
        out.append((b, sentence))
    if req.dedupe:
        deduped = [out[0]]
        for t, sentence in out[1:]:
            if sentence != deduped[-1][1]:
                deduped.append((t, sentence))
        out = deduped
    return out


@dataclass(frozen=True)
class StretchConfig:
    """Random linear map with entries uniform on [-bound, bound]."""

    bound: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError("bound must be non-negative")


def stretch_transform(z: np.ndarray, cfg: StretchConfig, z_dim: int | None = None) -> np.ndarray:
    """Apply a seeded random linear map M (entries iid U[-bound, bound]) to z.

    Reaches lower-probability regions while keeping the draw's direction
    structure; the result is used as-is, with no renormalization toward a
    prior-typical radius.
    """
    z = np.asarray(z, dtype=np.float64)
    if z_dim is None:
        z_dim = z.shape[0]
    if z.shape != (z_dim,):
        raise ValueError(f"z has shape {z.shape}, expected ({z_dim},)")
    rng = substream(cfg.seed, "stretch")
    m = rng.uniform(-cfg.bound, cfg.bound, size=(z_dim, z_dim))
    return m @ z


def pair_features(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sentence-pair features: concat(u * v, |u - v|), dimension 2d.

    Symmetric in its arguments; useful for training pair classifiers on
    top of posterior-mean sentence vectors.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"pair features need equal-length vectors, got {u.shape} and {v.shape}")
    return np.concatenate([u * v, np.abs(u - v)])


def write_homotopy_report(path, pairs) -> None:
    """Plain text, one 't<TAB>sentence' line per step."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for t, sentence in pairs:
            text = sentence if isinstance(sentence, str) else " ".join(str(i) for i in sentence)
            f.write(f"{t!r}\t{text}\n")
