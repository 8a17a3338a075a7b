"""Greedy, beam, and constrained beam search over step-wise decoders.

Everything here works in model (decode) order and is direction-agnostic;
callers reverse sequences at the corpus boundary for right-to-left models.
A decoder is anything with `vocab_size`, `start()` and
`step(state, token_id) -> (logprobs, state)` -- model params are adapted
automatically, and tests drive the search with hand-built transition
tables.

Scores are cumulative log-probabilities with no length normalization
(imputation compares hypotheses of equal length).  All top-k selections
break score ties toward the lower token id, so searches are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .corpus import EOS, SOS


@dataclass(frozen=True)
class BeamConfig:
    """Beam width and decode-length cap (tokens including EOS)."""

    width: int = 15
    max_length: int = 30

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("beam width must be >= 1")
        if self.max_length < 1:
            raise ValueError("max length must be >= 1")


@dataclass
class Hypothesis:
    """Partial decode: tokens so far, cumulative log-probability, state."""

    tokens: tuple[int, ...]
    logprob: float
    state: Any
    finished: bool = False


def as_session(model, z=None):
    """Adapt model params to the stepping protocol; pass sessions through."""
    if hasattr(model, "step") and hasattr(model, "start"):
        if z is not None:
            raise ValueError("pass z when adapting params, not alongside a session")
        return model
    from .model import decode_session

    return decode_session(model, z)


def _top_tokens(logprobs: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries, ties broken toward lower token id."""
    order = np.lexsort((np.arange(logprobs.shape[0]), -logprobs))
    return order[:k]


def greedy_decode(model, z=None, cfg: BeamConfig = BeamConfig(width=1)) -> list[int]:
    """Deterministic argmax decode; stops at EOS or the length cap.

    Returns model-order token ids including the final EOS when reached.
    """
    session = as_session(model, z)
    state = session.start()
    out: list[int] = []
    prev = SOS
    for _ in range(cfg.max_length):
        logprobs, state = session.step(state, prev)
        token = int(np.argmax(logprobs))  # first max == lowest id on ties
        out.append(token)
        if token == EOS:
            break
        prev = token
    return out


def _ranked(pool: list[Hypothesis]) -> list[Hypothesis]:
    return sorted(pool, key=lambda h: (-h.logprob, h.tokens))


def beam_search(model, z=None, cfg: BeamConfig = BeamConfig()) -> list[Hypothesis]:
    """Standard beam search: expand every live hypothesis by every token,
    keep the top `width` by cumulative log-probability; hypotheses that
    emit EOS are finished and stay in the pool, still occupying a slot."""
    session = as_session(model, z)
    live = [Hypothesis((), 0.0, session.start())]
    finished: list[Hypothesis] = []
    for _ in range(cfg.max_length):
        if not live:
            break
        candidates = list(finished)
        for hyp in live:
            prev = hyp.tokens[-1] if hyp.tokens else SOS
            logprobs, state = session.step(hyp.state, prev)
            for token in _top_tokens(logprobs, min(cfg.width, session.vocab_size)):
                candidates.append(
                    Hypothesis(
                        hyp.tokens + (int(token),),
                        hyp.logprob + float(logprobs[token]),
                        state,
                        finished=int(token) == EOS,
                    )
                )
        frontier = _ranked(candidates)[: cfg.width]
        finished = [h for h in frontier if h.finished]
        live = [h for h in frontier if not h.finished]
    return _ranked(finished + live)


def validate_constraint(constraint: Sequence[int | None], vocab_size: int) -> None:
    if not constraint:
        raise ValueError("constraint must be non-empty")
    for tok in constraint:
        if tok is not None and not 0 <= tok < vocab_size:
            raise ValueError(f"known token id {tok} out of range for vocabulary {vocab_size}")


def constrained_beam_search(
    model,
    z=None,
    constraint: Sequence[int | None] = (),
    cfg: BeamConfig = BeamConfig(),
    score_known: bool = True,
) -> list[Hypothesis]:
    """Beam search with positions pinned to known tokens.

    At a known position every hypothesis extends only by that token; its
    model log-probability is accumulated unless `score_known` is False
    (kept as a switch so tests can confirm the ranking does not depend on
    it).  A hypothesis may not finish while known positions remain ahead,
    so EOS is masked at unknown positions that precede one; with no known
    positions at all this reduces exactly to `beam_search`.
    """
    session = as_session(model, z)
    constraint = list(constraint)
    validate_constraint(constraint, session.vocab_size)
    if len(constraint) > cfg.max_length:
        raise ValueError("constraint longer than the configured max length")
    known_ahead = [False] * len(constraint)
    seen = False
    for pos in range(len(constraint) - 1, -1, -1):
        known_ahead[pos] = seen
        seen = seen or constraint[pos] is not None

    live = [Hypothesis((), 0.0, session.start())]
    finished: list[Hypothesis] = []
    for pos, want in enumerate(constraint):
        if not live:
            break
        candidates = list(finished)
        for hyp in live:
            prev = hyp.tokens[-1] if hyp.tokens else SOS
            logprobs, state = session.step(hyp.state, prev)
            if want is not None:
                gain = float(logprobs[want]) if score_known else 0.0
                candidates.append(
                    Hypothesis(
                        hyp.tokens + (int(want),),
                        hyp.logprob + gain,
                        state,
                        finished=want == EOS,
                    )
                )
                continue
            scores = logprobs
            if known_ahead[pos]:
                scores = logprobs.copy()
                scores[EOS] = -np.inf  # cannot finish before pinned positions
            for token in _top_tokens(scores, min(cfg.width, session.vocab_size)):
                if scores[token] == -np.inf:
                    continue
                candidates.append(
                    Hypothesis(
                        hyp.tokens + (int(token),),
                        hyp.logprob + float(logprobs[token]),
                        state,
                        finished=int(token) == EOS,
                    )
                )
        frontier = _ranked(candidates)[: cfg.width]
        finished = [h for h in frontier if h.finished]
        live = [h for h in frontier if not h.finished]
    return _ranked(finished + live)


def teacher_forced_score(model, tokens: Sequence[int], z=None) -> float:
    """Cumulative log-probability of `tokens` under the stepping decoder.

    Recomputes what beam search accumulated; used to pin search scores to
    the model's own per-step log-softmax values.
    """
    session = as_session(model, z)
    state = session.start()
    prev = SOS
    total = 0.0
    for tok in tokens:
        logprobs, state = session.step(state, prev)
        total += float(logprobs[tok])
        prev = tok
    return total
