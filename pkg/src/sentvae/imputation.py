"""Missing-word imputation drivers for both model families.

Both models decode in their trained direction; with right-to-left models
the sentence-final unknown span is decoded first, exactly where a plain
language model has no context to condition on.  The RNNLM gets one wide
constrained beam pass; the VAE alternates posterior-mode assignment of z
with a narrower constrained beam (approximate iterated conditional
modes), so the two can be compared at matched computation budgets.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import EOS, UNK, ImputationInstance, to_surface
from .decoding import BeamConfig, constrained_beam_search
from .model import RnnlmParams, VaeParams, encode_posterior, reconstruction_loss

__all__ = [
    "IcmConfig",
    "matched_budget_check",
    "impute_rnnlm",
    "impute_vae_icm",
    "icm_round_scores",
    "write_imputation_report",
]


@dataclass(frozen=True)
class IcmConfig:
    """Iterated-conditional-modes schedule: rounds x beam width."""

    rounds: int = 3
    beam_width: int = 5
    init_token: int = UNK

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.beam_width < 1:
            raise ValueError("beam width must be >= 1")


def matched_budget_check(rnnlm_cfg: BeamConfig, icm_cfg: IcmConfig) -> bool:
    """True when the single-pass beam equals rounds x beam of the ICM side."""
    return rnnlm_cfg.width == icm_cfg.rounds * icm_cfg.beam_width


def _model_order_constraint(inst: ImputationInstance, direction: str):
    """Constraint over decode positions: known token id or None.

    Mirrors the corpus-boundary content reversal, so a trailing EOS keeps
    its final decode position under r2l.
    """
    constraint = [tok if known else None for tok, known in zip(inst.ids, inst.known)]
    if direction == "r2l":
        if inst.ids and inst.ids[-1] == EOS:
            constraint = constraint[-2::-1] + [constraint[-1]]
        else:
            constraint = constraint[::-1]
    return constraint


def _check_result(inst: ImputationInstance, surface_ids: list[int]) -> list[int]:
    if len(surface_ids) != len(inst.ids):
        raise RuntimeError("imputation changed the sequence length")
    for pos, (tok, known) in enumerate(zip(inst.ids, inst.known)):
        if known and surface_ids[pos] != tok:
            raise RuntimeError(f"imputation altered known token at position {pos}")
    return surface_ids


def impute_rnnlm(model, inst: ImputationInstance, cfg: BeamConfig = BeamConfig()) -> list[int]:
    """Single constrained beam pass; returns the top hypothesis in surface order."""
    direction = model.config.direction if isinstance(model, RnnlmParams) else model.direction
    constraint = _model_order_constraint(inst, direction)
    search_cfg = BeamConfig(width=cfg.width, max_length=max(cfg.max_length, len(constraint)))
    z = None
    hyps = constrained_beam_search(model, z, constraint, search_cfg)
    best = to_surface(list(hyps[0].tokens), direction)
    return _check_result(inst, best)


def impute_vae_icm(
    params: VaeParams, inst: ImputationInstance, cfg: IcmConfig = IcmConfig()
) -> list[int]:
    """Approximate iterated conditional modes over (z, unknown words).

    Unknowns start as `init_token`; each round re-encodes the current
    guess, takes the posterior mean as the latent mode, and refills the
    unknown span with a constrained beam search given that z.
    Deterministic: mode assignment, deterministic search, fixed ties.
    """
    return _icm(params, inst, cfg)[0]


def icm_round_scores(
    params: VaeParams, inst: ImputationInstance, cfg: IcmConfig = IcmConfig()
) -> list[float]:
    """Joint score per round: -reconstruction NLL of x-hat given that round's z."""
    return _icm(params, inst, cfg)[1]


def _icm(params: VaeParams, inst: ImputationInstance, cfg: IcmConfig):
    direction = params.config.direction
    constraint = _model_order_constraint(inst, direction)
    search_cfg = BeamConfig(width=cfg.beam_width, max_length=len(constraint))
    guess = [tok if known else cfg.init_token for tok, known in zip(inst.ids, inst.known)]
    scores: list[float] = []
    for _ in range(cfg.rounds):
        z = encode_posterior(params, guess).mean
        hyps = constrained_beam_search(params, z, constraint, search_cfg)
        guess = to_surface(list(hyps[0].tokens), direction)
        scores.append(-reconstruction_loss(params, guess, z, keep_rate=1.0))
    return _check_result(inst, guess), scores


def write_imputation_report(path, rows) -> None:
    """TSV report: sentence_id, known_prefix, true_completion, model_completion, model."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("sentence_id\tknown_prefix\ttrue_completion\tmodel_completion\tmodel\n")
        for row in rows:
            f.write("\t".join(str(c) for c in row) + "\n")
