"""sentvae: a sentence-level variational autoencoder language modeling toolkit.

Pure numpy. The pieces, bottom up: a tape-based reverse-mode autodiff core
(`autodiff`), neural layers (`layers`), corpus handling (`corpus`), the VAE
and RNNLM models (`model`), training with KL annealing (`training`), beam
and constrained decoding (`decoding`), missing-word imputation
(`imputation`), adversarial evaluation of completions (`adversarial`),
latent-space tools (`latent`), a template-grammar corpus generator
(`synthetic`), and a command-line front end (`cli`).
"""

from .autodiff import OptimizerState, Tape, Tensor, finite_difference_check, forward_backward
from .corpus import (
    Vocabulary,
    build_vocabulary,
    decode_tokens,
    encode_sentence,
    load_vocabulary,
    mask_for_imputation,
    save_vocabulary,
)
from .decoding import BeamConfig, beam_search, constrained_beam_search, greedy_decode
from .imputation import IcmConfig, impute_rnnlm, impute_vae_icm, matched_budget_check
from .latent import homotopy, pair_features, posterior_roundtrip, sample_prior_decode
from .model import (
    ModelConfig,
    RnnlmParams,
    VaeParams,
    corpus_nll_and_perplexity,
    elbo,
    encode_posterior,
    init_rnnlm_params,
    init_vae_params,
    kl_to_standard_normal,
    load_checkpoint,
    reconstruction_loss,
    rnnlm_loss,
    sample_latent,
    save_checkpoint,
)
from .training import AnnealingSchedule, TrainConfig, annealing_weight, train

__version__ = "0.1.0"
