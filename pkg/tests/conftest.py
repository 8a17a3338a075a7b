"""Shared fixtures: the synthetic corpus and the trained desk-scale models.

Training fixtures are session-scoped and built lazily, so unit-test runs
never pay for them; the acceptance and trained-behavior modules share one
set of models.  Seed sweeps run in two worker processes.  Set
SENTVAE_TEST_CACHE=<dir> to reuse trained models across local runs while
iterating (delete the directory after any code change).
"""

import os
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import pytest
from hypothesis import settings as hypothesis_settings

from sentvae.corpus import build_vocabulary, encode_sentence
from sentvae.model import ModelConfig
from sentvae.synthetic import DEFAULT_GRAMMAR, generate_corpus
from sentvae.training import AnnealingSchedule, TrainConfig, TrainResult, train

hypothesis_settings.register_profile("suite", deadline=None)
hypothesis_settings.load_profile("suite")

SEEDS = (0, 1, 2, 3, 4)

# one desk-scale architecture for every trained fixture
DIMS = dict(embedding_dim=32, hidden_dim=64, z_dim=8)

ANNEALED_STEPS = 4000
# late-ish midpoint keeps over a nat of KL at convergence
ANNEALED_SCHEDULE = AnnealingSchedule(
    kind="sigmoid", midpoint=0.2 * ANNEALED_STEPS, tau=ANNEALED_STEPS / 50
)
# much earlier crossing: the KL trough lands while reconstruction is still
# improving, which makes the post-crossing rise pronounced
SPIKE_SCHEDULE = AnnealingSchedule(
    kind="sigmoid", midpoint=0.1 * ANNEALED_STEPS, tau=ANNEALED_STEPS / 80
)


@dataclass
class SynthData:
    vocab: object
    train: list
    dev: list
    pool: list  # held out for imputation / adversarial sampling
    grammar: dict


@pytest.fixture(scope="session")
def synth_data() -> SynthData:
    lines = generate_corpus(DEFAULT_GRAMMAR, 4500, seed=0)
    vocab = build_vocabulary(lines)
    data = [encode_sentence(vocab, line) for line in lines]
    return SynthData(vocab, data[:2000], data[2000:2300], data[2300:], DEFAULT_GRAMMAR)


def _train_job(tag, kind, model_cfg, train_cfg, train_set, dev_set) -> TrainResult:
    cache_dir = os.environ.get("SENTVAE_TEST_CACHE")
    path = os.path.join(cache_dir, f"{tag}.pkl") if cache_dir else None
    if path and os.path.exists(path):
        with open(path, "rb") as f:
            return pickle.load(f)
    result = train(kind, train_set, dev_set, model_cfg, train_cfg)
    if path:
        os.makedirs(cache_dir, exist_ok=True)
        with open(path, "wb") as f:
            pickle.dump(result, f)
    return result


def _sweep(data: SynthData, tag: str, kind: str, model_cfg, train_cfg_for_seed):
    jobs = [
        (f"{tag}-seed{seed}", kind, model_cfg, train_cfg_for_seed(seed), data.train, data.dev)
        for seed in SEEDS
    ]
    with ProcessPoolExecutor(max_workers=2) as pool:
        return list(pool.map(_train_job, *zip(*jobs)))


@pytest.fixture(scope="session")
def vae_annealed_runs(synth_data) -> list[TrainResult]:
    """Right-to-left VAE, keep rate 0.75, sigmoid annealing; one per seed."""
    cfg = ModelConfig(vocab_size=synth_data.vocab.size, direction="r2l", keep_rate=0.75, **DIMS)
    return _sweep(
        synth_data,
        "vae-annealed",
        "vae",
        cfg,
        lambda seed: TrainConfig(
            lr=2e-3,
            max_steps=ANNEALED_STEPS,
            eval_interval=200,
            seed=seed,
            schedule=ANNEALED_SCHEDULE,
        ),
    )


@pytest.fixture(scope="session")
def vae_collapsed_runs(synth_data) -> list[TrainResult]:
    """Constant weight 1 and no word dropout: the posterior-collapse regime."""
    cfg = ModelConfig(vocab_size=synth_data.vocab.size, direction="r2l", keep_rate=1.0, **DIMS)
    return _sweep(
        synth_data,
        "vae-collapsed",
        "vae",
        cfg,
        lambda seed: TrainConfig(
            lr=2e-3,
            max_steps=1500,
            eval_interval=250,
            seed=seed,
            schedule=AnnealingSchedule(kind="constant", value=1.0),
        ),
    )


@pytest.fixture(scope="session")
def vae_spike_run(synth_data) -> TrainResult:
    """One annealed run with the sharp schedule; shows the spike-drop-rise."""
    cfg = ModelConfig(vocab_size=synth_data.vocab.size, direction="r2l", keep_rate=0.75, **DIMS)
    return _train_job(
        "vae-spike",
        "vae",
        cfg,
        TrainConfig(
            lr=2e-3,
            max_steps=ANNEALED_STEPS,
            eval_interval=200,
            seed=0,
            schedule=SPIKE_SCHEDULE,
        ),
        synth_data.train,
        synth_data.dev,
    )


@pytest.fixture(scope="session")
def vae_inputless_runs(synth_data) -> list[TrainResult]:
    """Keep rate 0: historyless decoding, everything must flow through z.

    z is doubled relative to the other fixtures; the inputless posterior
    has to carry whole sentences.
    """
    cfg = ModelConfig(
        vocab_size=synth_data.vocab.size, direction="l2r", keep_rate=0.0,
        embedding_dim=32, hidden_dim=64, z_dim=16,
    )
    sched = AnnealingSchedule(kind="sigmoid", midpoint=0.35 * 2500, tau=2500 / 25)
    return _sweep(
        synth_data,
        "vae-inputless",
        "vae",
        cfg,
        lambda seed: TrainConfig(
            lr=2e-3, max_steps=2500, eval_interval=250, seed=seed, schedule=sched
        ),
    )


@pytest.fixture(scope="session")
def rnnlm_inputless_runs(synth_data) -> list[TrainResult]:
    cfg = ModelConfig(vocab_size=synth_data.vocab.size, direction="l2r", keep_rate=0.0, **DIMS)
    return _sweep(
        synth_data,
        "rnnlm-inputless",
        "rnnlm",
        cfg,
        lambda seed: TrainConfig(lr=2e-3, max_steps=1500, eval_interval=250, seed=seed),
    )


@pytest.fixture(scope="session")
def rnnlm_r2l_runs(synth_data) -> list[TrainResult]:
    """The imputation baseline, matched to the annealed VAE's regime."""
    cfg = ModelConfig(vocab_size=synth_data.vocab.size, direction="r2l", keep_rate=0.75, **DIMS)
    return _sweep(
        synth_data,
        "rnnlm-r2l",
        "rnnlm",
        cfg,
        lambda seed: TrainConfig(lr=2e-3, max_steps=2500, eval_interval=250, seed=seed),
    )


@pytest.fixture(scope="session")
def scorer_rnnlm(synth_data) -> TrainResult:
    """Independent left-to-right language model for typicality scoring."""
    cfg = ModelConfig(vocab_size=synth_data.vocab.size, direction="l2r", keep_rate=1.0, **DIMS)
    return _train_job(
        "scorer-rnnlm",
        "rnnlm",
        cfg,
        TrainConfig(lr=2e-3, max_steps=1500, eval_interval=250, seed=99),
        synth_data.train,
        synth_data.dev,
    )


@pytest.fixture(scope="session")
def adv_splits(synth_data, vae_annealed_runs, rnnlm_r2l_runs):
    """Per-seed adversarial datasets from both imputers over one held-out
    sample; shared by the direction criterion and the typicality check."""
    from sentvae.adversarial import build_adversarial_dataset
    from sentvae.decoding import BeamConfig
    from sentvae.imputation import IcmConfig, impute_rnnlm, impute_vae_icm

    sample = synth_data.pool[:1200]
    out = []
    for seed, (vae, rnnlm) in enumerate(zip(vae_annealed_runs, rnnlm_r2l_runs)):
        split_r = build_adversarial_dataset(
            sample,
            lambda inst, p=rnnlm.params: impute_rnnlm(p, inst, BeamConfig(width=15)),
            seed=seed,
            origin="rnnlm",
        )
        split_v = build_adversarial_dataset(
            sample,
            lambda inst, p=vae.params: impute_vae_icm(p, inst, IcmConfig(3, 5)),
            seed=seed,
            origin="vae",
        )
        out.append((split_r, split_v))
    return out


TOY_GRAMMAR = {
    "templates": [["the", "<subject>", "<verb>", "the", "<object>", "."]],
    "topics": {
        "a": {
            "subject": ["cat", "dog", "fox"],
            "verb": ["sees", "bites", "chases"],
            "object": ["bird", "mouse", "worm"],
        },
        "b": {
            "subject": ["ship", "truck", "train"],
            "verb": ["hauls", "moves", "carries"],
            "object": ["coal", "iron", "grain"],
        },
    },
}

# three template lengths with small slot lexicons: short sentences are
# densely covered by a 2,800-sentence training set, long ones are not,
# which is what makes round-trip fidelity length-dependent
ROUNDTRIP_GRAMMAR = {
    "templates": [
        ["the", "<subject>", "<verb>", "the", "<object>", "."],
        ["the", "<subject>", "quietly", "<verb>", "a", "<object>", "."],
        ["the", "<subject>", "and", "the", "<subject2>", "<verb>", "the",
         "<object>", "near", "the", "<object2>", "."],
    ],
    "topics": {
        "a": {
            "subject": ["cat", "dog", "fox", "owl"],
            "verb": ["sees", "bites", "chases", "follows"],
            "object": ["bird", "mouse", "worm", "frog"],
        },
        "b": {
            "subject": ["ship", "truck", "train", "plane"],
            "verb": ["hauls", "moves", "carries", "loads"],
            "object": ["coal", "iron", "grain", "timber"],
        },
    },
}


@dataclass
class RoundtripModel:
    vocab: object
    held_out: list
    result: TrainResult


@pytest.fixture(scope="session")
def roundtrip_vae() -> RoundtripModel:
    """Near-autoencoding VAE (tiny constant KL weight, full teacher
    forcing) on the dedicated grammar; the regime where exact round-trips
    actually happen at desk scale."""
    lines = generate_corpus(ROUNDTRIP_GRAMMAR, 3400, seed=2)
    vocab = build_vocabulary(lines)
    data = [encode_sentence(vocab, line) for line in lines]
    cfg = ModelConfig(
        vocab_size=vocab.size, embedding_dim=32, hidden_dim=96, z_dim=16,
        direction="l2r", keep_rate=1.0,
    )
    result = _train_job(
        "roundtrip-vae",
        "vae",
        cfg,
        TrainConfig(
            lr=2e-3, max_steps=5000, eval_interval=500, seed=0,
            schedule=AnnealingSchedule(kind="constant", value=0.02),
        ),
        data[:2800],
        data[2800:2900],
    )
    return RoundtripModel(vocab, data[2900:], result)


@dataclass
class ToyModel:
    vocab: object
    train: list
    dev: list
    result: TrainResult


@pytest.fixture(scope="session")
def toy_vae() -> ToyModel:
    """Small single-template VAE used for instance-level oracle checks."""
    lines = generate_corpus(TOY_GRAMMAR, 400, seed=1)
    vocab = build_vocabulary(lines)
    data = [encode_sentence(vocab, line) for line in lines]
    cfg = ModelConfig(
        vocab_size=vocab.size, embedding_dim=12, hidden_dim=16, z_dim=4,
        direction="r2l", keep_rate=0.75,
    )
    result = _train_job(
        "toy-vae",
        "vae",
        cfg,
        TrainConfig(
            lr=3e-3,
            max_steps=800,
            eval_interval=100,
            seed=0,
            schedule=AnnealingSchedule(kind="sigmoid", midpoint=200, tau=40),
        ),
        data[:350],
        data[350:],
    )
    return ToyModel(vocab, data[:350], data[350:], result)
