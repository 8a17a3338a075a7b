"""What lives in the latent space: prior samples, round-trips, homotopies,
and low-probability stretch samples.

Run: python demos/05_latent_space_tours.py   (about five minutes)
"""

import numpy as np

from sentvae.corpus import build_vocabulary, decode_tokens, encode_sentence
from sentvae.latent import (
    HomotopyRequest,
    StretchConfig,
    decode_latent,
    homotopy,
    pair_features,
    posterior_roundtrip,
    sample_prior_decode,
    stretch_transform,
)
from sentvae.model import ModelConfig, encode_posterior
from sentvae.synthetic import DEFAULT_GRAMMAR, generate_corpus
from sentvae.training import AnnealingSchedule, TrainConfig, train
from sentvae.util import substream

lines = generate_corpus(DEFAULT_GRAMMAR, 2300, seed=0)
vocab = build_vocabulary(lines)
data = [encode_sentence(vocab, line) for line in lines]

MAX = 4000
print("training a right-to-left VAE with annealing (a few minutes) ...")
result = train(
    "vae", data[:2000], data[2000:],
    ModelConfig(vocab_size=vocab.size, embedding_dim=32, hidden_dim=64, z_dim=8,
                direction="r2l", keep_rate=0.75),
    TrainConfig(lr=2e-3, max_steps=MAX, eval_interval=250, seed=0,
                schedule=AnnealingSchedule(kind="sigmoid", midpoint=0.2 * MAX, tau=MAX / 50)),
)
params = result.params

print("\n-- greedy decodes of prior draws -------------------------------------")
for sentence in sample_prior_decode(params, 8, seed=4, vocab=vocab):
    print("  ", sentence)

print("\n-- posterior round-trip ----------------------------------------------")
probe = data[2005]
rt = posterior_roundtrip(params, probe, n_samples=3, seed=0, vocab=vocab)
print(f"  input : {decode_tokens(vocab, probe)}")
print(f"  mean  : {rt.mean_decode}")
for i, s in enumerate(rt.sample_decodes, 1):
    print(f"  samp {i}: {s}")

print("\n-- homotopy between two held-out sentences ----------------------------")
z1 = encode_posterior(params, data[2010]).mean
z2 = encode_posterior(params, data[2020]).mean
for t, sentence in homotopy(params, HomotopyRequest(z1, z2, steps=8), vocab=vocab):
    print(f"  t={t:.2f}  {sentence}")

print("\n-- low-probability stretch samples ------------------------------------")
rng = substream(11, "prior-sample")
cfg = StretchConfig(bound=0.1, seed=11)
for _ in range(4):
    z = stretch_transform(rng.standard_normal(8), cfg, 8)
    print("  ", decode_latent(params, z, vocab, 30))

print("\n-- sentence-pair features ---------------------------------------------")
feats = pair_features(z1, z2)
print(f"  dim {z1.shape[0]} codes -> {feats.shape[0]} pair features "
      f"(elementwise product, then |difference|)")
print(f"  symmetric: {np.array_equal(feats, pair_features(z2, z1))}")
