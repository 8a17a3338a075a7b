import json, time
import numpy as np
from sentvae.corpus import build_vocabulary, encode_sentence, mask_for_imputation
from sentvae.imputation import IcmConfig, icm_round_scores
from sentvae.latent import sample_prior_decode
from sentvae.model import ModelConfig
from sentvae.synthetic import DEFAULT_GRAMMAR, generate_corpus
from sentvae.training import AnnealingSchedule, TrainConfig, train, kl_trajectory_report

lines = generate_corpus(DEFAULT_GRAMMAR, 2300, seed=0)
vocab = build_vocabulary(lines)
data = [encode_sentence(vocab, l) for l in lines]
train_set, dev_set = data[:2000], data[2000:2300]
out = {}

MAX = 4000
for name, (mid_frac, tau_div) in {"A": (0.125, 66), "B": (0.1, 80)}.items():
    sched = AnnealingSchedule(kind="sigmoid", midpoint=mid_frac*MAX, tau=MAX/tau_div)
    cfg = ModelConfig(vocab_size=vocab.size, embedding_dim=32, hidden_dim=64, z_dim=8,
                      direction="r2l", keep_rate=0.75)
    t0=time.time()
    res = train("vae", train_set, dev_set, cfg,
                TrainConfig(lr=2e-3, max_steps=MAX, eval_interval=200, seed=0, schedule=sched))
    kls = [r.train_kl for r in res.log.records]; ws = [r.w for r in res.log.records]
    after_half = [k for k,w in zip(kls,ws) if w>=0.5]
    out[name] = dict(seconds=time.time()-t0, final_dev_kl=res.log.records[-1].dev_kl,
                     trough=min(after_half), final=kls[-1], ratio=kls[-1]/min(after_half),
                     pattern_now=kl_trajectory_report(res.log).pattern,
                     best_bound=res.best_dev_bound,
                     diversity=len({tuple(s) for s in sample_prior_decode(res.params, 100, seed=1)}))

# inputless VAE diversity
cfg0 = ModelConfig(vocab_size=vocab.size, embedding_dim=32, hidden_dim=64, z_dim=8,
                   direction="l2r", keep_rate=0.0)
sched0 = AnnealingSchedule(kind="sigmoid", midpoint=0.35*2500, tau=2500/25)
res0 = train("vae", train_set, dev_set, cfg0,
             TrainConfig(lr=2e-3, max_steps=2500, eval_interval=250, seed=0, schedule=sched0))
out["inputless_diversity"] = len({tuple(s) for s in sample_prior_decode(res0.params, 100, seed=1)})
out["inputless_dev_kl"] = res0.log.records[-1].dev_kl

# collapsed model diversity
cfg1 = ModelConfig(vocab_size=vocab.size, embedding_dim=32, hidden_dim=64, z_dim=8,
                   direction="r2l", keep_rate=1.0)
res1 = train("vae", train_set, dev_set, cfg1,
             TrainConfig(lr=2e-3, max_steps=1500, eval_interval=250, seed=0,
                         schedule=AnnealingSchedule(kind="constant", value=1.0)))
out["collapsed_diversity"] = len({tuple(s) for s in sample_prior_decode(res1.params, 100, seed=1)})
out["collapsed_dev_kl"] = res1.log.records[-1].dev_kl

# tiny toy for ICM round-score monotonicity
toy_grammar = {
    "templates": [["the", "<subject>", "<verb>", "the", "<object>", "."]],
    "topics": {
        "a": {"subject": ["cat", "dog", "fox"], "verb": ["sees", "bites", "chases"],
               "object": ["bird", "mouse", "worm"]},
        "b": {"subject": ["ship", "truck", "train"], "verb": ["hauls", "moves", "carries"],
               "object": ["coal", "iron", "grain"]},
    },
}
toy_lines = generate_corpus(toy_grammar, 400, seed=1)
toy_vocab = build_vocabulary(toy_lines)
toy_data = [encode_sentence(toy_vocab, l) for l in toy_lines]
toy_cfg = ModelConfig(vocab_size=toy_vocab.size, embedding_dim=12, hidden_dim=16, z_dim=4,
                      direction="r2l", keep_rate=0.75)
toy_sched = AnnealingSchedule(kind="sigmoid", midpoint=200, tau=40)
toy = train("vae", toy_data[:350], toy_data[350:], toy_cfg,
            TrainConfig(lr=3e-3, max_steps=800, eval_interval=100, seed=0, schedule=toy_sched))
mono = []
for s in toy_data[350:370]:
    scores = icm_round_scores(toy.params, mask_for_imputation(s), IcmConfig(rounds=3, beam_width=5))
    mono.append([round(x, 6) for x in scores])
out["toy_dev_kl"] = toy.log.records[-1].dev_kl
out["toy_icm_scores"] = mono
out["toy_monotone_frac"] = sum(all(b >= a - 1e-9 for a, b in zip(m, m[1:])) for m in mono) / len(mono)

with open(".calib/probe4.json","w") as f:
    json.dump(out, f, indent=1, default=float)
print("done")
