import json, time
import numpy as np
from sentvae.adversarial import build_adversarial_dataset, rnnlm_typicality_score, train_unigram_classifier
from sentvae.corpus import build_vocabulary, encode_sentence, mask_for_imputation
from sentvae.decoding import BeamConfig
from sentvae.imputation import IcmConfig, icm_round_scores, impute_rnnlm, impute_vae_icm
from sentvae.model import ModelConfig, save_checkpoint
from sentvae.synthetic import DEFAULT_GRAMMAR, generate_corpus
from sentvae.training import AnnealingSchedule, TrainConfig, train, kl_trajectory_report

lines = generate_corpus(DEFAULT_GRAMMAR, 4500, seed=0)
vocab = build_vocabulary(lines)
data = [encode_sentence(vocab, l) for l in lines]
train_set, dev_set, pool = data[:2000], data[2000:2300], data[2300:4500]

out = {}
MAX = 4000
sched = AnnealingSchedule(kind="sigmoid", midpoint=0.2*MAX, tau=MAX/50)
cfg_v = ModelConfig(vocab_size=vocab.size, embedding_dim=32, hidden_dim=64, z_dim=8,
                    direction="r2l", keep_rate=0.75)
t0=time.time()
res_v = train("vae", train_set, dev_set, cfg_v,
              TrainConfig(lr=2e-3, max_steps=MAX, eval_interval=200, seed=0, schedule=sched))
out["vae_seconds"] = time.time()-t0
out["vae_records"] = [(r.step, r.w, r.train_kl, r.dev_kl, r.dev_rec, r.dev_bound) for r in res_v.log.records]
out["vae_pattern"] = kl_trajectory_report(res_v.log).pattern
out["vae_best_bound"] = res_v.best_dev_bound

cfg_r = ModelConfig(vocab_size=vocab.size, embedding_dim=32, hidden_dim=64, z_dim=8,
                    direction="r2l", keep_rate=0.75)
t0=time.time()
res_r = train("rnnlm", train_set, dev_set, cfg_r,
              TrainConfig(lr=2e-3, max_steps=2500, eval_interval=200, seed=0))
out["rnnlm_seconds"] = time.time()-t0
out["rnnlm_best_bound"] = res_r.best_dev_bound
out["rnnlm_records"] = [(r.step, r.w, r.train_kl, r.dev_kl, r.dev_rec, r.dev_bound) for r in res_r.log.records]

# scorer: independent rnnlm, l2r, full teacher forcing
cfg_s = ModelConfig(vocab_size=vocab.size, embedding_dim=32, hidden_dim=64, z_dim=8,
                    direction="l2r", keep_rate=1.0)
t0=time.time()
res_s = train("rnnlm", train_set, dev_set, cfg_s,
              TrainConfig(lr=2e-3, max_steps=1500, eval_interval=250, seed=99))
out["scorer_seconds"] = time.time()-t0

# imputation + adversarial
sample = pool[:1200]
beam_cfg = BeamConfig(width=15)
icm_cfg = IcmConfig(rounds=3, beam_width=5)
t0=time.time()
split_r = build_adversarial_dataset(sample, lambda i: impute_rnnlm(res_r.params, i, beam_cfg), seed=0, origin="rnnlm")
out["impute_rnnlm_seconds"] = time.time()-t0
t0=time.time()
split_v = build_adversarial_dataset(sample, lambda i: impute_vae_icm(res_v.params, i, icm_cfg), seed=0, origin="vae")
out["impute_vae_seconds"] = time.time()-t0
_, m_r = train_unigram_classifier(split_r, vocab_size=vocab.size, seed=0)
_, m_v = train_unigram_classifier(split_v, vocab_size=vocab.size, seed=0)
out["adv_err_rnnlm"] = m_r.adversarial_error_pp
out["adv_err_vae"] = m_v.adversarial_error_pp

gen_r = [list(i.ids) for i in split_r.test if i.label == 0]
gen_v = [list(i.ids) for i in split_v.test if i.label == 0]
out["typicality_rnnlm"] = rnnlm_typicality_score(res_s.params, gen_r)
out["typicality_vae"] = rnnlm_typicality_score(res_s.params, gen_v)

# ICM round-score monotonicity on dev sentences
mono = []
for s in dev_set[:20]:
    scores = icm_round_scores(res_v.params, mask_for_imputation(s), icm_cfg)
    mono.append(all(b >= a - 1e-9 for a, b in zip(scores, scores[1:])))
out["icm_monotone_frac"] = sum(mono)/len(mono)

# prior-sample diversity on trained vs a collapsed model
from sentvae.latent import sample_prior_decode
samples = sample_prior_decode(res_v.params, 100, seed=1)
out["distinct_prior_samples_vae"] = len({tuple(s) for s in samples})

with open(".calib/probe3.json","w") as f:
    json.dump(out, f, indent=1, default=float)
print("done")
