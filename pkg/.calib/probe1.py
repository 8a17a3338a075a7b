import json, time
import numpy as np
from sentvae.corpus import build_vocabulary, encode_sentence
from sentvae.model import ModelConfig, corpus_nll_and_perplexity
from sentvae.synthetic import DEFAULT_GRAMMAR, generate_corpus
from sentvae.training import AnnealingSchedule, TrainConfig, train


lines = generate_corpus(DEFAULT_GRAMMAR, 2300, seed=0)
vocab = build_vocabulary(lines)
data = [encode_sentence(vocab, l) for l in lines]
train_set, dev_set = data[:2000], data[2000:2300]

out = {}

# --- annealed long run: does KL rise >= 1.2x post-crossing min? ---
MAX = 4000
cfg = ModelConfig(vocab_size=vocab.size, embedding_dim=32, hidden_dim=64, z_dim=8,
                  direction="r2l", keep_rate=0.75)
sched = AnnealingSchedule(kind="sigmoid", midpoint=0.35*MAX, tau=MAX/25)
t0=time.time()
res = train("vae", train_set, dev_set, cfg,
            TrainConfig(lr=2e-3, max_steps=MAX, eval_interval=200, seed=0, schedule=sched))
out["annealed"] = dict(seconds=time.time()-t0,
    records=[(r.step, r.w, r.train_kl, r.dev_kl, r.dev_rec, r.dev_bound) for r in res.log.records])

# --- collapse run: constant w=1, k=1 ---
cfg_c = ModelConfig(vocab_size=vocab.size, embedding_dim=32, hidden_dim=64, z_dim=8,
                    direction="r2l", keep_rate=1.0)
t0=time.time()
res_c = train("vae", train_set, dev_set, cfg_c,
              TrainConfig(lr=2e-3, max_steps=1500, eval_interval=250, seed=0,
                          schedule=AnnealingSchedule(kind="constant", value=1.0)))
out["collapse"] = dict(seconds=time.time()-t0,
    records=[(r.step, r.w, r.train_kl, r.dev_kl, r.dev_rec, r.dev_bound) for r in res_c.log.records])

with open(".calib/probe1.json","w") as f:
    json.dump(out, f, indent=1)
print("done")
