import json, time
import numpy as np
from sentvae.corpus import build_vocabulary, encode_sentence
from sentvae.model import ModelConfig
from sentvae.synthetic import DEFAULT_GRAMMAR, generate_corpus
from sentvae.training import AnnealingSchedule, TrainConfig, train

lines = generate_corpus(DEFAULT_GRAMMAR, 2300, seed=0)
vocab = build_vocabulary(lines)
data = [encode_sentence(vocab, l) for l in lines]
train_set, dev_set = data[:2000], data[2000:2300]

out = {}
# --- inputless decoders (k=0): VAE vs RNNLM, l2r ---
MAX = 3000
sched = AnnealingSchedule(kind="sigmoid", midpoint=0.35*MAX, tau=MAX/25)
for kind in ("vae", "rnnlm"):
    cfg = ModelConfig(vocab_size=vocab.size, embedding_dim=32, hidden_dim=64, z_dim=8,
                      direction="l2r", keep_rate=0.0)
    t0=time.time()
    res = train(kind, train_set, dev_set, cfg,
                TrainConfig(lr=2e-3, max_steps=MAX, eval_interval=250, seed=0,
                            schedule=sched if kind=="vae" else None))
    out[kind] = dict(seconds=time.time()-t0, best=res.best_dev_bound,
        records=[(r.step, r.w, r.train_kl, r.dev_kl, r.dev_rec, r.dev_bound) for r in res.log.records])
with open(".calib/probe2.json","w") as f:
    json.dump(out, f, indent=1)
print("done")
