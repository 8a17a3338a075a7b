import json, time
from concurrent.futures import ProcessPoolExecutor
import numpy as np
from sentvae.corpus import build_vocabulary, encode_sentence
from sentvae.latent import posterior_roundtrip, sample_prior_decode
from sentvae.model import ModelConfig
from sentvae.synthetic import DEFAULT_GRAMMAR, generate_corpus
from sentvae.training import AnnealingSchedule, TrainConfig, train

lines = generate_corpus(DEFAULT_GRAMMAR, 4500, seed=0)
vocab = build_vocabulary(lines)
data = [encode_sentence(vocab, l) for l in lines]
train_set, dev_set, pool = data[:2000], data[2000:2300], data[2300:]

def job(spec):
    name, kind, cfg, tcfg = spec
    t0 = time.time()
    res = train(kind, train_set, dev_set, cfg, tcfg)
    return name, time.time()-t0, res

specs = []
# inputless fixtures (5 seeds) — after the UNK-feeding fix, re-measure diversity + roundtrip
for s in range(5):
    specs.append((f"vk0{s}", "vae",
        ModelConfig(vocab_size=vocab.size, direction="l2r", keep_rate=0.0,
                    embedding_dim=32, hidden_dim=64, z_dim=16),
        TrainConfig(lr=2e-3, max_steps=2500, eval_interval=250, seed=s,
                    schedule=AnnealingSchedule(kind="sigmoid", midpoint=0.35*2500, tau=100))))
# one low-keep candidate for the roundtrip example
MAX = 4000
specs.append(("lowkeep", "vae",
    ModelConfig(vocab_size=vocab.size, direction="r2l", keep_rate=0.3,
                embedding_dim=32, hidden_dim=64, z_dim=16),
    TrainConfig(lr=2e-3, max_steps=MAX, eval_interval=250, seed=0,
                schedule=AnnealingSchedule(kind="sigmoid", midpoint=0.2*MAX, tau=MAX/50))))

with ProcessPoolExecutor(max_workers=2) as ex:
    results = dict()
    for name, secs, res in ex.map(job, specs):
        results[name] = (secs, res)

out = {"seconds": {k: v[0] for k, v in results.items()}}
held = pool[1200:1700]
short = [x for x in held if len(x) <= 8][:150]
long_ = [x for x in held if len(x) >= 10][:150]

def rates(params):
    def rate(sents):
        hits = sum(posterior_roundtrip(params, x, n_samples=0).mean_decode == list(x) for x in sents)
        return hits / len(sents)
    return rate(short), rate(long_)

out["inputless"] = {}
for s in range(5):
    res = results[f"vk0{s}"][1]
    div = len({tuple(x) for x in sample_prior_decode(res.params, 100, seed=1)})
    sr, lr = rates(res.params)
    out["inputless"][s] = dict(dev_kl=res.log.records[-1].dev_kl, best_bound=res.best_dev_bound,
                               diversity=div, short_rate=sr, long_rate=lr)
lk = results["lowkeep"][1]
sr, lr = rates(lk.params)
out["lowkeep"] = dict(dev_kl=lk.log.records[-1].dev_kl, best_bound=lk.best_dev_bound,
                      diversity=len({tuple(x) for x in sample_prior_decode(lk.params, 100, seed=1)}),
                      short_rate=sr, long_rate=lr)
with open(".calib/probe5.json","w") as f:
    json.dump(out, f, indent=1, default=float)
print("done")
