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
    name, value, steps, zd = spec
    cfg = ModelConfig(vocab_size=vocab.size, direction="l2r", keep_rate=1.0,
                      embedding_dim=32, hidden_dim=64, z_dim=zd)
    t0=time.time()
    res = train("vae", train_set, dev_set, cfg,
                TrainConfig(lr=2e-3, max_steps=steps, eval_interval=250, seed=0,
                            schedule=AnnealingSchedule(kind="constant", value=value)))
    return name, time.time()-t0, res

specs = [("w0.002_k1", 0.002, 3000, 16), ("w0.01_k1", 0.01, 3000, 16)]
with ProcessPoolExecutor(max_workers=2) as ex:
    results = dict((n, (s, r)) for n, s, r in ex.map(job, specs))

held = pool[1200:1700]
short = [x for x in held if len(x) <= 8][:150]
long_ = [x for x in held if len(x) >= 10][:150]
out = {}
for name, (secs, res) in results.items():
    def rate(sents):
        hits = sum(posterior_roundtrip(res.params, x, n_samples=0).mean_decode == list(x) for x in sents)
        return hits / len(sents)
    out[name] = dict(seconds=secs, dev_kl=res.log.records[-1].dev_kl,
                     dev_rec=res.log.records[-1].dev_rec,
                     short_rate=rate(short), long_rate=rate(long_),
                     diversity=len({tuple(x) for x in sample_prior_decode(res.params, 100, seed=1)}))
with open(".calib/probe9.json","w") as f:
    json.dump(out, f, indent=1, default=float)
print("done")
