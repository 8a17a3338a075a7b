import json, time
from concurrent.futures import ProcessPoolExecutor
import numpy as np
from sentvae.corpus import build_vocabulary, encode_sentence
from sentvae.latent import posterior_roundtrip
from sentvae.model import ModelConfig
from sentvae.synthetic import generate_corpus
from sentvae.training import AnnealingSchedule, TrainConfig, train

RT_GRAMMAR = {
    "templates": [
        ["the", "<subject>", "<verb>", "the", "<object>", "."],
        ["the", "<subject>", "quietly", "<verb>", "a", "<object>", "."],
        ["the", "<subject>", "and", "the", "<subject2>", "<verb>", "the", "<object>", "near", "the", "<object2>", "."],
    ],
    "topics": {
        "a": {"subject": ["cat", "dog", "fox", "owl"], "verb": ["sees", "bites", "chases", "follows"],
               "object": ["bird", "mouse", "worm", "frog"]},
        "b": {"subject": ["ship", "truck", "train", "plane"], "verb": ["hauls", "moves", "carries", "loads"],
               "object": ["coal", "iron", "grain", "timber"]},
    },
}

lines = generate_corpus(RT_GRAMMAR, 3400, seed=2)
vocab = build_vocabulary(lines)
data = [encode_sentence(vocab, l) for l in lines]
train_set, dev_set, held = data[:2800], data[2800:2900], data[2900:]

def job(spec):
    name, value, steps = spec
    cfg = ModelConfig(vocab_size=vocab.size, direction="l2r", keep_rate=1.0,
                      embedding_dim=32, hidden_dim=64, z_dim=16)
    t0=time.time()
    res = train("vae", train_set, dev_set, cfg,
                TrainConfig(lr=2e-3, max_steps=steps, eval_interval=250, seed=0,
                            schedule=AnnealingSchedule(kind="constant", value=value)))
    return name, time.time()-t0, res

specs = [("w0.02", 0.02, 2500), ("w0.05", 0.05, 2500)]
with ProcessPoolExecutor(max_workers=2) as ex:
    results = dict((n, (s, r)) for n, s, r in ex.map(job, specs))

short = [x for x in held if len(x) == 7][:150]      # 6 tokens + EOS
long_ = [x for x in held if len(x) == 13][:150]     # 12 tokens + EOS
out = {"n_short": len(short), "n_long": len(long_)}
for name, (secs, res) in results.items():
    def rate(sents):
        hits = sum(posterior_roundtrip(res.params, x, n_samples=0).mean_decode == list(x) for x in sents)
        return hits / max(1, len(sents))
    out[name] = dict(seconds=secs, dev_kl=res.log.records[-1].dev_kl,
                     dev_rec=res.log.records[-1].dev_rec,
                     short_rate=rate(short), long_rate=rate(long_))
with open(".calib/probe10.json","w") as f:
    json.dump(out, f, indent=1, default=float)
print("done")
