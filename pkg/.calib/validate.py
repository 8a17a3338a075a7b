import json, time
from concurrent.futures import ProcessPoolExecutor
import numpy as np
from sentvae.adversarial import build_adversarial_dataset, rnnlm_typicality_score, train_unigram_classifier
from sentvae.corpus import build_vocabulary, encode_sentence, mask_for_imputation, decode_tokens
from sentvae.decoding import BeamConfig
from sentvae.imputation import IcmConfig, icm_round_scores, impute_rnnlm, impute_vae_icm
from sentvae.latent import HomotopyRequest, homotopy, posterior_roundtrip, sample_prior_decode
from sentvae.model import ModelConfig
from sentvae.synthetic import DEFAULT_GRAMMAR, generate_corpus, is_grammatical
from sentvae.training import AnnealingSchedule, TrainConfig, train, kl_trajectory_report
from sentvae.util import substream

lines = generate_corpus(DEFAULT_GRAMMAR, 4500, seed=0)
vocab = build_vocabulary(lines)
data = [encode_sentence(vocab, l) for l in lines]
train_set, dev_set, pool = data[:2000], data[2000:2300], data[2300:]
DIMS = dict(embedding_dim=32, hidden_dim=64, z_dim=8)
MAX = 4000
SLOW = AnnealingSchedule(kind="sigmoid", midpoint=0.2*MAX, tau=MAX/50)
SHARP = AnnealingSchedule(kind="sigmoid", midpoint=0.1*MAX, tau=MAX/80)

def job(spec):
    name, kind, cfg, tcfg = spec
    t0 = time.time()
    res = train(kind, train_set, dev_set, cfg, tcfg)
    return name, time.time()-t0, res

specs = []
for s in range(5):
    specs.append((f"ann{s}", "vae",
        ModelConfig(vocab_size=vocab.size, direction="r2l", keep_rate=0.75, **DIMS),
        TrainConfig(lr=2e-3, max_steps=MAX, eval_interval=200, seed=s, schedule=SLOW)))
    specs.append((f"col{s}", "vae",
        ModelConfig(vocab_size=vocab.size, direction="r2l", keep_rate=1.0, **DIMS),
        TrainConfig(lr=2e-3, max_steps=1500, eval_interval=250, seed=s,
                    schedule=AnnealingSchedule(kind="constant", value=1.0))))
    specs.append((f"vk0{s}", "vae",
        ModelConfig(vocab_size=vocab.size, direction="l2r", keep_rate=0.0,
                    embedding_dim=32, hidden_dim=64, z_dim=16),
        TrainConfig(lr=2e-3, max_steps=2500, eval_interval=250, seed=s,
                    schedule=AnnealingSchedule(kind="sigmoid", midpoint=0.35*2500, tau=100))))
    specs.append((f"rk0{s}", "rnnlm",
        ModelConfig(vocab_size=vocab.size, direction="l2r", keep_rate=0.0, **DIMS),
        TrainConfig(lr=2e-3, max_steps=1500, eval_interval=250, seed=s)))
    specs.append((f"rr2l{s}", "rnnlm",
        ModelConfig(vocab_size=vocab.size, direction="r2l", keep_rate=0.75, **DIMS),
        TrainConfig(lr=2e-3, max_steps=2500, eval_interval=250, seed=s)))
specs.append(("scorer", "rnnlm",
    ModelConfig(vocab_size=vocab.size, direction="l2r", keep_rate=1.0, **DIMS),
    TrainConfig(lr=2e-3, max_steps=1500, eval_interval=250, seed=99)))
for s in (0, 1):
    specs.append((f"spike{s}", "vae",
        ModelConfig(vocab_size=vocab.size, direction="r2l", keep_rate=0.75, **DIMS),
        TrainConfig(lr=2e-3, max_steps=MAX, eval_interval=200, seed=s, schedule=SHARP)))

t_all = time.time()
with ProcessPoolExecutor(max_workers=2) as ex:
    results = dict()
    for name, secs, res in ex.map(job, specs):
        results[name] = (secs, res)
print("training wall time", time.time()-t_all)

out = {"train_seconds": {k: v[0] for k, v in results.items()}}

# criterion 4
out["c4"] = {
    "annealed_dev_kl": [results[f"ann{s}"][1].log.records[-1].dev_kl for s in range(5)],
    "collapsed_dev_kl": [results[f"col{s}"][1].log.records[-1].dev_kl for s in range(5)],
}
# criterion 5
out["c5"] = {
    "vae_bounds": [results[f"vk0{s}"][1].best_dev_bound for s in range(5)],
    "rnnlm_bounds": [results[f"rk0{s}"][1].best_dev_bound for s in range(5)],
}
# spike pattern runs
out["pattern"] = {f"spike{s}": dict(
    pattern=kl_trajectory_report(results[f"spike{s}"][1].log).pattern,
    final_dev_kl=results[f"spike{s}"][1].log.records[-1].dev_kl) for s in (0, 1)}
out["pattern"]["annealed"] = [kl_trajectory_report(results[f"ann{s}"][1].log).pattern for s in range(5)]

# criterion 9 per seed
scorer = results["scorer"][1].params
sample = pool[:1200]
c9 = []
for s in range(5):
    vae = results[f"ann{s}"][1]
    rnn = results[f"rr2l{s}"][1]
    split_r = build_adversarial_dataset(sample, lambda i: impute_rnnlm(rnn.params, i, BeamConfig(width=15)), seed=s, origin="rnnlm")
    split_v = build_adversarial_dataset(sample, lambda i: impute_vae_icm(vae.params, i, IcmConfig(3, 5)), seed=s, origin="vae")
    _, m_r = train_unigram_classifier(split_r, vocab_size=vocab.size, seed=s)
    _, m_v = train_unigram_classifier(split_v, vocab_size=vocab.size, seed=s)
    gen_r = [list(i.ids) for i in split_r.test if i.label == 0]
    gen_v = [list(i.ids) for i in split_v.test if i.label == 0]
    c9.append(dict(vae_bound=vae.best_dev_bound, rnnlm_bound=rnn.best_dev_bound,
                   adv_vae=m_v.adversarial_error_pp, adv_rnnlm=m_r.adversarial_error_pp,
                   typ_vae=rnnlm_typicality_score(scorer, gen_v),
                   typ_rnnlm=rnnlm_typicality_score(scorer, gen_r)))
out["c9"] = c9

# criterion 10: homotopy interior grammaticality on annealed seed 0
vae0 = results["ann0"][1].params
rng = substream(0, "homotopy-accept")
interior, grammatical = 0, 0
for _ in range(20):
    z1 = rng.standard_normal(8); z2 = rng.standard_normal(8)
    path = homotopy(vae0, HomotopyRequest(z1, z2, steps=8, dedupe=False), vocab=vocab)
    for t, sent in path[1:-1]:
        interior += 1
        grammatical += is_grammatical(DEFAULT_GRAMMAR, sent)
out["c10_interior_grammatical"] = grammatical / interior

# diversity examples
out["diversity"] = {
    "annealed0": len({tuple(x) for x in sample_prior_decode(vae0, 100, seed=1)}),
    "inputless": [len({tuple(x) for x in sample_prior_decode(results[f"vk0{s}"][1].params, 100, seed=1)}) for s in range(5)],
    "inputless_dev_kl": [results[f"vk0{s}"][1].log.records[-1].dev_kl for s in range(5)],
    "collapsed": [len({tuple(x) for x in sample_prior_decode(results[f"col{s}"][1].params, 100, seed=1)}) for s in range(5)],
}

# roundtrip fidelity by length on annealed seed 0 (500 held-out)
def exact_match_rate(sents):
    hits = 0
    for x in sents:
        rt = posterior_roundtrip(vae0, x, n_samples=0)
        hits += (rt.mean_decode == list(x))
    return hits / len(sents)
held = pool[1200:1700]
short = [x for x in held if len(x) <= 8][:150]
long_ = [x for x in held if len(x) >= 10][:150]
out["roundtrip"] = {"short_rate": exact_match_rate(short), "long_rate": exact_match_rate(long_),
                    "n_short": len(short), "n_long": len(long_)}

# encode-difference on trained model
from sentvae.model import encode_posterior
a = encode_posterior(vae0, pool[0])
mod = list(pool[0]); mod[0] = mod[0] + 1 if mod[0] != vocab.size - 1 else mod[0] - 1
b = encode_posterior(vae0, mod)
out["encode_differs"] = bool(not np.allclose(a.mean, b.mean))

with open(".calib/validate.json", "w") as f:
    json.dump(out, f, indent=1, default=float)
print("done", time.time()-t_all)
