"""Train a small VAE and a matched RNNLM on synthetic sentences, then
compare their corpus NLL and perplexity.

Run: python demos/02_train_and_evaluate.py   (about two minutes on a laptop)
"""

from sentvae.corpus import build_vocabulary, encode_sentence
from sentvae.model import ModelConfig, corpus_nll_and_perplexity
from sentvae.synthetic import DEFAULT_GRAMMAR, generate_corpus
from sentvae.training import TrainConfig, train

lines = generate_corpus(DEFAULT_GRAMMAR, 1200, seed=0)
vocab = build_vocabulary(lines)
data = [encode_sentence(vocab, line) for line in lines]
train_set, dev_set = data[:1000], data[1000:]
print(f"corpus: {len(train_set)} train / {len(dev_set)} dev sentences, vocab {vocab.size}")

dims = dict(embedding_dim=24, hidden_dim=48, z_dim=8)
steps = 1200

for kind in ("vae", "rnnlm"):
    cfg = ModelConfig(vocab_size=vocab.size, keep_rate=0.75, **dims)
    result = train(
        kind, train_set, dev_set, cfg,
        TrainConfig(lr=2e-3, max_steps=steps, eval_interval=200, seed=0),
    )
    report = corpus_nll_and_perplexity(result.params, dev_set)
    tag = "bound" if kind == "vae" else "exact NLL"
    print(f"\n{kind}: dev {tag} per token {report.nll_per_token:.3f} nats, "
          f"perplexity {report.perplexity:.2f}")
    if kind == "vae":
        print(f"     reconstruction {report.reconstruction_nll / report.sentence_count:.3f} "
              f"+ KL {report.kl / report.sentence_count:.3f} nats per sentence")
    for rec in result.log.records[-3:]:
        print(f"     step {rec.step:4d}  w={rec.w:.3f}  dev_kl={rec.dev_kl:.3f}  "
              f"dev_bound={rec.dev_bound:.3f}")
