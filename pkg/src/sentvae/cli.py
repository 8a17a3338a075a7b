"""Command-line surface tying the library into reproducible experiments.

Settings resolve in three layers: built-in defaults, then a flat
key=value config file (--config), then explicit flags.  Unknown config
keys are rejected.  Every seeded command writes byte-identical outputs
across runs.  Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import corpus as cp
from .adversarial import (
    LstmClassifierConfig,
    build_adversarial_dataset,
    rnnlm_typicality_score,
    train_lstm_classifier,
    train_unigram_classifier,
    write_metrics_report,
)
from .decoding import BeamConfig
from .imputation import IcmConfig, impute_rnnlm, impute_vae_icm, write_imputation_report
from .latent import (
    HomotopyRequest,
    StretchConfig,
    decode_latent,
    homotopy,
    sample_prior_decode,
    stretch_transform,
    write_homotopy_report,
)
from .model import (
    ModelConfig,
    RnnlmParams,
    VaeParams,
    corpus_nll_and_perplexity,
    encode_posterior,
    load_checkpoint,
    save_checkpoint,
)
from .synthetic import DEFAULT_GRAMMAR, gen_synthetic, load_grammar
from .training import AnnealingSchedule, TrainConfig, train
from .util import substream


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exceptions (exit code 1)."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _coerce(text: str, like) -> object:
    if isinstance(like, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"expected a boolean, got {text!r}")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def _resolve(args: argparse.Namespace, defaults: dict[str, object]) -> argparse.Namespace:
    """defaults < config file < explicit flags; unknown config keys rejected."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        for key, text in _read_config(args.config).items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r} for this subcommand")
            like = defaults[key]
            merged[key] = _coerce(text, like if like is not None else "")
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    for key, value in merged.items():
        setattr(args, key, value)
    return args


def _load_model_and_vocab(args):
    params = load_checkpoint(args.ckpt)
    vocab = cp.load_vocabulary(args.vocab)
    if vocab.size != params.config.vocab_size:
        raise ValueError(
            f"vocabulary size {vocab.size} does not match checkpoint "
            f"({params.config.vocab_size})"
        )
    return params, vocab


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

GEN_DEFAULTS = dict(out=None, count=1000, seed=0, grammar=None)


def cmd_gen_synthetic(args) -> int:
    args = _resolve(args, GEN_DEFAULTS)
    if not args.out:
        raise UsageError("gen-synthetic requires --out")
    spec = load_grammar(args.grammar) if args.grammar else DEFAULT_GRAMMAR
    gen_synthetic(spec, args.count, args.seed, args.out)
    print(f"wrote {args.count} sentences to {args.out}")
    return 0


VOCAB_DEFAULTS = dict(corpus=None, out=None, max_size=0, min_freq=1)


def cmd_build_vocab(args) -> int:
    args = _resolve(args, VOCAB_DEFAULTS)
    if not args.corpus or not args.out:
        raise UsageError("build-vocab requires --corpus and --out")
    with open(args.corpus, encoding="utf-8") as f:
        vocab = cp.build_vocabulary(
            (line for line in f if line.strip()),
            max_size=args.max_size or None,
            min_frequency=args.min_freq,
        )
    cp.save_vocabulary(vocab, args.out)
    print(f"vocabulary of {vocab.size} tokens written to {args.out}")
    return 0


TRAIN_DEFAULTS = dict(
    model=None,
    corpus=None,
    dev=None,
    vocab=None,
    out_dir=None,
    dev_fraction=0.1,
    keep_rate=0.75,
    anneal="sigmoid",
    anneal_midpoint=-1.0,
    anneal_tau=-1.0,
    anneal_ramp=-1,
    anneal_value=1.0,
    direction="l2r",
    embedding_dim=64,
    hidden_dim=128,
    z_dim=16,
    highway_count=0,
    concat_z=False,
    tie_embeddings=False,
    optimizer="adam",
    lr=1e-3,
    batch_size=32,
    max_steps=2000,
    eval_interval=100,
    patience=10,
    clip_norm=5.0,
    seed=0,
)


def _schedule_from_args(args) -> AnnealingSchedule:
    if args.anneal == "constant":
        return AnnealingSchedule(kind="constant", value=args.anneal_value)
    if args.anneal == "linear":
        ramp = args.anneal_ramp if args.anneal_ramp > 0 else args.max_steps // 2
        return AnnealingSchedule(kind="linear", ramp=ramp)
    midpoint = args.anneal_midpoint if args.anneal_midpoint > 0 else 0.25 * args.max_steps
    tau = args.anneal_tau if args.anneal_tau > 0 else args.max_steps / 40.0
    return AnnealingSchedule(kind="sigmoid", midpoint=midpoint, tau=tau)


def cmd_train(args) -> int:
    args = _resolve(args, TRAIN_DEFAULTS)
    for required in ("model", "corpus", "vocab", "out_dir"):
        if not getattr(args, required):
            raise UsageError(f"train requires --{required.replace('_', '-')}")
    os.makedirs(args.out_dir, exist_ok=True)
    vocab = cp.load_vocabulary(args.vocab)
    data = cp.load_corpus(args.corpus, vocab)
    if args.dev:
        dev = cp.load_corpus(args.dev, vocab)
        train_set = data
    else:
        order = substream(args.seed, "split").permutation(len(data))
        n_dev = max(1, int(len(data) * args.dev_fraction))
        dev = [data[i] for i in order[:n_dev]]
        train_set = [data[i] for i in order[n_dev:]]
    model_cfg = ModelConfig(
        vocab_size=vocab.size,
        embedding_dim=args.embedding_dim,
        hidden_dim=args.hidden_dim,
        z_dim=args.z_dim,
        direction=args.direction,
        concat_z_to_input=args.concat_z,
        highway_count=args.highway_count,
        keep_rate=args.keep_rate,
        tie_embeddings=args.tie_embeddings,
    )
    train_cfg = TrainConfig(
        optimizer=args.optimizer,
        lr=args.lr,
        batch_size=args.batch_size,
        max_steps=args.max_steps,
        eval_interval=args.eval_interval,
        patience=args.patience,
        schedule=_schedule_from_args(args),
        clip_norm=args.clip_norm,
        seed=args.seed,
    )
    result = train(args.model, train_set, dev, model_cfg, train_cfg)
    ckpt_path = os.path.join(args.out_dir, "model.ckpt")
    log_path = os.path.join(args.out_dir, "log.csv")
    save_checkpoint(ckpt_path, result.params)
    result.log.to_csv(log_path)
    print(f"best dev bound {result.best_dev_bound!r} nats/token at step {result.best_step}")
    print(f"checkpoint: {ckpt_path}")
    print(f"log: {log_path}")
    return 0


EVAL_DEFAULTS = dict(ckpt=None, vocab=None, corpus=None)


def cmd_eval(args) -> int:
    args = _resolve(args, EVAL_DEFAULTS)
    for required in ("ckpt", "vocab", "corpus"):
        if not getattr(args, required):
            raise UsageError(f"eval requires --{required}")
    params, vocab = _load_model_and_vocab(args)
    data = cp.load_corpus(args.corpus, vocab)
    report = corpus_nll_and_perplexity(params, data)
    print(f"model: {params.kind}")
    print(f"sentences: {report.sentence_count}")
    print(f"tokens (incl. EOS): {report.token_count}")
    print(f"total nll (nats): {report.total_nll!r}")
    print(f"nll per sentence: {report.nll_per_sentence!r}")
    print(f"nll per token: {report.nll_per_token!r}")
    print(f"perplexity: {report.perplexity!r}")
    if isinstance(params, VaeParams):
        print(f"reconstruction nll: {report.reconstruction_nll!r}")
        print(f"kl: {report.kl!r}")
    return 0


SAMPLE_DEFAULTS = dict(ckpt=None, vocab=None, count=10, stretch_c=0.0, seed=0, max_length=30)


def cmd_sample(args) -> int:
    args = _resolve(args, SAMPLE_DEFAULTS)
    for required in ("ckpt", "vocab"):
        if not getattr(args, required):
            raise UsageError(f"sample requires --{required}")
    params, vocab = _load_model_and_vocab(args)
    if not isinstance(params, VaeParams):
        raise ValueError("sampling from the prior needs a VAE checkpoint")
    if args.stretch_c > 0:
        rng = substream(args.seed, "prior-sample")
        cfg = StretchConfig(bound=args.stretch_c, seed=args.seed)
        for _ in range(args.count):
            z = stretch_transform(
                rng.standard_normal(params.config.z_dim), cfg, params.config.z_dim
            )
            print(decode_latent(params, z, vocab, args.max_length))
    else:
        for sentence in sample_prior_decode(
            params, args.count, seed=args.seed, vocab=vocab, max_length=args.max_length
        ):
            print(sentence)
    return 0


HOMOTOPY_DEFAULTS = dict(
    ckpt=None,
    vocab=None,
    from_sentence="",
    to_sentence="",
    random_pair=False,
    steps=8,
    seed=0,
    no_dedupe=False,
    out="",
    max_length=30,
)


def cmd_homotopy(args) -> int:
    args = _resolve(args, HOMOTOPY_DEFAULTS)
    for required in ("ckpt", "vocab"):
        if not getattr(args, required):
            raise UsageError(f"homotopy requires --{required}")
    params, vocab = _load_model_and_vocab(args)
    if not isinstance(params, VaeParams):
        raise ValueError("homotopies need a VAE checkpoint")
    if args.random_pair:
        rng = substream(args.seed, "homotopy-pair")
        z1 = rng.standard_normal(params.config.z_dim)
        z2 = rng.standard_normal(params.config.z_dim)
    elif args.from_sentence and args.to_sentence:
        z1 = encode_posterior(params, cp.encode_sentence(vocab, args.from_sentence)).mean
        z2 = encode_posterior(params, cp.encode_sentence(vocab, args.to_sentence)).mean
    else:
        raise UsageError("homotopy needs --random-pair or both --from-sentence/--to-sentence")
    pairs = homotopy(
        params,
        HomotopyRequest(z1, z2, steps=args.steps, dedupe=not args.no_dedupe),
        vocab=vocab,
        max_length=args.max_length,
    )
    for t, sentence in pairs:
        print(f"{t!r}\t{sentence}")
    if args.out:
        write_homotopy_report(args.out, pairs)
    return 0


IMPUTE_DEFAULTS = dict(
    ckpt=None,
    vocab=None,
    corpus=None,
    out=None,
    count=500,
    seed=0,
    beam=15,
    icm_rounds=3,
    icm_beam=5,
)


def cmd_impute(args) -> int:
    args = _resolve(args, IMPUTE_DEFAULTS)
    for required in ("ckpt", "vocab", "corpus", "out"):
        if not getattr(args, required):
            raise UsageError(f"impute requires --{required}")
    params, vocab = _load_model_and_vocab(args)
    data = cp.load_corpus(args.corpus, vocab)
    rng = substream(args.seed, "impute-sample")
    take = min(args.count, len(data))
    picks = rng.permutation(len(data))[:take]
    rows = []
    for sentence_id, idx in enumerate(picks):
        inst = cp.mask_for_imputation(data[idx])
        if isinstance(params, VaeParams):
            filled = impute_vae_icm(
                params, inst, IcmConfig(rounds=args.icm_rounds, beam_width=args.icm_beam)
            )
        else:
            filled = impute_rnnlm(params, inst, BeamConfig(width=args.beam))
        known_prefix = [t for t, k in zip(inst.ids, inst.known) if k]
        true_completion = [t for t, k in zip(inst.ids, inst.known) if not k]
        model_completion = [t for t, k in zip(filled, inst.known) if not k]
        rows.append(
            (
                sentence_id,
                cp.decode_tokens(vocab, known_prefix),
                cp.decode_tokens(vocab, true_completion),
                cp.decode_tokens(vocab, model_completion),
                params.kind,
            )
        )
    write_imputation_report(args.out, rows)
    print(f"wrote {len(rows)} imputations to {args.out}")
    return 0


ADV_DEFAULTS = dict(
    corpus=None,
    vocab=None,
    scorer_ckpt=None,
    out=None,
    count=1000,
    seed=0,
    beam=15,
    icm_rounds=3,
    icm_beam=5,
    skip_lstm=False,
)


def cmd_adv_eval(args) -> int:
    args = _resolve(args, ADV_DEFAULTS)
    for required in ("corpus", "vocab", "out"):
        if not getattr(args, required):
            raise UsageError(f"adv-eval requires --{required}")
    if not args.generator_ckpt:
        raise UsageError("adv-eval requires at least one --generator-ckpt")
    vocab = cp.load_vocabulary(args.vocab)
    data = cp.load_corpus(args.corpus, vocab)
    rng = substream(args.seed, "adv-sample")
    take = min(args.count, len(data))
    picks = rng.permutation(len(data))[:take]
    sample = [data[i] for i in picks]
    scorer = None
    if args.scorer_ckpt:
        scorer = load_checkpoint(args.scorer_ckpt)
        if not isinstance(scorer, RnnlmParams):
            raise ValueError("the typicality scorer must be an RNNLM checkpoint")
    rows = []
    for ckpt_path in args.generator_ckpt:
        params = load_checkpoint(ckpt_path)
        if params.config.vocab_size != vocab.size:
            raise ValueError(f"vocabulary mismatch for generator {ckpt_path}")
        if isinstance(params, VaeParams):
            icm_cfg = IcmConfig(rounds=args.icm_rounds, beam_width=args.icm_beam)
            imputer = lambda inst, p=params, c=icm_cfg: impute_vae_icm(p, inst, c)
        else:
            beam_cfg = BeamConfig(width=args.beam)
            imputer = lambda inst, p=params, c=beam_cfg: impute_rnnlm(p, inst, c)
        split = build_adversarial_dataset(sample, imputer, seed=args.seed, origin=params.kind)
        _, unigram = train_unigram_classifier(split, seed=args.seed, vocab_size=vocab.size)
        mean_nll = ""
        if scorer is not None:
            generated = [list(item.ids) for item in split.test if item.label == 0]
            mean_nll = repr(rnnlm_typicality_score(scorer, generated))
        rows.append((params.kind, "unigram", repr(unigram.accuracy),
                     repr(unigram.adversarial_error_pp), mean_nll))
        if not args.skip_lstm:
            lstm = train_lstm_classifier(split, LstmClassifierConfig(), seed=args.seed)
            rows.append((params.kind, "lstm", repr(lstm.accuracy),
                         repr(lstm.adversarial_error_pp), mean_nll))
    write_metrics_report(args.out, rows)
    print(f"wrote metrics for {len(rows)} model/classifier pairs to {args.out}")
    return 0


# --------------------------------------------------------------------------
# parser assembly and dispatch
# --------------------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--config", help="flat key=value settings file")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="sentvae",
        description="Sentence-VAE language modeling toolkit",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    subs = parser.add_subparsers(dest="command", metavar="subcommand")

    p = subs.add_parser("gen-synthetic", help="generate a template-grammar corpus",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--out", help="output corpus file")
    p.add_argument("--count", type=int, default=None, help="sentences to emit (default 1000)")
    p.add_argument("--seed", type=int, default=None, help="generator seed (default 0)")
    p.add_argument("--grammar", default=None, help="JSON grammar spec (default: built-in)")
    p.set_defaults(func=cmd_gen_synthetic)

    p = subs.add_parser("build-vocab", help="build a vocabulary file from a corpus",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--corpus", help="input corpus (one sentence per line)")
    p.add_argument("--out", help="output vocabulary file")
    p.add_argument("--max-size", type=int, default=None,
                   help="cap including reserved ids; 0 = unlimited (default 0)")
    p.add_argument("--min-freq", type=int, default=None, help="frequency floor (default 1)")
    p.set_defaults(func=cmd_build_vocab)

    p = subs.add_parser("train", help="train a vae or rnnlm",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--model", choices=["vae", "rnnlm"])
    p.add_argument("--corpus")
    p.add_argument("--dev", default=None, help="dev corpus (default: split from --corpus)")
    p.add_argument("--dev-fraction", type=float, default=None,
                   help="dev share when splitting (default 0.1)")
    p.add_argument("--vocab")
    p.add_argument("--out-dir")
    p.add_argument("--keep-rate", type=float, default=None,
                   help="word-dropout keep rate (default 0.75)")
    p.add_argument("--anneal", choices=["sigmoid", "linear", "constant"], default=None,
                   help="KL weight schedule (default sigmoid)")
    p.add_argument("--anneal-midpoint", type=float, default=None,
                   help="sigmoid midpoint step (default max_steps/4)")
    p.add_argument("--anneal-tau", type=float, default=None,
                   help="sigmoid steepness (default max_steps/40)")
    p.add_argument("--anneal-ramp", type=int, default=None,
                   help="linear ramp length (default max_steps/2)")
    p.add_argument("--anneal-value", type=float, default=None,
                   help="constant schedule weight (default 1.0)")
    p.add_argument("--direction", choices=["l2r", "r2l"], default=None,
                   help="decode direction (default l2r)")
    p.add_argument("--embedding-dim", type=int, default=None, help="default 64")
    p.add_argument("--hidden-dim", type=int, default=None, help="default 128")
    p.add_argument("--z-dim", type=int, default=None, help="default 16")
    p.add_argument("--highway-count", type=int, default=None,
                   help="highway layers after the encoder (default 0)")
    p.add_argument("--concat-z", action="store_const", const=True, default=None,
                   help="concatenate z to every decoder input")
    p.add_argument("--tie-embeddings", action="store_const", const=True, default=None,
                   help="share the embedding table with the output projection")
    p.add_argument("--optimizer", choices=["adam", "sgd"], default=None, help="default adam")
    p.add_argument("--lr", type=float, default=None, help="default 1e-3")
    p.add_argument("--batch-size", type=int, default=None, help="default 32")
    p.add_argument("--max-steps", type=int, default=None, help="default 2000")
    p.add_argument("--eval-interval", type=int, default=None, help="default 100")
    p.add_argument("--patience", type=int, default=None,
                   help="evals without improvement before stopping (default 10)")
    p.add_argument("--clip-norm", type=float, default=None,
                   help="global gradient-norm cap (default 5.0)")
    p.add_argument("--seed", type=int, default=None, help="default 0")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="report NLL and perplexity on a corpus",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--ckpt")
    p.add_argument("--vocab")
    p.add_argument("--corpus")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("sample", help="greedy-decode prior samples from a VAE",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--ckpt")
    p.add_argument("--vocab")
    p.add_argument("--count", type=int, default=None, help="default 10")
    p.add_argument("--stretch-c", type=float, default=None,
                   help="low-probability stretch bound; 0 disables (default 0)")
    p.add_argument("--seed", type=int, default=None, help="default 0")
    p.add_argument("--max-length", type=int, default=None, help="default 30")
    p.set_defaults(func=cmd_sample)

    p = subs.add_parser("homotopy", help="decode the line between two latent codes",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--ckpt")
    p.add_argument("--vocab")
    p.add_argument("--from-sentence", default=None)
    p.add_argument("--to-sentence", default=None)
    p.add_argument("--random-pair", action="store_const", const=True, default=None)
    p.add_argument("--steps", type=int, default=None, help="default 8")
    p.add_argument("--seed", type=int, default=None, help="default 0")
    p.add_argument("--no-dedupe", action="store_const", const=True, default=None,
                   help="keep consecutive duplicate sentences")
    p.add_argument("--out", default=None, help="also write a t<TAB>sentence report")
    p.add_argument("--max-length", type=int, default=None, help="default 30")
    p.set_defaults(func=cmd_homotopy)

    p = subs.add_parser("impute", help="fill the masked final span of corpus sentences",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--ckpt")
    p.add_argument("--vocab")
    p.add_argument("--corpus")
    p.add_argument("--out", help="TSV report path")
    p.add_argument("--count", type=int, default=None, help="sentences to impute (default 500)")
    p.add_argument("--seed", type=int, default=None, help="default 0")
    p.add_argument("--beam", type=int, default=None, help="RNNLM beam width (default 15)")
    p.add_argument("--icm-rounds", type=int, default=None, help="VAE ICM rounds (default 3)")
    p.add_argument("--icm-beam", type=int, default=None, help="VAE ICM beam width (default 5)")
    p.set_defaults(func=cmd_impute)

    p = subs.add_parser("adv-eval", help="adversarial evaluation of imputed completions",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--vocab")
    p.add_argument("--generator-ckpt", action="append", default=None,
                   help="generator checkpoint; repeatable")
    p.add_argument("--scorer-ckpt", default=None,
                   help="independently trained RNNLM for typicality NLL")
    p.add_argument("--out", help="CSV metrics path")
    p.add_argument("--count", type=int, default=None, help="source sentences (default 1000)")
    p.add_argument("--seed", type=int, default=None, help="default 0")
    p.add_argument("--beam", type=int, default=None, help="RNNLM beam width (default 15)")
    p.add_argument("--icm-rounds", type=int, default=None, help="default 3")
    p.add_argument("--icm-beam", type=int, default=None, help="default 5")
    p.add_argument("--skip-lstm", action="store_const", const=True, default=None,
                   help="skip the LSTM classifier (unigram only)")
    p.set_defaults(func=cmd_adv_eval)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError(parser.format_usage())
        return args.func(args)
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0
    except Exception as exc:
        print(f"sentvae: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
