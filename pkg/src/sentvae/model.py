"""The sentence VAE language model and its matched RNNLM baseline.

The VAE encodes a sentence with an LSTM, maps the final state through an
optional highway stack to a diagonal Gaussian posterior over a latent
vector z, and decodes with an LSTM whose initial state is projected from
z.  The baseline shares the decoder architecture but starts from a fixed
zero state and has no latent variable.

Two evaluation conventions, fixed here and relied on by the tests:

* Per-step training objectives use one posterior sample (reparameterized);
  corpus evaluation scores the reconstruction at the posterior mean and
  always adds the closed-form KL, which makes reported dev metrics
  deterministic and checkpoint round-trips exactly reproducible.
* Decode direction is handled at the corpus boundary.  The encoder always
  reads surface order; the decoder consumes model order (reversed content
  for r2l models).
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import corpus as cp
from .autodiff import Tape, Tensor, concat
from .layers import (
    EmbeddingTable,
    HighwayParams,
    LstmCellParams,
    LstmState,
    affine,
    cross_entropy_rows,
    highway_graph,
    init_affine,
    init_embedding,
    init_highway,
    init_lstm,
    log_softmax_np,
    lstm_cell_graph,
    lstm_step,
)
from .util import as_generator, substream

CKPT_MAGIC = "sentvae-ckpt v1"


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and architectural switches shared by both model families."""

    vocab_size: int
    embedding_dim: int = 64
    hidden_dim: int = 128
    z_dim: int = 16
    direction: str = "l2r"
    concat_z_to_input: bool = False
    highway_count: int = 0
    keep_rate: float = 0.75
    tie_embeddings: bool = False

    def __post_init__(self):
        for field_name in ("vocab_size", "embedding_dim", "hidden_dim", "z_dim"):
            if getattr(self, field_name) < 1:
                raise ValueError(f"{field_name} must be positive")
        if self.direction not in ("l2r", "r2l"):
            raise ValueError(f"direction must be 'l2r' or 'r2l', got {self.direction!r}")
        if not 0.0 <= self.keep_rate <= 1.0:
            raise ValueError(f"keep_rate must lie in [0, 1], got {self.keep_rate}")
        if self.highway_count < 0:
            raise ValueError("highway_count must be >= 0")
        if self.tie_embeddings and self.embedding_dim != self.hidden_dim:
            raise ValueError("tied embeddings require embedding_dim == hidden_dim")


@dataclass
class GaussianPosterior:
    """Diagonal Gaussian recognition-model output for one sentence."""

    mean: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        if self.mean.shape != self.log_var.shape:
            raise ValueError("mean and log-variance must share a shape")


@dataclass
class VaeParams:
    embedding: EmbeddingTable
    encoder: LstmCellParams
    highway: HighwayParams
    mu_w: np.ndarray
    mu_b: np.ndarray
    logvar_w: np.ndarray
    logvar_b: np.ndarray
    init_w: np.ndarray
    init_b: np.ndarray
    decoder: LstmCellParams
    out_w: np.ndarray | None
    out_b: np.ndarray
    config: ModelConfig

    @property
    def kind(self) -> str:
        return "vae"

    @property
    def dtype(self) -> np.dtype:
        return self.embedding.weight.dtype

    def named_params(self) -> dict[str, np.ndarray]:
        """Declaration-order view of every parameter array (checkpoint order)."""
        out = {
            "embedding.weight": self.embedding.weight,
            "encoder.w": self.encoder.w,
            "encoder.b": self.encoder.b,
        }
        for i in range(self.highway.layer_count):
            out[f"highway.{i}.transform_w"] = self.highway.transform_w[i]
            out[f"highway.{i}.transform_b"] = self.highway.transform_b[i]
            out[f"highway.{i}.gate_w"] = self.highway.gate_w[i]
            out[f"highway.{i}.gate_b"] = self.highway.gate_b[i]
        out.update(
            {
                "mu.w": self.mu_w,
                "mu.b": self.mu_b,
                "logvar.w": self.logvar_w,
                "logvar.b": self.logvar_b,
                "init.w": self.init_w,
                "init.b": self.init_b,
                "decoder.w": self.decoder.w,
                "decoder.b": self.decoder.b,
            }
        )
        if self.out_w is not None:
            out["output.w"] = self.out_w
        out["output.b"] = self.out_b
        return out


@dataclass
class RnnlmParams:
    embedding: EmbeddingTable
    decoder: LstmCellParams
    out_w: np.ndarray | None
    out_b: np.ndarray
    config: ModelConfig

    @property
    def kind(self) -> str:
        return "rnnlm"

    @property
    def dtype(self) -> np.dtype:
        return self.embedding.weight.dtype

    def named_params(self) -> dict[str, np.ndarray]:
        out = {
            "embedding.weight": self.embedding.weight,
            "decoder.w": self.decoder.w,
            "decoder.b": self.decoder.b,
        }
        if self.out_w is not None:
            out["output.w"] = self.out_w
        out["output.b"] = self.out_b
        return out


ModelParams = VaeParams | RnnlmParams


def _decoder_input_dim(cfg: ModelConfig) -> int:
    return cfg.embedding_dim + (cfg.z_dim if cfg.concat_z_to_input else 0)


def init_vae_params(cfg: ModelConfig, rng, dtype=np.float32) -> VaeParams:
    rng = as_generator(rng)
    out_w, out_b = (
        (None, np.zeros(cfg.vocab_size, dtype=dtype))
        if cfg.tie_embeddings
        else init_affine(cfg.hidden_dim, cfg.vocab_size, rng, dtype)
    )
    mu_w, mu_b = init_affine(cfg.hidden_dim, cfg.z_dim, rng, dtype)
    logvar_w, logvar_b = init_affine(cfg.hidden_dim, cfg.z_dim, rng, dtype)
    init_w, init_b = init_affine(cfg.z_dim, 2 * cfg.hidden_dim, rng, dtype)
    return VaeParams(
        embedding=init_embedding(cfg.vocab_size, cfg.embedding_dim, rng, dtype),
        encoder=init_lstm(cfg.embedding_dim, cfg.hidden_dim, rng, dtype),
        highway=init_highway(cfg.hidden_dim, cfg.highway_count, rng, dtype),
        mu_w=mu_w,
        mu_b=mu_b,
        logvar_w=logvar_w,
        logvar_b=logvar_b,
        init_w=init_w,
        init_b=init_b,
        decoder=init_lstm(_decoder_input_dim(cfg), cfg.hidden_dim, rng, dtype),
        out_w=out_w,
        out_b=out_b,
        config=cfg,
    )


def init_rnnlm_params(cfg: ModelConfig, rng, dtype=np.float32) -> RnnlmParams:
    rng = as_generator(rng)
    out_w, out_b = (
        (None, np.zeros(cfg.vocab_size, dtype=dtype))
        if cfg.tie_embeddings
        else init_affine(cfg.hidden_dim, cfg.vocab_size, rng, dtype)
    )
    return RnnlmParams(
        embedding=init_embedding(cfg.vocab_size, cfg.embedding_dim, rng, dtype),
        decoder=init_lstm(cfg.embedding_dim, cfg.hidden_dim, rng, dtype),
        out_w=out_w,
        out_b=out_b,
        config=cfg,
    )


# ---------------------------------------------------------------------------
# batched graph construction
# ---------------------------------------------------------------------------


def _model_order_ids(ids: np.ndarray, lengths: np.ndarray, direction: str) -> np.ndarray:
    """Surface-order padded ids -> decode-order ids (per-row content reversal)."""
    if direction == "l2r":
        return ids
    out = ids.copy()
    for row in range(ids.shape[0]):
        n = int(lengths[row])
        out[row, :n] = cp.reverse_content(ids[row, :n].tolist())
    return out


def _shift_inputs(ids_model: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Teacher-forcing inputs: SOS then the targets shifted right by one."""
    inputs = np.full_like(ids_model, cp.PAD)
    inputs[:, 0] = cp.SOS
    inputs[:, 1:] = ids_model[:, :-1]
    inputs[inputs == cp.EOS] = cp.PAD  # the step after EOS is never scored
    return inputs


def _length_mask(lengths: np.ndarray, width: int, dtype) -> np.ndarray:
    return (np.arange(width)[None, :] < lengths[:, None]).astype(dtype)


class VaeGraph:
    """Tape-bound VAE: builds encoder, posterior, and decoder subgraphs."""

    def __init__(self, tape: Tape, p: VaeParams):
        self.tape = tape
        self.p = p
        self.cfg = p.config
        self.t = {name: tape.param(name, arr) for name, arr in p.named_params().items()}

    def encode(self, ids_surface: np.ndarray, lengths: np.ndarray) -> tuple[Tensor, Tensor]:
        """Posterior parameters (mu, logvar), each (B, z_dim)."""
        tape, cfg = self.tape, self.cfg
        batch = ids_surface.shape[0]
        width = ids_surface.shape[1]
        mask = _length_mask(lengths, width, np.float64)
        h = tape.const(np.zeros((batch, cfg.hidden_dim)))
        c = tape.const(np.zeros((batch, cfg.hidden_dim)))
        emb = self.t["embedding.weight"]
        for t in range(width):
            x = emb[ids_surface[:, t]]
            h_new, c_new = lstm_cell_graph(
                self.t["encoder.w"], self.t["encoder.b"], cfg.hidden_dim, x, h, c
            )
            m = tape.const(mask[:, t : t + 1])
            keep = tape.const(1.0 - mask[:, t : t + 1])
            h = (h_new * m) + (h * keep)
            c = (c_new * m) + (c * keep)
        if cfg.highway_count:
            h = highway_graph(
                h,
                [self.t[f"highway.{i}.transform_w"] for i in range(cfg.highway_count)],
                [self.t[f"highway.{i}.transform_b"] for i in range(cfg.highway_count)],
                [self.t[f"highway.{i}.gate_w"] for i in range(cfg.highway_count)],
                [self.t[f"highway.{i}.gate_b"] for i in range(cfg.highway_count)],
            )
        mu = affine(h, self.t["mu.w"], self.t["mu.b"])
        logvar = affine(h, self.t["logvar.w"], self.t["logvar.b"])
        return mu, logvar

    def sample_latent(self, mu: Tensor, logvar: Tensor, eps: np.ndarray) -> Tensor:
        """Reparameterized draw z = mu + exp(logvar / 2) * eps."""
        return mu + (logvar * 0.5).exp() * self.tape.const(eps)

    def kl_rows(self, mu: Tensor, logvar: Tensor) -> Tensor:
        terms = (mu * mu) + logvar.exp() + (logvar * -1.0) + (-1.0)
        return terms.sum(axis=1) * 0.5

    def initial_state(self, z: Tensor) -> tuple[Tensor, Tensor]:
        hd = self.cfg.hidden_dim
        hc = affine(z, self.t["init.w"], self.t["init.b"])
        return hc[:, :hd].tanh(), hc[:, hd:]

    def _logits(self, h: Tensor) -> Tensor:
        if self.cfg.tie_embeddings:
            return h.matmul(self.t["embedding.weight"], tb=True) + self.t["output.b"]
        return affine(h, self.t["output.w"], self.t["output.b"])

    def decoder_nll_rows(
        self, z: Tensor, inputs: np.ndarray, targets: np.ndarray, lengths: np.ndarray
    ) -> Tensor:
        """Per-sequence reconstruction NLL in nats, summed over tokens + EOS."""
        tape, cfg = self.tape, self.cfg
        batch, width = targets.shape
        mask = _length_mask(lengths, width, np.float64)
        h, c = self.initial_state(z)
        emb = self.t["embedding.weight"]
        nll = tape.const(np.zeros(batch))
        for t in range(width):
            x = emb[inputs[:, t]]
            if cfg.concat_z_to_input:
                x = concat([x, z], axis=1)
            h, c = lstm_cell_graph(
                self.t["decoder.w"], self.t["decoder.b"], cfg.hidden_dim, x, h, c
            )
            ce = cross_entropy_rows(self._logits(h), targets[:, t])
            nll = nll + ce * tape.const(mask[:, t])
        return nll


class RnnlmGraph:
    """Tape-bound RNNLM decoder with a fixed zero initial state and no z."""

    def __init__(self, tape: Tape, p: RnnlmParams):
        self.tape = tape
        self.p = p
        self.cfg = p.config
        self.t = {name: tape.param(name, arr) for name, arr in p.named_params().items()}

    def _logits(self, h: Tensor) -> Tensor:
        if self.cfg.tie_embeddings:
            return h.matmul(self.t["embedding.weight"], tb=True) + self.t["output.b"]
        return affine(h, self.t["output.w"], self.t["output.b"])

    def nll_rows(self, inputs: np.ndarray, targets: np.ndarray, lengths: np.ndarray) -> Tensor:
        tape, cfg = self.tape, self.cfg
        batch, width = targets.shape
        mask = _length_mask(lengths, width, np.float64)
        h = tape.const(np.zeros((batch, cfg.hidden_dim)))
        c = tape.const(np.zeros((batch, cfg.hidden_dim)))
        emb = self.t["embedding.weight"]
        nll = tape.const(np.zeros(batch))
        for t in range(width):
            x = emb[inputs[:, t]]
            h, c = lstm_cell_graph(
                self.t["decoder.w"], self.t["decoder.b"], cfg.hidden_dim, x, h, c
            )
            ce = cross_entropy_rows(self._logits(h), targets[:, t])
            nll = nll + ce * tape.const(mask[:, t])
        return nll


def decoder_arrays(
    ids_surface: np.ndarray,
    lengths: np.ndarray,
    direction: str,
    keep_rate: float,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Teacher-forcing (inputs, targets) in model order with word dropout applied."""
    targets = _model_order_ids(ids_surface, lengths, direction)
    inputs = _shift_inputs(targets, lengths)
    inputs = cp.word_dropout_matrix(inputs, keep_rate, rng)
    return inputs, targets


# ---------------------------------------------------------------------------
# public single-sentence operations
# ---------------------------------------------------------------------------


def _check_ids(cfg: ModelConfig, x) -> list[int]:
    ids = list(x)
    if not ids:
        raise ValueError("sequence must be non-empty")
    for i in ids:
        if not 0 <= i < cfg.vocab_size:
            raise ValueError(f"token id {i} out of range for vocabulary of {cfg.vocab_size}")
    return ids


def encode_posterior(params: VaeParams, x) -> GaussianPosterior:
    """Recognition model q(z | x); deterministic given params and x."""
    ids = _check_ids(params.config, x)
    tape = Tape(dtype=params.dtype)
    graph = VaeGraph(tape, params)
    mu, logvar = graph.encode(
        np.asarray([ids], dtype=np.int64), np.asarray([len(ids)], dtype=np.int64)
    )
    return GaussianPosterior(mu.data[0].copy(), logvar.data[0].copy())


def sample_latent(post: GaussianPosterior, eps: np.ndarray) -> np.ndarray:
    """z = mean + exp(log_var / 2) * eps with standard-normal eps."""
    eps = np.asarray(eps)
    if eps.shape != post.mean.shape:
        raise ValueError(f"noise shape {eps.shape} does not match z shape {post.mean.shape}")
    return post.mean + np.exp(0.5 * post.log_var) * eps


def kl_to_standard_normal(post: GaussianPosterior) -> float:
    """Closed-form KL(q || N(0, I)) in nats.

    0.5 * sum(mu^2 + exp(logvar) - 1 - logvar), written with expm1 so the
    result stays non-negative even when logvar underflows the exp rounding.
    """
    mean = np.asarray(post.mean, dtype=np.float64)
    log_var = np.asarray(post.log_var, dtype=np.float64)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_var))):
        raise ValueError("posterior parameters must be finite")
    return float(0.5 * np.sum(mean**2 + (np.expm1(log_var) - log_var)))


def reconstruction_loss(
    params: VaeParams, x, z: np.ndarray, keep_rate: float = 1.0, rng=None
) -> float:
    """-log p(x | z) in nats summed over content tokens + EOS.

    The decode direction from the model config is applied to x before
    scoring; conditioning inputs pass through word dropout at `keep_rate`.
    """
    ids = _check_ids(params.config, x)
    if not 0.0 <= keep_rate <= 1.0:
        raise ValueError(f"keep rate must lie in [0, 1], got {keep_rate}")
    rec = reconstruction_for_latents(
        params, ids, np.asarray(z, dtype=np.float64)[None, :], keep_rate, rng
    )
    return float(rec[0])


def reconstruction_for_latents(
    params: VaeParams, x, latents: np.ndarray, keep_rate: float = 1.0, rng=None
) -> np.ndarray:
    """Reconstruction NLL of one sentence under each row of `latents`."""
    ids = _check_ids(params.config, x)
    n = latents.shape[0]
    ids_mat = np.tile(np.asarray(ids, dtype=np.int64), (n, 1))
    lengths = np.full(n, len(ids), dtype=np.int64)
    inputs, targets = decoder_arrays(
        ids_mat, lengths, params.config.direction, keep_rate, as_generator(rng)
    )
    tape = Tape(dtype=params.dtype)
    graph = VaeGraph(tape, params)
    z = tape.const(latents)
    return graph.decoder_nll_rows(z, inputs, targets, lengths).data.copy()


@dataclass
class ElboResult:
    """Single-sample objective pieces, all in nats per sentence."""

    reconstruction: float
    kl: float
    total: float


def elbo(params: VaeParams, x, w: float, keep_rate: float = 1.0, rng=None) -> ElboResult:
    """Negated variational bound with KL weight w: rec + w * kl.

    At w = 1 (in expectation over the posterior sample) this upper-bounds
    the sentence NLL.
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"KL weight must lie in [0, 1], got {w}")
    rng = as_generator(rng)
    post = encode_posterior(params, x)
    eps = rng.standard_normal(params.config.z_dim)
    z = sample_latent(post, eps)
    rec = reconstruction_loss(params, x, z, keep_rate, rng)
    kl = kl_to_standard_normal(post)
    return ElboResult(rec, kl, rec + w * kl)


def rnnlm_loss(params: RnnlmParams, x, keep_rate: float = 1.0, rng=None) -> float:
    """Exact sentence NLL for the baseline (teacher forcing at keep_rate=1)."""
    ids = _check_ids(params.config, x)
    if not 0.0 <= keep_rate <= 1.0:
        raise ValueError(f"keep rate must lie in [0, 1], got {keep_rate}")
    ids_mat = np.asarray([ids], dtype=np.int64)
    lengths = np.asarray([len(ids)], dtype=np.int64)
    inputs, targets = decoder_arrays(
        ids_mat, lengths, params.config.direction, keep_rate, as_generator(rng)
    )
    tape = Tape(dtype=params.dtype)
    graph = RnnlmGraph(tape, params)
    return float(graph.nll_rows(inputs, targets, lengths).data[0])


# ---------------------------------------------------------------------------
# corpus-level evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalStats:
    """Additive corpus totals (nats) used by training logs and reports."""

    rec_nll: float
    kl: float
    token_count: int
    sentence_count: int

    @property
    def total_nll(self) -> float:
        return self.rec_nll + self.kl

    @property
    def bound_per_token(self) -> float:
        return self.total_nll / self.token_count

    @property
    def kl_per_sentence(self) -> float:
        return self.kl / self.sentence_count

    @property
    def rec_per_sentence(self) -> float:
        return self.rec_nll / self.sentence_count


def default_eval_keep_rate(cfg: ModelConfig) -> float:
    """All words are supplied at test time except in the inputless regime."""
    return 0.0 if cfg.keep_rate == 0.0 else 1.0


def evaluate_model(
    params: ModelParams, dataset, k_eval: float | None = None, batch_size: int = 64
) -> EvalStats:
    """Deterministic corpus totals; VAE reconstruction is scored at z = mean."""
    if not dataset:
        raise ValueError("cannot evaluate on an empty dataset")
    cfg = params.config
    if k_eval is None:
        k_eval = default_eval_keep_rate(cfg)
    # fractional eval keep rates are off-contract but supported reproducibly
    drop_rng = substream(0, "eval-dropout") if 0.0 < k_eval < 1.0 else None
    rec_total = 0.0
    kl_total = 0.0
    tokens = 0
    for batch in cp.iter_batches(dataset, batch_size, direction="l2r"):
        inputs, targets = decoder_arrays(
            batch.ids, batch.lengths, cfg.direction, k_eval, drop_rng
        )
        tape = Tape(dtype=params.dtype)
        if isinstance(params, VaeParams):
            graph = VaeGraph(tape, params)
            mu, logvar = graph.encode(batch.ids, batch.lengths)
            rec = graph.decoder_nll_rows(mu, inputs, targets, batch.lengths)
            kl_total += float(graph.kl_rows(mu, logvar).sum().data)
        else:
            graph = RnnlmGraph(tape, params)
            rec = graph.nll_rows(inputs, targets, batch.lengths)
        rec_total += float(rec.sum().data)
        tokens += int(batch.lengths.sum())
    return EvalStats(rec_total, kl_total, tokens, len(dataset))


@dataclass
class PerplexityReport:
    """Corpus negative log likelihood in nats and the derived perplexity.

    For the VAE the NLL is the w=1 bound (mean-decode reconstruction plus
    closed-form KL); for the RNNLM it is the exact likelihood.  Both a
    per-token and a per-sentence view are reported.
    """

    total_nll: float
    token_count: int
    sentence_count: int
    perplexity: float
    nll_per_token: float
    nll_per_sentence: float
    reconstruction_nll: float
    kl: float


def perplexity_from_nll(total_nll: float, token_count: int) -> float:
    """exp(total_nll / token_count); tokens are counted including EOS."""
    if token_count < 1:
        raise ValueError("token count must be positive")
    return float(np.exp(total_nll / token_count))


def corpus_nll_and_perplexity(
    params: ModelParams, dataset, k_eval: float | None = None, batch_size: int = 64
) -> PerplexityReport:
    stats = evaluate_model(params, dataset, k_eval=k_eval, batch_size=batch_size)
    return PerplexityReport(
        total_nll=stats.total_nll,
        token_count=stats.token_count,
        sentence_count=stats.sentence_count,
        perplexity=perplexity_from_nll(stats.total_nll, stats.token_count),
        nll_per_token=stats.total_nll / stats.token_count,
        nll_per_sentence=stats.total_nll / stats.sentence_count,
        reconstruction_nll=stats.rec_nll,
        kl=stats.kl,
    )


# ---------------------------------------------------------------------------
# decode sessions (numpy, per hypothesis) for the search module
# ---------------------------------------------------------------------------


class DecodeSession:
    """Step-wise decoder view shared by both model families.

    `step` consumes the previous token id (SOS first) and returns the
    log-probability vector over the vocabulary plus the successor state.
    Pure given frozen params, so decode jobs can run concurrently.
    """

    def __init__(self, params: ModelParams, z: np.ndarray | None):
        cfg = params.config
        if isinstance(params, VaeParams):
            if z is None:
                raise ValueError("the VAE decoder needs a latent vector z")
            z = np.asarray(z, dtype=np.float64)
            if z.shape != (cfg.z_dim,):
                raise ValueError(f"z has shape {z.shape}, expected ({cfg.z_dim},)")
            hc = z @ params.init_w.astype(np.float64) + params.init_b.astype(np.float64)
            h0 = np.tanh(hc[: cfg.hidden_dim])
            c0 = hc[cfg.hidden_dim :]
        else:
            if z is not None:
                raise ValueError("the RNNLM decoder does not condition on z")
            h0 = np.zeros(cfg.hidden_dim)
            c0 = np.zeros(cfg.hidden_dim)
        self.params = params
        self.cfg = cfg
        self.z = z
        self.vocab_size = cfg.vocab_size
        self.direction = cfg.direction
        self._start = LstmState(h0, c0)
        self._emb = params.embedding.weight.astype(np.float64)
        self._cell = LstmCellParams(
            params.decoder.input_dim,
            params.decoder.hidden_dim,
            params.decoder.w.astype(np.float64),
            params.decoder.b.astype(np.float64),
        )
        if cfg.tie_embeddings:
            self._out_w = self._emb.T
        else:
            self._out_w = params.out_w.astype(np.float64)
        self._out_b = params.out_b.astype(np.float64)

    def start(self) -> LstmState:
        return self._start

    def step(self, state: LstmState, token_id: int) -> tuple[np.ndarray, LstmState]:
        if self.cfg.keep_rate == 0.0 and token_id != cp.SOS:
            token_id = cp.UNK  # inputless decoders never see real history
        x = self._emb[token_id]
        if self.cfg.concat_z_to_input:
            x = np.concatenate([x, self.z])
        new = lstm_step(self._cell, state, x)
        logits = new.h @ self._out_w + self._out_b
        return log_softmax_np(logits), new


def decode_session(params: ModelParams, z: np.ndarray | None = None) -> DecodeSession:
    return DecodeSession(params, z)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, params: ModelParams) -> None:
    """Write header, kind tag, config, then each array as
    '<I' element count + 32-bit little-endian values, in declaration order."""
    with open(path, "wb") as f:
        f.write((CKPT_MAGIC + "\n").encode("utf-8"))
        f.write((params.kind + "\n").encode("utf-8"))
        f.write((json.dumps(asdict(params.config), sort_keys=True) + "\n").encode("utf-8"))
        for arr in params.named_params().values():
            flat = np.ascontiguousarray(arr, dtype="<f4").reshape(-1)
            f.write(struct.pack("<I", flat.size))
            f.write(flat.tobytes())


def _read_array(f: io.BufferedReader, shape: tuple[int, ...]) -> np.ndarray:
    (count,) = struct.unpack("<I", f.read(4))
    expected = int(np.prod(shape)) if shape else 1
    if count != expected:
        raise ValueError(f"checkpoint array has {count} values, expected {expected}")
    data = np.frombuffer(f.read(4 * count), dtype="<f4").astype(np.float32)
    return data.reshape(shape)


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as f:
        if f.readline().decode("utf-8").rstrip("\n") != CKPT_MAGIC:
            raise ValueError("not a sentvae checkpoint")
        kind = f.readline().decode("utf-8").rstrip("\n")
        if kind not in ("vae", "rnnlm"):
            raise ValueError(f"unknown model kind {kind!r}")
        cfg = ModelConfig(**json.loads(f.readline().decode("utf-8")))
        template = (
            init_vae_params(cfg, rng=0) if kind == "vae" else init_rnnlm_params(cfg, rng=0)
        )
        for name, arr in template.named_params().items():
            arr[...] = _read_array(f, arr.shape)
        if f.read(1):
            raise ValueError("trailing bytes after checkpoint payload")
    return template
