"""Training loops for both model families.

The VAE objective weights its KL term by an annealing schedule that ramps
from 0 to 1, which walks the model from a plain autoencoder toward the
true variational bound; dev-set metrics are always computed at weight 1.
One training run is single-writer over its parameters; seed sweeps are
independent runs.

TrainingLog CSV columns (and units):

    step,train_rec,train_kl,dev_rec,dev_kl,dev_bound,w

train_rec/train_kl/dev_rec/dev_kl are nats per sentence; dev_bound is
nats per token (the RNNLM's exact NLL, or the VAE's weight-1 bound).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import corpus as cp
from .autodiff import OptimizerState, Tape, forward_backward, optimizer_step
from .model import (
    EvalStats,
    ModelConfig,
    ModelParams,
    RnnlmGraph,
    VaeGraph,
    decoder_arrays,
    default_eval_keep_rate,
    evaluate_model,
    init_rnnlm_params,
    init_vae_params,
)
from .util import substream


@dataclass(frozen=True)
class AnnealingSchedule:
    """KL weight as a function of the step counter; non-decreasing in [0, 1].

    sigmoid: 1 / (1 + exp(-(step - midpoint) / tau))
    linear:  clamp(step / ramp, 0, 1)
    constant: value
    """

    kind: str = "sigmoid"
    midpoint: float = 500.0
    tau: float = 50.0
    ramp: int = 1000
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sigmoid", "linear", "constant"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "sigmoid" and self.tau <= 0:
            raise ValueError("sigmoid schedules need tau > 0")
        if self.kind == "linear" and self.ramp < 1:
            raise ValueError("linear schedules need ramp >= 1")
        if self.kind == "constant" and not 0.0 <= self.value <= 1.0:
            raise ValueError("constant weight must lie in [0, 1]")

    @classmethod
    def default_for(cls, max_steps: int) -> "AnnealingSchedule":
        """Sigmoid with the midpoint a quarter of the way in; reaches
        1 - 1e-6 well before max_steps (midpoint + 14 tau)."""
        return cls(kind="sigmoid", midpoint=0.25 * max_steps, tau=max_steps / 40.0)


def annealing_weight(sched: AnnealingSchedule, step: int) -> float:
    if step < 0:
        raise ValueError("step must be non-negative")
    if sched.kind == "constant":
        return sched.value
    if sched.kind == "linear":
        return min(max(step / sched.ramp, 0.0), 1.0)
    x = (step - sched.midpoint) / sched.tau
    return 0.5 * (1.0 + math.tanh(0.5 * x))  # logistic, stable for any x


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings shared by the two model kinds.

    keep_rate None means "use the model config's rate".  The schedule only
    affects VAE runs; dev evaluation ignores it.
    """

    optimizer: str = "adam"
    lr: float = 1e-3
    batch_size: int = 32
    max_steps: int = 2000
    eval_interval: int = 100
    patience: int = 10
    keep_rate: float | None = None
    schedule: AnnealingSchedule | None = None
    clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self):
        for name in ("batch_size", "max_steps", "eval_interval", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.keep_rate is not None and not 0.0 <= self.keep_rate <= 1.0:
            raise ValueError("keep_rate must lie in [0, 1]")

    def resolved_schedule(self) -> AnnealingSchedule:
        return self.schedule or AnnealingSchedule.default_for(self.max_steps)


@dataclass
class LogRecord:
    step: int
    train_rec: float
    train_kl: float
    dev_rec: float
    dev_kl: float
    dev_bound: float
    w: float


@dataclass
class TrainingLog:
    records: list[LogRecord] = field(default_factory=list)

    CSV_HEADER = "step,train_rec,train_kl,dev_rec,dev_kl,dev_bound,w"

    def append(self, rec: LogRecord) -> None:
        if self.records and rec.step <= self.records[-1].step:
            raise ValueError("log steps must be strictly increasing")
        values = (rec.train_rec, rec.train_kl, rec.dev_rec, rec.dev_kl, rec.dev_bound, rec.w)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite value in log record at step {rec.step}")
        self.records.append(rec)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.CSV_HEADER + "\n")
            for r in self.records:
                f.write(
                    f"{r.step},{r.train_rec!r},{r.train_kl!r},{r.dev_rec!r},"
                    f"{r.dev_kl!r},{r.dev_bound!r},{r.w!r}\n"
                )

    @classmethod
    def from_csv(cls, path) -> "TrainingLog":
        log = cls()
        with open(path, encoding="utf-8") as f:
            if f.readline().rstrip("\n") != cls.CSV_HEADER:
                raise ValueError("not a training log CSV")
            for line in f:
                step, *vals = line.rstrip("\n").split(",")
                log.append(LogRecord(int(step), *(float(v) for v in vals)))
        return log


@dataclass
class TrainResult:
    params: ModelParams  # best checkpoint by dev bound
    log: TrainingLog
    best_step: int
    best_dev_bound: float
    final_params: ModelParams
    stopped_early: bool


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place to a global norm of at most max_norm."""
    total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def _init_params(model_kind: str, model_cfg: ModelConfig, rng, dtype):
    if model_kind == "vae":
        return init_vae_params(model_cfg, rng, dtype)
    if model_kind == "rnnlm":
        return init_rnnlm_params(model_cfg, rng, dtype)
    raise ValueError(f"unknown model kind {model_kind!r}")


def train(
    model_kind: str,
    train_data,
    dev_data,
    model_cfg: ModelConfig,
    cfg: TrainConfig = TrainConfig(),
    dtype=np.float32,
) -> TrainResult:
    """Mini-batch training, fully reproducible from cfg.seed.

    Each VAE step uses one posterior sample at the scheduled KL weight; dev
    metrics always use weight 1 (and the mean decode).  The best
    checkpoint is the params with the lowest dev bound; training stops at
    max_steps or after `patience` evals without improvement.
    """
    if not train_data or not dev_data:
        raise ValueError("train and dev sets must be non-empty")
    rng_init = substream(cfg.seed, "init")
    rng_train = substream(cfg.seed, "train")
    rng_drop = substream(cfg.seed, "dropout")
    params = _init_params(model_kind, model_cfg, rng_init, dtype)
    arrays = params.named_params()
    opt = OptimizerState(kind=cfg.optimizer, lr=cfg.lr)
    sched = cfg.resolved_schedule()
    keep_rate = model_cfg.keep_rate if cfg.keep_rate is None else cfg.keep_rate
    k_eval = default_eval_keep_rate(replace(model_cfg, keep_rate=keep_rate))

    log = TrainingLog()
    best = copy.deepcopy(params)
    best_bound = math.inf
    best_step = 0
    since_best = 0
    stopped_early = False
    interval_rec = 0.0
    interval_kl = 0.0
    interval_sentences = 0

    step = 0
    batches = iter(())
    while step < cfg.max_steps:
        batch = next(batches, None)
        if batch is None:
            batches = cp.iter_batches(train_data, cfg.batch_size, "l2r", rng=rng_train)
            batch = next(batches)
        step += 1
        w = annealing_weight(sched, step)
        inputs, targets = decoder_arrays(
            batch.ids, batch.lengths, model_cfg.direction, keep_rate, rng_drop
        )
        tape = Tape(dtype=dtype)
        try:
            if model_kind == "vae":
                graph = VaeGraph(tape, params)
                mu, logvar = graph.encode(batch.ids, batch.lengths)
                eps = rng_train.standard_normal((batch.size, model_cfg.z_dim))
                z = graph.sample_latent(mu, logvar, eps)
                rec = graph.decoder_nll_rows(z, inputs, targets, batch.lengths)
                kl = graph.kl_rows(mu, logvar)
                loss = (rec + kl * w).sum() * (1.0 / batch.size)
                batch_rec = float(rec.sum().data)
                batch_kl = float(kl.sum().data)
            else:
                graph = RnnlmGraph(tape, params)
                rec = graph.nll_rows(inputs, targets, batch.lengths)
                loss = rec.sum() * (1.0 / batch.size)
                batch_rec = float(rec.sum().data)
                batch_kl = 0.0
            grads = forward_backward(tape, loss)
        except FloatingPointError as exc:
            raise RuntimeError(
                f"non-finite loss at step {step} (kind={model_kind}, w={w:.4f}): {exc}"
            ) from exc
        clip_gradients(grads, cfg.clip_norm)
        optimizer_step(opt, arrays, grads)
        interval_rec += batch_rec
        interval_kl += batch_kl
        interval_sentences += batch.size

        if step % cfg.eval_interval == 0 or step == cfg.max_steps:
            dev = evaluate_model(params, dev_data, k_eval=k_eval)
            log.append(
                LogRecord(
                    step=step,
                    train_rec=interval_rec / interval_sentences,
                    train_kl=interval_kl / interval_sentences,
                    dev_rec=dev.rec_per_sentence,
                    dev_kl=dev.kl_per_sentence,
                    dev_bound=dev.bound_per_token,
                    w=w,
                )
            )
            interval_rec = interval_kl = 0.0
            interval_sentences = 0
            if dev.bound_per_token < best_bound:
                best_bound = dev.bound_per_token
                best = copy.deepcopy(params)
                best_step = step
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    stopped_early = True
                    break
    return TrainResult(
        params=best,
        log=log,
        best_step=best_step,
        best_dev_bound=best_bound,
        final_params=params,
        stopped_early=stopped_early,
    )


@dataclass
class KlTrajectory:
    """Aligned series for plotting, plus the spike-drop-rise flag.

    The flag is true when the (unweighted) KL spiked while the weight was
    still low (max before w reaches 0.5 exceeds twice the KL at the w~1
    crossing) and then rose again: final KL at least 1.2x the trough.  The
    trough is the minimum over evals with w >= 0.5, since the drop bottoms
    out as the full penalty arrives, which may be just before w ~ 1.
    """

    steps: list[int]
    weights: list[float]
    kl_values: list[float]
    pattern: bool


def kl_trajectory_report(log: TrainingLog) -> KlTrajectory:
    if not log.records:
        raise ValueError("empty training log")
    steps = [r.step for r in log.records]
    weights = [r.w for r in log.records]
    kls = [r.train_kl for r in log.records]
    before_half = [k for k, w in zip(kls, weights) if w < 0.5]
    after_half = [k for k, w in zip(kls, weights) if w >= 0.5]
    after_one = [k for k, w in zip(kls, weights) if w >= 0.999]
    pattern = False
    if before_half and after_one:
        spike = max(before_half)
        at_crossing = after_one[0]
        trough = min(after_half)
        final = kls[-1]
        pattern = spike > 2.0 * at_crossing and final >= 1.2 * trough and final > trough
    return KlTrajectory(steps, weights, kls, pattern)
