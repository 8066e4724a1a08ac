"""Mini-batch preference optimization with per-step reward metrics.

The loop mirrors the usual fine-tuning recipe at desk scale: seeded
per-epoch shuffling, batch-averaged gradients, a linear warmup followed
by linear decay to zero, and an Adam-style optimizer (plain SGD is
selectable for gradient-check-friendly runs). No gradient clipping:
clipping would mask the very over-penalty dynamics this lab exists to
observe.

Rewards in the metrics are beta-free log-ratios against the frozen
reference, so runs with different beta stay comparable; the logged loss
has beta applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidInputError,
    InvalidSpecError,
    NumericalAbort,
    SequenceLengthError,
    TokenRangeError,
)
from .losses import LossSpec, RewardTriple, batch_loss_terms
from .policy import batch_backward, batch_log_probs

METRICS_HEADER = "step,lr,loss,rewards_chosen,rewards_reject,rewards_margin,margin_positive_frac,grad_norm"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    loss_spec: LossSpec
    learning_rate: float
    batch_size: int = 32
    epochs: int = 1
    warmup_ratio: float = 0.1
    seed: int = 0
    log_every: int = 1
    optimizer: str = "adam"

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InvalidSpecError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if self.batch_size < 1 or self.epochs < 1 or self.log_every < 1:
            raise InvalidSpecError("batch_size, epochs and log_every must be >= 1")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise InvalidSpecError(f"warmup_ratio must be in [0, 1], got {self.warmup_ratio!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise InvalidSpecError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


@dataclass(frozen=True)
class MetricsRow:
    step: int
    lr: float
    loss: float
    rewards_chosen_mean: float
    rewards_reject_mean: float
    rewards_margin_mean: float
    margin_positive_frac: float
    grad_norm: float

    def csv(self) -> str:
        vals = [
            str(self.step),
            f"{self.lr:.9g}",
            f"{self.loss:.9g}",
            f"{self.rewards_chosen_mean:.9g}",
            f"{self.rewards_reject_mean:.9g}",
            f"{self.rewards_margin_mean:.9g}",
            f"{self.margin_positive_frac:.9g}",
            f"{self.grad_norm:.9g}",
        ]
        return ",".join(vals)


def total_steps(n_examples: int, config: TrainConfig) -> int:
    return math.ceil(n_examples / config.batch_size) * config.epochs


def lr_at(step: int, n_steps: int, peak: float, warmup_ratio: float) -> float:
    """Linear 0 -> peak over the warmup span, then linear decay to 0."""
    warmup = int(warmup_ratio * n_steps)
    if step < warmup:
        return peak * step / warmup
    if n_steps == warmup:
        return peak
    return peak * (n_steps - step) / (n_steps - warmup)


def stack_examples(examples, model_config):
    """Validate a dataset against a model and stack it into index arrays.

    Requires uniform prompt and completion lengths (the generator always
    produces them); raises the deferred token-range and length errors
    here, at training time.
    """
    if not examples:
        raise InvalidInputError("dataset is empty")
    p_len = len(examples[0].prompt)
    c_len = len(examples[0].chosen)
    for i, ex in enumerate(examples):
        if len(ex.prompt) != p_len or len(ex.chosen) != c_len or len(ex.rejected) != c_len:
            raise InvalidInputError(
                f"example {i}: ragged lengths; this trainer requires uniform "
                f"prompt/completion lengths"
            )
    prompts = np.asarray([ex.prompt for ex in examples], dtype=np.int64)
    chosen = np.asarray([ex.chosen for ex in examples], dtype=np.int64)
    rejected = np.asarray([ex.rejected for ex in examples], dtype=np.int64)
    v = model_config.vocab_size
    for name, arr in (("prompt", prompts), ("chosen", chosen), ("rejected", rejected)):
        if arr.min() < 0 or arr.max() >= v:
            bad = int(np.argwhere((arr < 0) | (arr >= v))[0][0])
            raise TokenRangeError(f"example {bad}: {name} token outside vocabulary of size {v}")
    if p_len + c_len > model_config.context_len:
        raise SequenceLengthError(
            f"prompt+completion length {p_len + c_len} exceeds "
            f"context_len {model_config.context_len}"
        )
    return prompts, chosen, rejected


class _Adam:
    def __init__(self, n: int):
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def update(self, params: np.ndarray, grad: np.ndarray, lr: float) -> None:
        self.t += 1
        self.m = ADAM_BETA1 * self.m + (1.0 - ADAM_BETA1) * grad
        self.v = ADAM_BETA2 * self.v + (1.0 - ADAM_BETA2) * grad * grad
        m_hat = self.m / (1.0 - ADAM_BETA1**self.t)
        v_hat = self.v / (1.0 - ADAM_BETA2**self.t)
        params -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


class _Sgd:
    def __init__(self, n: int):
        pass

    def update(self, params, grad, lr) -> None:
        params -= lr * grad


def train(model, ref, data, config: TrainConfig):
    """Optimize the model in place; returns (model, metrics rows).

    Aborts with NumericalAbort (carrying the step, the offending example
    index and the metrics so far) on any non-finite loss, gradient or
    parameter.
    """
    prompts, chosen, rejected = stack_examples(data, model.config)
    n = prompts.shape[0]
    n_steps = total_steps(n, config)
    rng = np.random.default_rng(config.seed)
    opt = (_Adam if config.optimizer == "adam" else _Sgd)(model.params.size)
    spec = config.loss_spec

    metrics: list[MetricsRow] = []
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            bp, bc, br = prompts[idx], chosen[idx], rejected[idx]

            lp_w, cache_w = batch_log_probs(model, bp, bc)
            lp_l, cache_l = batch_log_probs(model, bp, br)
            rp_w, _ = batch_log_probs(ref, bp, bc)
            rp_l, _ = batch_log_probs(ref, bp, br)
            h_w = lp_w - rp_w
            h_l = lp_l - rp_l
            finite = np.isfinite(h_w) & np.isfinite(h_l)
            if not finite.all():
                bad = int(idx[np.argmin(finite)])
                raise NumericalAbort("non-finite log-probability", step, bad, metrics)

            loss_vec, d_c, d_r = batch_loss_terms(h_w, h_l, spec)
            if not np.all(np.isfinite(loss_vec)):
                bad = int(idx[np.argmin(np.isfinite(loss_vec))])
                raise NumericalAbort("non-finite loss", step, bad, metrics)

            b = idx.size
            grad = batch_backward(model, cache_w, d_c) + batch_backward(model, cache_l, d_r)
            grad /= b
            if not np.all(np.isfinite(grad)):
                raise NumericalAbort("non-finite gradient", step, -1, metrics)

            lr = lr_at(step, n_steps, config.learning_rate, config.warmup_ratio)
            if step % config.log_every == 0 or step == n_steps - 1:
                margin = h_w - h_l
                metrics.append(
                    MetricsRow(
                        step=step,
                        lr=lr,
                        loss=float(loss_vec.mean()),
                        rewards_chosen_mean=float(h_w.mean()),
                        rewards_reject_mean=float(h_l.mean()),
                        rewards_margin_mean=float(margin.mean()),
                        margin_positive_frac=float((margin > 0).mean()),
                        grad_norm=float(np.linalg.norm(grad)),
                    )
                )

            opt.update(model.params, grad, lr)
            if not np.all(np.isfinite(model.params)):
                raise NumericalAbort("non-finite parameter after update", step, -1, metrics)
            step += 1
    return model, metrics


def evaluate_rewards(model, ref, data):
    """(mean RewardTriple, per-example triples). Never mutates anything."""
    prompts, chosen, rejected = stack_examples(data, model.config)
    lp_w, _ = batch_log_probs(model, prompts, chosen)
    lp_l, _ = batch_log_probs(model, prompts, rejected)
    rp_w, _ = batch_log_probs(ref, prompts, chosen)
    rp_l, _ = batch_log_probs(ref, prompts, rejected)
    h_w = lp_w - rp_w
    h_l = lp_l - rp_l
    per_example = [
        RewardTriple(chosen=float(w), reject=float(l), margin=float(w) - float(l))
        for w, l in zip(h_w, h_l)
    ]
    mean = RewardTriple(
        chosen=float(h_w.mean()),
        reject=float(h_l.mean()),
        margin=float(h_w.mean() - h_l.mean()),
    )
    return mean, per_example


def train_supervised(model, data, learning_rate: float, epochs: int,
                     batch_size: int = 32, seed: int = 0) -> list[tuple[int, float, float]]:
    """Cross-entropy training on the chosen completions only.

    The harness uses this to build a competent base model before
    preference optimization, and as the learnability sanity baseline.
    Returns (step, lr, mean per-token loss) tuples.
    """
    prompts, chosen, _ = stack_examples(data, model.config)
    n = prompts.shape[0]
    c_len = chosen.shape[1]
    n_steps = math.ceil(n / batch_size) * epochs
    rng = np.random.default_rng(seed)
    opt = _Adam(model.params.size)
    rows = []
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            lp, cache = batch_log_probs(model, prompts[idx], chosen[idx])
            b = idx.size
            loss = float(-lp.sum() / (b * c_len))
            coef = np.full(b, -1.0 / (b * c_len))
            grad = batch_backward(model, cache, coef)
            if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
                raise NumericalAbort("non-finite supervised loss/gradient", step, -1)
            lr = lr_at(step, n_steps, learning_rate, 0.0)
            rows.append((step, lr, loss))
            opt.update(model.params, grad, lr)
            step += 1
    return rows


def write_metrics_csv(rows, path) -> None:
    """Deterministic CSV, 9 significant digits per float."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(METRICS_HEADER + "\n")
        for row in rows:
            f.write(row.csv() + "\n")
