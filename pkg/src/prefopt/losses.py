"""Closed-form preference losses and their exact partial derivatives.

Three pairwise objectives over a preference pair (chosen, rejected), all
built from the implicit rewards

    h_w = log pi_theta(y_w|x) - log pi_ref(y_w|x)   (rewards/chosen)
    h_l = log pi_theta(y_l|x) - log pi_ref(y_l|x)   (rewards/reject)
    margin = h_w - h_l

and a logistic link:

    dpo:      loss = -log sigma(beta * margin)
    dpop:     loss = -log sigma(beta * margin - beta * lam * max(0, -h_w))
    minordpo: loss = -log sigma(beta * h_w - beta * max(0, h_l))

Every loss returns its value together with the analytic partials with
respect to the two trainable sequence log-probabilities, so callers can
chain into a policy gradient without autodiff. The reward values are
reported beta-free so runs with different beta stay comparable.

Subgradient convention at the clamp boundaries: the max(0, .) terms are
inactive at exactly 0, so dpop at h_w == 0 and minordpo at h_l == 0
reduce to plain dpo behaviour on that side.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidSpecError

__all__ = [
    "Method",
    "LogProbQuad",
    "RewardTriple",
    "LossSpec",
    "LossGrad",
    "reward_triple",
    "log_sigmoid",
    "sigmoid",
    "dpo_coefficient",
    "dpo_loss",
    "dpop_loss",
    "minor_dpo_loss",
    "loss_grad",
    "batch_loss_terms",
]


class Method(enum.Enum):
    """Selectable preference objective."""

    DPO = "dpo"
    DPOP = "dpop"
    MINOR_DPO = "minordpo"

    @classmethod
    def parse(cls, name: str) -> "Method":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise InvalidSpecError(f"unknown method {name!r}; expected one of: {valid}")


@dataclass(frozen=True)
class LogProbQuad:
    """The four sequence log-probabilities a pairwise loss consumes.

    All values are natural-log sums of per-token categorical
    probabilities, hence finite and <= 0.
    """

    lp_theta_chosen: float
    lp_theta_rejected: float
    lp_ref_chosen: float
    lp_ref_rejected: float

    def __post_init__(self):
        for name in ("lp_theta_chosen", "lp_theta_rejected", "lp_ref_chosen", "lp_ref_rejected"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidInputError(f"{name} must be finite, got {v!r}")
            if v > 0.0:
                raise InvalidInputError(f"{name} must be <= 0 (a log-probability), got {v!r}")


@dataclass(frozen=True)
class RewardTriple:
    """Beta-free implicit rewards: chosen, reject and their margin."""

    chosen: float
    reject: float
    margin: float


@dataclass(frozen=True)
class LossSpec:
    """Objective selector plus its hyper-parameters.

    `lam` weights the dpop compensation term and is meaningful only for
    Method.DPOP; for the other methods a provided value is ignored (see
    `lam_ignored`).
    """

    method: Method
    beta: float
    lam: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise InvalidSpecError(f"beta must be finite and > 0, got {self.beta!r}")
        if self.lam is not None and not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise InvalidSpecError(f"lambda must be finite and >= 0, got {self.lam!r}")
        if self.method is Method.DPOP and self.lam is None:
            raise InvalidSpecError("dpop requires lambda")

    @property
    def lam_ignored(self) -> bool:
        """True when a lambda was supplied but the method does not use it."""
        return self.method is not Method.DPOP and self.lam is not None

    def describe(self) -> str:
        s = f"{self.method.value}(beta={self.beta:g}"
        if self.method is Method.DPOP:
            s += f", lambda={self.lam:g}"
        elif self.lam is not None:
            s += f", lambda={self.lam:g} ignored"
        return s + ")"


@dataclass(frozen=True)
class LossGrad:
    """Per-sample loss value and partials w.r.t. the trainable log-probs.

    For all three objectives: loss >= 0, the chosen-side partial is <= 0
    (chosen is never pushed down) and the rejected-side partial is >= 0
    (rejected is never pushed up).
    """

    loss: float
    d_lp_theta_chosen: float
    d_lp_theta_rejected: float


def reward_triple(q: LogProbQuad) -> RewardTriple:
    """Beta-free rewards of a preference pair: the two policy/reference
    log-ratios and their difference."""
    chosen = q.lp_theta_chosen - q.lp_ref_chosen
    reject = q.lp_theta_rejected - q.lp_ref_rejected
    return RewardTriple(chosen=chosen, reject=reject, margin=chosen - reject)


def log_sigmoid(x):
    """log sigma(x) = -softplus(-x), overflow-free for |x| up to 1e4.

    Accepts scalars or arrays; the result is always <= 0.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("log_sigmoid requires finite input")
    out = np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))
    return float(out) if out.ndim == 0 else out


def sigmoid(x):
    """Numerically stable logistic function for scalars or arrays."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if out.ndim == 0 else out


def dpo_coefficient(beta: float, margin) -> float:
    """Per-sample gradient scale beta * sigma(-beta * margin).

    Strictly positive, and strictly decreasing in the margin for fixed
    beta: low-margin samples get the large updates.
    """
    if not (math.isfinite(beta) and beta > 0.0):
        raise InvalidSpecError(f"beta must be finite and > 0, got {beta!r}")
    margin = np.asarray(margin, dtype=np.float64)
    if not np.all(np.isfinite(margin)):
        raise InvalidInputError("margin must be finite")
    out = np.asarray(beta * sigmoid(-(beta * margin)))
    return float(out) if out.ndim == 0 else out


def batch_loss_terms(h_w, h_l, spec: LossSpec):
    """Vectorized core shared by the scalar ops and the trainer.

    Takes arrays of beta-free rewards (h_w = rewards/chosen,
    h_l = rewards/reject) and returns (loss, d_chosen, d_rejected)
    arrays of the same shape.
    """
    h_w = np.asarray(h_w, dtype=np.float64)
    h_l = np.asarray(h_l, dtype=np.float64)
    if not (np.all(np.isfinite(h_w)) and np.all(np.isfinite(h_l))):
        raise InvalidInputError("rewards must be finite")
    beta = spec.beta

    if spec.method is Method.DPO:
        z = beta * (h_w - h_l)
        s = sigmoid(-z)
        loss = -log_sigmoid(z)
        d_c = -(s * beta)
        d_r = s * beta
    elif spec.method is Method.DPOP:
        # z written as beta*margin minus the clamp term so that an
        # inactive clamp (h_w >= 0) reproduces the dpo floats bit-for-bit.
        z = beta * (h_w - h_l) - beta * (spec.lam * np.maximum(0.0, -h_w))
        s = sigmoid(-z)
        loss = -log_sigmoid(z)
        scale = beta * (1.0 + spec.lam * (h_w < 0.0))
        d_c = -(s * scale)
        d_r = s * beta
    elif spec.method is Method.MINOR_DPO:
        z = beta * h_w - beta * np.maximum(0.0, h_l)
        s = sigmoid(-z)
        loss = -log_sigmoid(z)
        d_c = -(s * beta)
        d_r = s * beta * (h_l > 0.0)
    else:  # pragma: no cover
        raise InvalidSpecError(f"unhandled method {spec.method!r}")
    return loss, d_c, d_r


def _scalar_loss(q: LogProbQuad, spec: LossSpec) -> LossGrad:
    r = reward_triple(q)
    loss, d_c, d_r = batch_loss_terms(r.chosen, r.reject, spec)
    return LossGrad(loss=float(loss), d_lp_theta_chosen=float(d_c), d_lp_theta_rejected=float(d_r))


def dpo_loss(q: LogProbQuad, spec: LossSpec) -> LossGrad:
    """Logistic loss on beta * margin.

    The two partials are exact negatives of each other, and the
    chosen-side partial equals -dpo_coefficient(beta, margin) exactly.
    """
    if spec.method is not Method.DPO:
        raise InvalidSpecError(f"dpo_loss requires method dpo, got {spec.method.value}")
    return _scalar_loss(q, spec)


def dpop_loss(q: LogProbQuad, spec: LossSpec) -> LossGrad:
    """Dpo plus a lambda-weighted penalty when the chosen log-ratio drops
    below zero; identical to dpo whenever rewards/chosen >= 0."""
    if spec.method is not Method.DPOP:
        raise InvalidSpecError(f"dpop_loss requires method dpop, got {spec.method.value}")
    return _scalar_loss(q, spec)


def minor_dpo_loss(q: LogProbQuad, spec: LossSpec) -> LossGrad:
    """Dpo with the rejected-side log-ratio clamped at zero inside the
    link, which stops all descent on rejected samples already at or below
    the reference."""
    if spec.method is not Method.MINOR_DPO:
        raise InvalidSpecError(f"minor_dpo_loss requires method minordpo, got {spec.method.value}")
    return _scalar_loss(q, spec)


def loss_grad(q: LogProbQuad, spec: LossSpec) -> LossGrad:
    """Dispatch on spec.method."""
    return _scalar_loss(q, spec)
