"""Tiny trainable autoregressive categorical sequence model.

Architecture (shared-parameter mode, the one used for training):

    x_t = tok_emb[token_t] + pos_emb[t]          token + position embedding
    h_t = tanh(x_t @ w1 + b1)                    hidden layer
    z_t = h_t @ w2 + b2                          next-token logits
    p(. | token_t, t) = softmax(z_t)

The model is Markov in (previous token, position): the logits for the
token at index i depend only on the token at index i-1 and on i-1
itself. All parameters live in one flat float64 vector; the named
weights are views into it, so optimizers can treat the model as a plain
vector. Parameter count:

    V*D + C*D + D*H + H + H*V + V

with V = vocab_size, C = context_len, D = embed_dim, H = hidden_dim.

A second, tabular mode keeps an independent logit row per
(previous token, position) pair. Its gradients are analytically
transparent, which is what the finite-difference oracle tests want; it
is never used for training.

All forward/backward math is float64, and log-softmax uses the
max-subtraction trick throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidConfigError,
    InvalidInputError,
    SequenceLengthError,
    TokenRangeError,
)
from .losses import LossGrad

CHECKPOINT_MAGIC = b"PREFOPT-CKPT v1\n"


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and init seed of the shared-parameter model."""

    vocab_size: int
    context_len: int
    embed_dim: int
    hidden_dim: int
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 4:
            raise InvalidConfigError(f"vocab_size must be >= 4, got {self.vocab_size}")
        if self.context_len < 2:
            raise InvalidConfigError(f"context_len must be >= 2, got {self.context_len}")
        if self.embed_dim < 4:
            raise InvalidConfigError(f"embed_dim must be >= 4, got {self.embed_dim}")
        if self.hidden_dim < 4:
            raise InvalidConfigError(f"hidden_dim must be >= 4, got {self.hidden_dim}")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidConfigError(f"seed must be a uint64, got {self.seed}")


@dataclass(frozen=True)
class TabularConfig:
    """Dimensions of the gradcheck-only tabular model."""

    vocab_size: int
    context_len: int
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise InvalidConfigError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.context_len < 2:
            raise InvalidConfigError(f"context_len must be >= 2, got {self.context_len}")


def param_count(config) -> int:
    """Closed-form parameter count for either model kind."""
    if isinstance(config, ModelConfig):
        v, c, d, h = config.vocab_size, config.context_len, config.embed_dim, config.hidden_dim
        return v * d + c * d + d * h + h + h * v + v
    if isinstance(config, TabularConfig):
        return config.vocab_size * config.context_len * config.vocab_size
    raise InvalidConfigError(f"unknown config type {type(config).__name__}")


class SequenceModel:
    """Shared-parameter policy; params is the single source of truth."""

    def __init__(self, config: ModelConfig, params: np.ndarray):
        if params.shape != (param_count(config),) or params.dtype != np.float64:
            raise InvalidConfigError(
                f"params must be a float64 vector of length {param_count(config)}"
            )
        self.config = config
        self.params = params
        v, c, d, h = config.vocab_size, config.context_len, config.embed_dim, config.hidden_dim
        self._slices = {}
        off = 0
        for name, shape in [
            ("tok_emb", (v, d)),
            ("pos_emb", (c, d)),
            ("w1", (d, h)),
            ("b1", (h,)),
            ("w2", (h, v)),
            ("b2", (v,)),
        ]:
            size = int(np.prod(shape))
            self._slices[name] = (off, off + size, shape)
            off += size

    def _view(self, name):
        lo, hi, shape = self._slices[name]
        return self.params[lo:hi].reshape(shape)

    @property
    def tok_emb(self):
        return self._view("tok_emb")

    @property
    def pos_emb(self):
        return self._view("pos_emb")

    @property
    def w1(self):
        return self._view("w1")

    @property
    def b1(self):
        return self._view("b1")

    @property
    def w2(self):
        return self._view("w2")

    @property
    def b2(self):
        return self._view("b2")

    def clone(self) -> "SequenceModel":
        return SequenceModel(self.config, self.params.copy())

    def logits(self, inputs: np.ndarray, positions: np.ndarray):
        """Next-token logits for (previous-token, position) index arrays.

        inputs and positions must have the same shape S; returns
        (Z of shape S + (V,), cache for logits_vjp).
        """
        x = self.tok_emb[inputs] + self.pos_emb[positions]
        hidden = np.tanh(x @ self.w1 + self.b1)
        z = hidden @ self.w2 + self.b2
        return z, (inputs, positions, x, hidden)

    def _grad_view(self, grad: np.ndarray, name: str) -> np.ndarray:
        lo, hi, shape = self._slices[name]
        return grad[lo:hi].reshape(shape)

    def logits_vjp(self, cache, dz: np.ndarray) -> np.ndarray:
        """Flat-parameter gradient of sum(dz * logits)."""
        inputs, positions, x, hidden = cache
        d = self.config.embed_dim
        h = self.config.hidden_dim
        v = self.config.vocab_size
        flat_x = x.reshape(-1, d)
        flat_h = hidden.reshape(-1, h)
        flat_dz = dz.reshape(-1, v)

        grad = np.zeros_like(self.params)
        self._grad_view(grad, "w2")[...] = flat_h.T @ flat_dz
        self._grad_view(grad, "b2")[...] = flat_dz.sum(axis=0)
        dh = flat_dz @ self.w2.T
        da = dh * (1.0 - flat_h * flat_h)
        self._grad_view(grad, "w1")[...] = flat_x.T @ da
        self._grad_view(grad, "b1")[...] = da.sum(axis=0)
        dx = da @ self.w1.T
        np.add.at(self._grad_view(grad, "tok_emb"), np.asarray(inputs).ravel(), dx)
        np.add.at(self._grad_view(grad, "pos_emb"), np.asarray(positions).ravel(), dx)
        return grad


class TabularModel:
    """Independent logits per (previous token, position); gradcheck only."""

    def __init__(self, config: TabularConfig, params: np.ndarray):
        if params.shape != (param_count(config),) or params.dtype != np.float64:
            raise InvalidConfigError(
                f"params must be a float64 vector of length {param_count(config)}"
            )
        self.config = config
        self.params = params

    @property
    def table(self):
        v, c = self.config.vocab_size, self.config.context_len
        return self.params.reshape(v, c, v)

    def clone(self) -> "TabularModel":
        return TabularModel(self.config, self.params.copy())

    def logits(self, inputs: np.ndarray, positions: np.ndarray):
        z = self.table[inputs, positions, :]
        return z, (inputs, positions)

    def logits_vjp(self, cache, dz: np.ndarray) -> np.ndarray:
        inputs, positions = cache
        grad = np.zeros_like(self.params)
        v = self.config.vocab_size
        gt = grad.reshape(v, self.config.context_len, v)
        np.add.at(gt, (np.asarray(inputs).ravel(), np.asarray(positions).ravel()), dz.reshape(-1, v))
        return grad


class ReferenceSnapshot:
    """Immutable deep copy of a model, frozen at snapshot time.

    The parameter buffer is write-locked, so the snapshot answers
    byte-identical log-probs no matter how the source model trains on.
    """

    def __init__(self, model):
        inner = model.clone()
        inner.params.setflags(write=False)
        object.__setattr__(self, "_inner", inner)

    def __getattr__(self, name):
        return getattr(object.__getattribute__(self, "_inner"), name)

    def __setattr__(self, name, value):
        raise AttributeError("ReferenceSnapshot is immutable")


def init_model(config: ModelConfig) -> SequenceModel:
    """Deterministic seeded init; equal configs give identical params.

    Embeddings are N(0, 0.5^2), w1 is N(0, 1/embed_dim), w2 is
    N(0, 0.02^2) and biases start at zero, so a fresh model is close to
    the uniform distribution over the vocabulary.
    """
    v, c, d, h = config.vocab_size, config.context_len, config.embed_dim, config.hidden_dim
    rng = np.random.default_rng(config.seed)
    params = np.zeros(param_count(config))
    model = SequenceModel(config, params)
    model.tok_emb[...] = rng.normal(0.0, 0.5, (v, d))
    model.pos_emb[...] = rng.normal(0.0, 0.5, (c, d))
    model.w1[...] = rng.normal(0.0, 1.0 / np.sqrt(d), (d, h))
    model.w2[...] = rng.normal(0.0, 0.02, (h, v))
    return model


def init_tabular(config: TabularConfig, scale: float = 1.0) -> TabularModel:
    rng = np.random.default_rng(config.seed)
    params = rng.normal(0.0, scale, param_count(config))
    return TabularModel(config, params)


def snapshot_reference(model) -> ReferenceSnapshot:
    """Freeze a deep copy of the model to serve as the reference policy."""
    return ReferenceSnapshot(model)


def _validate_tokens(model, tokens, what: str) -> np.ndarray:
    arr = np.asarray(tokens)
    if arr.size == 0:
        raise InvalidInputError(f"{what} must be non-empty")
    if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
        raise InvalidInputError(f"{what} must be a 1-d integer sequence")
    v = model.config.vocab_size
    if arr.min() < 0 or arr.max() >= v:
        bad = arr[(arr < 0) | (arr >= v)][0]
        raise TokenRangeError(f"{what} token {int(bad)} outside vocabulary of size {v}")
    return arr.astype(np.int64)


def _seq_indices(model, prompt, completion):
    p = _validate_tokens(model, prompt, "prompt")
    c = _validate_tokens(model, completion, "completion")
    total = p.size + c.size
    if total > model.config.context_len:
        raise SequenceLengthError(
            f"prompt+completion length {total} exceeds context_len {model.config.context_len}"
        )
    seq = np.concatenate([p, c])
    inputs = seq[p.size - 1 : total - 1]
    positions = np.arange(p.size - 1, total - 1, dtype=np.int64)
    return inputs, positions, c


def log_softmax(z: np.ndarray) -> np.ndarray:
    zs = z - z.max(axis=-1, keepdims=True)
    return zs - np.log(np.exp(zs).sum(axis=-1, keepdims=True))


def step_log_probs(model, prev_token: int, position: int) -> np.ndarray:
    """Log p(. | prev_token, position), the per-position categorical."""
    v, c = model.config.vocab_size, model.config.context_len
    if not 0 <= prev_token < v:
        raise TokenRangeError(f"token {prev_token} outside vocabulary of size {v}")
    if not 0 <= position < c:
        raise SequenceLengthError(f"position {position} outside context of length {c}")
    z, _ = model.logits(np.array([prev_token]), np.array([position]))
    return log_softmax(z)[0]


def sequence_log_prob(model, prompt, completion) -> float:
    """Sum over completion tokens of log p(token | previous, position).

    Natural log, always <= 0. The prompt conditions the first step via
    its last token and the position offset.
    """
    inputs, positions, targets = _seq_indices(model, prompt, completion)
    z, _ = model.logits(inputs, positions)
    ls = log_softmax(z)
    return float(ls[np.arange(targets.size), targets].sum())


def sequence_log_prob_grad(model, prompt, completion):
    """(log-prob, flat gradient of it w.r.t. model.params)."""
    inputs, positions, targets = _seq_indices(model, prompt, completion)
    z, cache = model.logits(inputs, positions)
    ls = log_softmax(z)
    lp = float(ls[np.arange(targets.size), targets].sum())
    dz = -np.exp(ls)
    dz[np.arange(targets.size), targets] += 1.0
    return lp, model.logits_vjp(cache, dz)


def backward(model, example, loss_partials: LossGrad) -> np.ndarray:
    """Chain the per-sample loss partials through both sequence log-probs.

    Returns d loss / d params as a flat vector:
    d_chosen * grad lp(chosen) + d_rejected * grad lp(rejected).
    """
    _, g_w = sequence_log_prob_grad(model, example.prompt, example.chosen)
    _, g_l = sequence_log_prob_grad(model, example.prompt, example.rejected)
    return loss_partials.d_lp_theta_chosen * g_w + loss_partials.d_lp_theta_rejected * g_l


def sample(model, prompt, max_len: int, temperature: float, rng_seed: int) -> list[int]:
    """Autoregressive categorical sampling, deterministic given rng_seed.

    temperature scales the logits; the sentinel 0 means greedy argmax
    decoding (ties resolve to the lowest token id).
    """
    if not (np.isfinite(temperature) and temperature >= 0.0):
        raise InvalidConfigError(f"temperature must be >= 0 and finite, got {temperature!r}")
    if max_len < 1:
        raise InvalidConfigError(f"max_len must be >= 1, got {max_len}")
    p = _validate_tokens(model, prompt, "prompt")
    if p.size + max_len > model.config.context_len:
        raise SequenceLengthError(
            f"prompt length {p.size} + max_len {max_len} exceeds "
            f"context_len {model.config.context_len}"
        )
    rng = np.random.default_rng(rng_seed)
    v = model.config.vocab_size
    out = []
    prev = int(p[-1])
    pos = p.size - 1
    for _ in range(max_len):
        z, _ = model.logits(np.array([prev]), np.array([pos]))
        z = z[0]
        if temperature == 0.0:
            prev = int(np.argmax(z))
        else:
            probs = np.exp(log_softmax(z / temperature))
            probs = probs / probs.sum()
            prev = int(rng.choice(v, p=probs))
        out.append(prev)
        pos += 1
    return out


# Batched internals used by the trainer and analysis paths. Sequences in
# a batch must share one prompt length and one completion length.

def encode_pairs(prompts: np.ndarray, completions: np.ndarray):
    """Index arrays for a uniform batch: (inputs, positions, targets)."""
    b, p_len = prompts.shape
    c_len = completions.shape[1]
    inputs = np.concatenate([prompts[:, -1:], completions[:, :-1]], axis=1)
    positions = np.broadcast_to(
        np.arange(p_len - 1, p_len + c_len - 1, dtype=np.int64), (b, c_len)
    )
    return inputs, positions, completions


def batch_log_probs(model, prompts: np.ndarray, completions: np.ndarray):
    """Per-sequence log-probs for a uniform batch; returns (lp, cache)."""
    inputs, positions, targets = encode_pairs(prompts, completions)
    z, fwd = model.logits(inputs, positions)
    ls = log_softmax(z)
    b, l = targets.shape
    picked = ls[np.arange(b)[:, None], np.arange(l)[None, :], targets]
    return picked.sum(axis=1), (fwd, ls, targets)


def batch_backward(model, cache, coef: np.ndarray) -> np.ndarray:
    """Flat gradient of sum_b coef[b] * lp_b from a batch_log_probs cache."""
    fwd, ls, targets = cache
    b, l = targets.shape
    dz = -np.exp(ls)
    dz[np.arange(b)[:, None], np.arange(l)[None, :], targets] += 1.0
    dz *= coef[:, None, None]
    return model.logits_vjp(fwd, dz)


def batch_next_logits(model, prev_tokens: np.ndarray, position: int) -> np.ndarray:
    """Raw next-token logits for a vector of states at one position."""
    pos = np.full(prev_tokens.shape, position, dtype=np.int64)
    z, _ = model.logits(prev_tokens, pos)
    return z


def save_model(model, path) -> None:
    """Write config + params in the documented checkpoint format.

    Layout: magic line, one JSON header line (kind, config, n_params,
    dtype '<f8'), then the raw little-endian float64 parameter bytes.
    Byte-deterministic, and save/load round-trips bit-exactly.
    """
    if isinstance(model, ReferenceSnapshot):
        model = object.__getattribute__(model, "_inner")
    kind = "mlp" if isinstance(model, SequenceModel) else "tabular"
    header = {
        "kind": kind,
        "config": {k: int(v) for k, v in model.config.__dict__.items()},
        "n_params": int(model.params.size),
        "dtype": "<f8",
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(blob)
        f.write(np.ascontiguousarray(model.params, dtype="<f8").tobytes())


def load_model(path):
    """Inverse of save_model; returns a SequenceModel or TabularModel."""
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise InvalidInputError(f"{path}: not a prefopt checkpoint")
        header = json.loads(f.readline().decode())
        raw = f.read()
    params = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if params.size != header["n_params"]:
        raise InvalidInputError(f"{path}: truncated checkpoint")
    if header["kind"] == "mlp":
        return SequenceModel(ModelConfig(**header["config"]), params)
    if header["kind"] == "tabular":
        return TabularModel(TabularConfig(**header["config"]), params)
    raise InvalidInputError(f"{path}: unknown model kind {header['kind']!r}")
