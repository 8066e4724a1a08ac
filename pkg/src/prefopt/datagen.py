"""Deterministic synthetic preference pairs with a closeness knob.

Each example is (prompt, chosen, rejected) over integer tokens. The
chosen completion is a fixed pseudorandom function of the prompt: a
seeded (previous token, position) -> next token table is rolled out
starting from the prompt's last token, so the task is learnable by a
Markov policy and every prompt maps to exactly one chosen completion.
The rejected completion is the chosen one with exactly `edit_distance`
positions replaced by different random tokens, which makes the recorded
edit distance the Hamming distance by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import InvalidSpecError, ParseError


@dataclass(frozen=True)
class PreferenceExample:
    """One (prompt, chosen, rejected) pair; completions share a length."""

    prompt: list[int]
    chosen: list[int]
    rejected: list[int]
    edit_distance: int


@dataclass(frozen=True)
class DatasetSpec:
    n_examples: int
    vocab_size: int
    prompt_len: int
    completion_len: int
    edit_distance: int
    seed: int

    def __post_init__(self):
        if self.n_examples < 1:
            raise InvalidSpecError(f"n_examples must be >= 1, got {self.n_examples}")
        if self.vocab_size < 2:
            raise InvalidSpecError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.prompt_len < 1 or self.completion_len < 1:
            raise InvalidSpecError("prompt_len and completion_len must be >= 1")
        if not 1 <= self.edit_distance <= self.completion_len:
            raise InvalidSpecError(
                f"edit_distance must be in [1, completion_len={self.completion_len}], "
                f"got {self.edit_distance}"
            )


def target_table(spec: DatasetSpec) -> np.ndarray:
    """(vocab, completion_len) next-token table defining the chosen map."""
    rng = np.random.default_rng(spec.seed)
    return rng.integers(0, spec.vocab_size, size=(spec.vocab_size, spec.completion_len))


def chosen_for_prompt(prompt, table: np.ndarray) -> list[int]:
    """Roll the target table out from the prompt's last token."""
    prev = int(prompt[-1])
    out = []
    for j in range(table.shape[1]):
        prev = int(table[prev, j])
        out.append(prev)
    return out


def generate(spec: DatasetSpec) -> list[PreferenceExample]:
    """Deterministic dataset for the spec; same seed, same bytes."""
    rng = np.random.default_rng(spec.seed)
    table = rng.integers(0, spec.vocab_size, size=(spec.vocab_size, spec.completion_len))
    examples = []
    for _ in range(spec.n_examples):
        prompt = rng.integers(0, spec.vocab_size, size=spec.prompt_len)
        chosen = chosen_for_prompt(prompt, table)
        rejected = list(chosen)
        sites = rng.choice(spec.completion_len, size=spec.edit_distance, replace=False)
        for pos in sites:
            # draw from the vocab minus the current token
            t = int(rng.integers(0, spec.vocab_size - 1))
            if t >= rejected[pos]:
                t += 1
            rejected[int(pos)] = t
        examples.append(
            PreferenceExample(
                prompt=[int(t) for t in prompt],
                chosen=chosen,
                rejected=rejected,
                edit_distance=spec.edit_distance,
            )
        )
    return examples


_FIELDS = ("prompt", "chosen", "rejected", "edit_distance")


def save_jsonl(examples, path) -> None:
    """One JSON record per line, UTF-8, newline-terminated."""
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(asdict(ex)) + "\n")


def load_jsonl(path) -> list[PreferenceExample]:
    """Parse a dataset file; malformed lines raise ParseError with the
    line number. Token-range validation is deferred to training time,
    since the file does not carry a vocabulary size."""
    examples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", lineno) from e
            if not isinstance(rec, dict):
                raise ParseError("record is not an object", lineno)
            missing = [k for k in _FIELDS if k not in rec]
            if missing:
                raise ParseError(f"missing key {missing[0]!r}", lineno)
            try:
                ex = PreferenceExample(
                    prompt=[int(t) for t in rec["prompt"]],
                    chosen=[int(t) for t in rec["chosen"]],
                    rejected=[int(t) for t in rec["rejected"]],
                    edit_distance=int(rec["edit_distance"]),
                )
            except (TypeError, ValueError) as e:
                raise ParseError(f"malformed field: {e}", lineno) from e
            examples.append(ex)
    return examples
