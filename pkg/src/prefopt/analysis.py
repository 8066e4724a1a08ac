"""Diagnostic harness: coefficient curves, method sweeps, degeneration
detection, KL drift and a toy exact-match evaluation.

The sweep reproduces the qualitative comparison protocol: one shared
dataset and one shared base model (supervised-pretrained on the chosen
completions, then snapshotted as the reference) feed every
(method, beta, learning-rate) cell, so differences between cells come
from the objective and its hyper-parameters alone. Cells that abort on
non-finite numbers are first-class results with status "crashed";
reproducing crashes is part of the point.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .datagen import DatasetSpec, generate
from .errors import InvalidSpecError, NumericalAbort
from .losses import LossSpec, dpo_coefficient
from .policy import (
    ModelConfig,
    batch_next_logits,
    init_model,
    log_softmax,
    sample,
    snapshot_reference,
)
from .trainer import (
    TrainConfig,
    evaluate_rewards,
    stack_examples,
    train,
    train_supervised,
    write_metrics_csv,
)

SUMMARY_HEADER = (
    "method,beta,lambda,lr,status,final_rewards_chosen,final_rewards_reject,"
    "final_margin,margin_positive_frac,toy_accuracy,max_run_length,flagged_degenerate"
)

CURVE_HEADER = "beta,margin,coefficient"


@dataclass(frozen=True)
class CoefficientCurve:
    """Tabulated f(beta, margin) on a uniform margin grid."""

    betas: list[float]
    margins: np.ndarray
    values: np.ndarray  # shape (len(betas), len(margins))


def coefficient_curve(betas, margin_min: float, margin_max: float, n_points: int) -> CoefficientCurve:
    """Evaluate the dynamic coefficient per beta on a uniform grid.

    Values come from dpo_coefficient itself, point by point, so the table
    is exactly a view of that operation.
    """
    if not margin_min < margin_max:
        raise InvalidSpecError("margin_min must be < margin_max")
    if n_points < 2:
        raise InvalidSpecError("n_points must be >= 2")
    betas = [float(b) for b in betas]
    margins = np.linspace(margin_min, margin_max, n_points)
    values = np.array([[dpo_coefficient(b, float(m)) for m in margins] for b in betas])
    return CoefficientCurve(betas=betas, margins=margins, values=values)


def write_curve_csv(curve: CoefficientCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(CURVE_HEADER + "\n")
        for beta, row in zip(curve.betas, curve.values):
            for m, v in zip(curve.margins, row):
                f.write(f"{beta:.9g},{m:.9g},{v:.9g}\n")


@dataclass(frozen=True)
class DegenerationReport:
    """Repetition statistics of sampled completions."""

    max_run_length_mean: float
    distinct_token_ratio_mean: float
    flagged: bool
    threshold: float


def _max_run_length(tokens) -> int:
    best = run = 1
    for a, b in zip(tokens, tokens[1:]):
        run = run + 1 if a == b else 1
        best = max(best, run)
    return best


def degeneration_report(model, prompts, max_len: int, rng_seed: int,
                        threshold: float | None = None,
                        temperature: float = 1.0) -> DegenerationReport:
    """Sample one completion per prompt and flag repeated-token collapse.

    Flags when the mean maximal run of identical consecutive tokens
    reaches the threshold (default: half the completion length).
    """
    if not prompts:
        raise InvalidSpecError("prompts must be non-empty")
    if threshold is None:
        threshold = max_len / 2.0
    runs = []
    ratios = []
    for i, prompt in enumerate(prompts):
        completion = sample(model, prompt, max_len, temperature, rng_seed + i)
        runs.append(_max_run_length(completion))
        ratios.append(len(set(completion)) / len(completion))
    run_mean = float(np.mean(runs))
    return DegenerationReport(
        max_run_length_mean=run_mean,
        distinct_token_ratio_mean=float(np.mean(ratios)),
        flagged=bool(run_mean >= threshold),
        threshold=float(threshold),
    )


def kl_diagnostic(model, ref, prompts, max_len: int, rng_seed: int) -> float:
    """Mean per-position KL(policy || reference) over on-policy contexts.

    Contexts are sampled from the current model (one completion per
    prompt); at every position both full softmax vectors are compared
    exactly. Non-negative by construction, with each per-position term
    clamped at zero against rounding.
    """
    if not prompts:
        raise InvalidSpecError("prompts must be non-empty")
    total = 0.0
    count = 0
    for i, prompt in enumerate(prompts):
        completion = sample(model, prompt, max_len, 1.0, rng_seed + i)
        seq = np.concatenate([np.asarray(prompt), np.asarray(completion)])
        p_len = len(prompt)
        inputs = seq[p_len - 1 : p_len + max_len - 1]
        positions = np.arange(p_len - 1, p_len + max_len - 1)
        z_m, _ = model.logits(inputs, positions)
        z_r, _ = ref.logits(inputs, positions)
        ls_m = log_softmax(z_m)
        ls_r = log_softmax(z_r)
        per_pos = (np.exp(ls_m) * (ls_m - ls_r)).sum(axis=-1)
        total += float(np.maximum(per_pos, 0.0).sum())
        count += per_pos.size
    return total / count


def toy_accuracy(model, data) -> float:
    """Fraction of prompts whose greedy decode equals the chosen
    completion exactly. Deterministic: no sampling involved."""
    prompts, chosen, _ = stack_examples(data, model.config)
    b, c_len = chosen.shape
    prev = prompts[:, -1]
    pos = prompts.shape[1] - 1
    decoded = np.empty_like(chosen)
    for j in range(c_len):
        z = batch_next_logits(model, prev, pos)
        prev = np.argmax(z, axis=1)
        decoded[:, j] = prev
        pos += 1
    return float(np.all(decoded == chosen, axis=1).mean())


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian (method x beta x learning-rate) grid over shared seeds."""

    methods: list[LossSpec]
    betas: list[float]
    learning_rates: list[float]
    train: TrainConfig
    data: DatasetSpec
    model: ModelConfig
    sft_epochs: int = 25
    sft_learning_rate: float = 0.01
    eval_examples: int = 512
    degen_threshold: float | None = None
    degen_temperature: float = 1.0

    def n_cells(self) -> int:
        return len(self.methods) * len(self.betas) * len(self.learning_rates)


@dataclass(frozen=True)
class SweepCell:
    """One summary row of a sweep."""

    method: str
    beta: float
    lam: float | None
    lr: float
    status: str  # ok | crashed | degenerate
    final_rewards_chosen: float
    final_rewards_reject: float
    final_margin: float
    margin_positive_frac: float
    toy_accuracy: float
    max_run_length: float
    flagged_degenerate: bool

    def csv(self) -> str:
        lam = "" if self.lam is None else f"{self.lam:.9g}"
        return ",".join(
            [
                self.method,
                f"{self.beta:.9g}",
                lam,
                f"{self.lr:.9g}",
                self.status,
                f"{self.final_rewards_chosen:.9g}",
                f"{self.final_rewards_reject:.9g}",
                f"{self.final_margin:.9g}",
                f"{self.margin_positive_frac:.9g}",
                f"{self.toy_accuracy:.9g}",
                f"{self.max_run_length:.9g}",
                str(self.flagged_degenerate).lower(),
            ]
        )


def prepare_base_model(model_config: ModelConfig, train_data, sft_epochs: int,
                       sft_learning_rate: float, batch_size: int, seed: int):
    """Fresh seeded model, optionally supervised-pretrained on chosen."""
    model = init_model(model_config)
    if sft_epochs > 0:
        train_supervised(model, train_data, sft_learning_rate, sft_epochs,
                         batch_size=batch_size, seed=seed)
    return model


def _cell_tag(method: str, beta: float, lr: float) -> str:
    return f"{method}_{beta:g}_{lr:g}"


def _run_cell(args):
    (base_params, model_config, train_data, eval_data, template, beta, lr,
     base_train, threshold, degen_temperature, out_dir) = args
    model = init_model(model_config)
    model.params[...] = base_params
    ref = snapshot_reference(model)
    spec = replace(template, beta=beta)
    config = replace(base_train, loss_spec=spec, learning_rate=lr)
    tag = _cell_tag(spec.method.value, beta, lr)

    status = "ok"
    try:
        _, metrics = train(model, ref, train_data, config)
    except NumericalAbort as abort:
        metrics = abort.metrics
        status = "crashed"

    if status == "ok":
        mean, per_ex = evaluate_rewards(model, ref, train_data)
        frac = float(np.mean([t.margin > 0 for t in per_ex]))
        eval_prompts = [ex.prompt for ex in eval_data]
        c_len = len(eval_data[0].chosen)
        degen = degeneration_report(
            model, eval_prompts, c_len, rng_seed=config.seed + 90001,
            threshold=threshold, temperature=degen_temperature,
        )
        acc = toy_accuracy(model, eval_data)
        if degen.flagged:
            status = "degenerate"
        cell = SweepCell(
            method=spec.method.value, beta=beta, lam=spec.lam, lr=lr, status=status,
            final_rewards_chosen=mean.chosen, final_rewards_reject=mean.reject,
            final_margin=mean.margin, margin_positive_frac=frac, toy_accuracy=acc,
            max_run_length=degen.max_run_length_mean, flagged_degenerate=degen.flagged,
        )
    else:
        nan = float("nan")
        cell = SweepCell(
            method=spec.method.value, beta=beta, lam=spec.lam, lr=lr, status=status,
            final_rewards_chosen=nan, final_rewards_reject=nan, final_margin=nan,
            margin_positive_frac=nan, toy_accuracy=nan, max_run_length=nan,
            flagged_degenerate=False,
        )

    if out_dir is not None:
        out = Path(out_dir)
        cell_dir = out / tag
        cell_dir.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(metrics, cell_dir / "metrics.csv")
        if metrics:
            from .plots import save_figure, training_curves_figure

            fig = training_curves_figure(metrics, f"{spec.describe()} lr={lr:g} [{status}]")
            save_figure(fig, out / f"sweep_{tag}.svg")
    return cell


def run_sweep(spec: SweepSpec, out_dir=None, jobs: int = 1) -> list[SweepCell]:
    """Train every (method, beta, lr) cell from one shared base model.

    Returns summary cells ordered by (method, beta, lr); when out_dir is
    given, also writes summary.csv, per-cell metrics CSVs and the
    per-cell rewards-trend SVGs.
    """
    full = generate(replace(spec.data, n_examples=spec.data.n_examples + spec.eval_examples))
    train_data = full[: spec.data.n_examples]
    eval_data = full[spec.data.n_examples :]

    base = prepare_base_model(spec.model, train_data, spec.sft_epochs,
                              spec.sft_learning_rate, spec.train.batch_size,
                              spec.train.seed)

    cells = sorted(
        [
            (template, beta, lr)
            for template in spec.methods
            for beta in spec.betas
            for lr in spec.learning_rates
        ],
        key=lambda c: (c[0].method.value, c[1], c[2]),
    )
    threshold = spec.degen_threshold
    work = [
        (base.params.copy(), spec.model, train_data, eval_data, template, beta, lr,
         spec.train, threshold, spec.degen_temperature, out_dir)
        for template, beta, lr in cells
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, work))
    else:
        results = [_run_cell(w) for w in work]

    if out_dir is not None:
        write_summary_csv(results, Path(out_dir) / "summary.csv")
    return results


def write_summary_csv(cells, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(SUMMARY_HEADER + "\n")
        for cell in cells:
            f.write(cell.csv() + "\n")


def read_summary_csv(path) -> list[SweepCell]:
    cells = []
    with open(path, encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for rec in reader:
            cells.append(
                SweepCell(
                    method=rec["method"],
                    beta=float(rec["beta"]),
                    lam=float(rec["lambda"]) if rec["lambda"] else None,
                    lr=float(rec["lr"]),
                    status=rec["status"],
                    final_rewards_chosen=float(rec["final_rewards_chosen"]),
                    final_rewards_reject=float(rec["final_rewards_reject"]),
                    final_margin=float(rec["final_margin"]),
                    margin_positive_frac=float(rec["margin_positive_frac"]),
                    toy_accuracy=float(rec["toy_accuracy"]),
                    max_run_length=float(rec["max_run_length"]),
                    flagged_degenerate=rec["flagged_degenerate"] == "true",
                )
            )
    return cells
