"""Command-line entry point.

Subcommands: datagen, train, gradcheck, curves, sweep, sample, report,
rerun. Every artifact-producing command writes a run manifest next to
its outputs; `prefopt rerun <manifest>` re-executes the fully resolved
argument list stored there and reproduces the artifacts byte-for-byte.

Exit codes: 0 success, 1 IO/environment, 2 usage, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import DatasetSpec, generate, load_jsonl, save_jsonl
from .errors import (
    InvalidConfigError,
    InvalidInputError,
    InvalidSpecError,
    NumericalAbort,
    ParseError,
    SequenceLengthError,
    TokenRangeError,
)
from .losses import LossSpec, Method
from .policy import (
    ModelConfig,
    init_model,
    load_model,
    sample,
    save_model,
    snapshot_reference,
)
from .trainer import TrainConfig, train, train_supervised, write_metrics_csv

DEFAULT_VOCAB = 16
DEFAULT_PROMPT_LEN = 8
DEFAULT_COMPLETION_LEN = 8
DEFAULT_CONTEXT_LEN = 24
DEFAULT_EMBED_DIM = 16
DEFAULT_HIDDEN_DIM = 32
DEFAULT_BETAS = "0.02,0.04,0.1,0.2"


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}")


def _resolved_argv(command: str, args, flag_map) -> list[str]:
    argv = [command]
    for dest, flag in flag_map:
        value = getattr(args, dest)
        if value is None:
            continue
        argv.extend([flag, str(value)])
    return argv


def write_manifest(path, command, args, flag_map, seeds, outputs, t0) -> None:
    payload = {
        "command": command,
        "argv": _resolved_argv(command, args, flag_map),
        "config": {
            dest: (str(v) if isinstance(v, Path) else v)
            for dest, _ in flag_map
            for v in [getattr(args, dest)]
        },
        "version": __version__,
        "seeds": seeds,
        "outputs": [str(p) for p in outputs],
        "duration_s": round(time.monotonic() - t0, 6),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------- datagen

DATAGEN_FLAGS = [
    ("n", "--n"),
    ("vocab", "--vocab"),
    ("prompt_len", "--prompt-len"),
    ("completion_len", "--completion-len"),
    ("edit_distance", "--edit-distance"),
    ("seed", "--seed"),
    ("out", "--out"),
]


def cmd_datagen(args) -> int:
    t0 = time.monotonic()
    if args.edit_distance < 1:
        raise UsageError("--edit-distance must be >= 1")
    if args.edit_distance > args.completion_len:
        raise UsageError("--edit-distance must be <= --completion-len")
    spec = DatasetSpec(
        n_examples=args.n,
        vocab_size=args.vocab,
        prompt_len=args.prompt_len,
        completion_len=args.completion_len,
        edit_distance=args.edit_distance,
        seed=args.seed,
    )
    data = generate(spec)
    out = Path(args.out)
    save_jsonl(data, out)
    write_manifest(
        out.with_name(out.name + ".manifest.json"), "datagen", args, DATAGEN_FLAGS,
        seeds={"seed": args.seed}, outputs=[out], t0=t0,
    )
    print(f"wrote {len(data)} examples to {out}")
    return 0


# ------------------------------------------------------------------ train

TRAIN_FLAGS = [
    ("data", "--data"),
    ("method", "--method"),
    ("beta", "--beta"),
    ("lam", "--lambda"),
    ("lr", "--lr"),
    ("batch", "--batch"),
    ("epochs", "--epochs"),
    ("warmup_ratio", "--warmup-ratio"),
    ("seed", "--seed"),
    ("out_dir", "--out-dir"),
    ("optimizer", "--optimizer"),
    ("log_every", "--log-every"),
    ("vocab", "--vocab"),
    ("context_len", "--context-len"),
    ("embed_dim", "--embed-dim"),
    ("hidden_dim", "--hidden-dim"),
    ("model_seed", "--model-seed"),
    ("sft_epochs", "--sft-epochs"),
    ("sft_lr", "--sft-lr"),
    ("init_from", "--init-from"),
]


def _loss_spec_from_flags(method: str, beta: float, lam) -> LossSpec:
    m = Method.parse(method)
    if m is Method.DPOP and lam is None:
        raise UsageError("--method dpop requires --lambda")
    if m is not Method.DPOP and lam is not None:
        raise UsageError("--lambda is only valid with --method dpop")
    return LossSpec(method=m, beta=beta, lam=lam)


def cmd_train(args) -> int:
    t0 = time.monotonic()
    spec = _loss_spec_from_flags(args.method, args.beta, args.lam)
    data = load_jsonl(args.data)
    if not data:
        raise UsageError(f"--data {args.data} holds no examples")

    if args.init_from is not None:
        model = load_model(args.init_from)
    else:
        config = ModelConfig(
            vocab_size=args.vocab,
            context_len=args.context_len,
            embed_dim=args.embed_dim,
            hidden_dim=args.hidden_dim,
            seed=args.model_seed,
        )
        model = init_model(config)
    if args.sft_epochs > 0:
        train_supervised(model, data, args.sft_lr, args.sft_epochs,
                         batch_size=args.batch, seed=args.seed)
    ref = snapshot_reference(model)

    config = TrainConfig(
        loss_spec=spec,
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        warmup_ratio=args.warmup_ratio,
        seed=args.seed,
        log_every=args.log_every,
        optimizer=args.optimizer,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    ckpt_path = out_dir / "model.ckpt"

    def finish(rows) -> None:
        write_metrics_csv(rows, metrics_path)
        save_model(model, ckpt_path)
        write_manifest(
            out_dir / "manifest.json", "train", args, TRAIN_FLAGS,
            seeds={"seed": args.seed, "model_seed": args.model_seed},
            outputs=[metrics_path, ckpt_path], t0=t0,
        )

    try:
        _, rows = train(model, ref, data, config)
    except NumericalAbort as abort:
        finish(abort.metrics)
        print(
            f"numerical abort at step {abort.step}, example {abort.example_index}: {abort}",
            file=sys.stderr,
        )
        return 3
    finish(rows)
    if rows:
        print(f"final step {rows[-1].step}: loss {rows[-1].loss:.6f}, "
              f"margin {rows[-1].rewards_margin_mean:.6f}")
    return 0


# -------------------------------------------------------------- gradcheck

GRADCHECK_FLAGS = [
    ("tolerance", "--tolerance"),
    ("seed", "--seed"),
    ("step", "--step"),
    ("coords", "--coords"),
    ("beta", "--beta"),
    ("lam", "--lambda"),
    ("csv", "--csv"),
]


def cmd_gradcheck(args) -> int:
    from .gradcheck import GradCheckReport, check_all_methods
    from .datagen import PreferenceExample

    t0 = time.monotonic()
    rng = np.random.default_rng(args.seed)
    config = ModelConfig(vocab_size=12, context_len=16, embed_dim=8, hidden_dim=12,
                         seed=args.seed)
    model = init_model(config)
    model.params += rng.normal(0.0, 0.3, model.params.size)
    ref = init_model(config)
    ref.params += rng.normal(0.0, 0.3, ref.params.size)
    ref = snapshot_reference(ref)

    prompt = rng.integers(0, config.vocab_size, 5).tolist()
    chosen = rng.integers(0, config.vocab_size, 6).tolist()
    rejected = list(chosen)
    rejected[2] = (rejected[2] + 1 + int(rng.integers(0, config.vocab_size - 1))) % config.vocab_size
    example = PreferenceExample(prompt=prompt, chosen=chosen, rejected=rejected, edit_distance=1)

    specs = [
        LossSpec(method=Method.DPO, beta=args.beta),
        LossSpec(method=Method.DPOP, beta=args.beta, lam=args.lam),
        LossSpec(method=Method.MINOR_DPO, beta=args.beta),
    ]
    coords = None
    if args.coords is not None:
        coords = np.random.default_rng(args.seed).choice(
            model.params.size, size=min(args.coords, model.params.size), replace=False
        )
    reports = check_all_methods(model, ref, example, specs, tolerance=args.tolerance,
                                coords=coords, step=args.step, nudge_seed=args.seed)

    print(GradCheckReport.table_header())
    for report in reports:
        print(report.row())
    if args.csv is not None:
        csv_path = Path(args.csv)
        with open(csv_path, "w", encoding="utf-8") as f:
            f.write("method,n_checked,max_rel_error,max_abs_error,worst_coordinate,passed,tolerance\n")
            for r in reports:
                f.write(
                    f"{r.method},{r.n_checked},{r.max_rel_error:.9g},{r.max_abs_error:.9g},"
                    f"{r.worst_coordinate},{str(r.passed).lower()},{r.tolerance:.9g}\n"
                )
        write_manifest(
            csv_path.with_name(csv_path.name + ".manifest.json"), "gradcheck", args,
            GRADCHECK_FLAGS, seeds={"seed": args.seed}, outputs=[csv_path], t0=t0,
        )
    return 0 if all(r.passed for r in reports) else 1


# ----------------------------------------------------------------- curves

CURVES_FLAGS = [
    ("betas", "--betas"),
    ("margin_min", "--margin-min"),
    ("margin_max", "--margin-max"),
    ("points", "--points"),
    ("name", "--name"),
    ("out_dir", "--out-dir"),
]


def cmd_curves(args) -> int:
    from .analysis import coefficient_curve, write_curve_csv
    from .plots import coefficient_curve_figure, save_figure

    t0 = time.monotonic()
    betas = _float_list(args.betas)
    if not betas:
        raise UsageError("--betas must name at least one value")
    curve = coefficient_curve(betas, args.margin_min, args.margin_max, args.points)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"curve_{args.name}.csv"
    svg_path = out_dir / f"curve_{args.name}.svg"
    write_curve_csv(curve, csv_path)
    save_figure(coefficient_curve_figure(curve), svg_path)
    write_manifest(out_dir / f"curve_{args.name}.manifest.json", "curves", args,
                   CURVES_FLAGS, seeds={}, outputs=[csv_path, svg_path], t0=t0)
    print(f"wrote {csv_path} and {svg_path}")
    return 0


# ------------------------------------------------------------------ sweep

SWEEP_FLAGS = [
    ("config", "--config"),
    ("out_dir", "--out-dir"),
    ("jobs", "--jobs"),
]

_SWEEP_KEYS = {
    "methods": str,
    "betas": str,
    "learning_rates": str,
    "lambda": float,
    "n_examples": int,
    "vocab_size": int,
    "prompt_len": int,
    "completion_len": int,
    "edit_distance": int,
    "data_seed": int,
    "model_seed": int,
    "context_len": int,
    "embed_dim": int,
    "hidden_dim": int,
    "batch_size": int,
    "epochs": int,
    "warmup_ratio": float,
    "train_seed": int,
    "log_every": int,
    "optimizer": str,
    "sft_epochs": int,
    "sft_learning_rate": float,
    "eval_examples": int,
    "degen_threshold": float,
    "degen_temperature": float,
}

_SWEEP_DEFAULTS = {
    "betas": DEFAULT_BETAS,
    "learning_rates": "0.002,0.01",
    "lambda": 50.0,
    "n_examples": 2000,
    "vocab_size": DEFAULT_VOCAB,
    "prompt_len": DEFAULT_PROMPT_LEN,
    "completion_len": DEFAULT_COMPLETION_LEN,
    "edit_distance": 1,
    "data_seed": 7,
    "model_seed": 11,
    "context_len": DEFAULT_CONTEXT_LEN,
    "embed_dim": DEFAULT_EMBED_DIM,
    "hidden_dim": DEFAULT_HIDDEN_DIM,
    "batch_size": 32,
    "epochs": 1,
    "warmup_ratio": 0.1,
    "train_seed": 13,
    "log_every": 1,
    "optimizer": "adam",
    "sft_epochs": 25,
    "sft_learning_rate": 0.01,
    "eval_examples": 512,
    "degen_threshold": None,
    "degen_temperature": 1.0,
}


def parse_sweep_config(path) -> dict:
    """Flat key = value file; '#' starts a comment, blank lines ignored."""
    values = dict(_SWEEP_DEFAULTS)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read sweep config {path}: {e}")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key not in _SWEEP_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if value == "":
            values[key] = None
            continue
        try:
            values[key] = _SWEEP_KEYS[key](value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}")
    if "methods" not in values or values.get("methods") in (None, ""):
        raise UsageError(f"{path}: missing required key 'methods'")
    return values


def build_sweep_spec(values: dict):
    from .analysis import SweepSpec

    betas = _float_list(values["betas"])
    lrs = _float_list(values["learning_rates"])
    methods = []
    for name in values["methods"].split(","):
        m = Method.parse(name)  # unknown method name -> usage error upstream
        lam = values["lambda"] if m is Method.DPOP else None
        methods.append(LossSpec(method=m, beta=betas[0], lam=lam))
    data = DatasetSpec(
        n_examples=values["n_examples"],
        vocab_size=values["vocab_size"],
        prompt_len=values["prompt_len"],
        completion_len=values["completion_len"],
        edit_distance=values["edit_distance"],
        seed=values["data_seed"],
    )
    model = ModelConfig(
        vocab_size=values["vocab_size"],
        context_len=values["context_len"],
        embed_dim=values["embed_dim"],
        hidden_dim=values["hidden_dim"],
        seed=values["model_seed"],
    )
    base_train = TrainConfig(
        loss_spec=methods[0],
        learning_rate=lrs[0],
        batch_size=values["batch_size"],
        epochs=values["epochs"],
        warmup_ratio=values["warmup_ratio"],
        seed=values["train_seed"],
        log_every=values["log_every"],
        optimizer=values["optimizer"],
    )
    return SweepSpec(
        methods=methods,
        betas=betas,
        learning_rates=lrs,
        train=base_train,
        data=data,
        model=model,
        sft_epochs=values["sft_epochs"],
        sft_learning_rate=values["sft_learning_rate"],
        eval_examples=values["eval_examples"],
        degen_threshold=values["degen_threshold"],
        degen_temperature=values["degen_temperature"],
    )


def cmd_sweep(args) -> int:
    from .analysis import run_sweep

    t0 = time.monotonic()
    values = parse_sweep_config(args.config)
    spec = build_sweep_spec(values)
    print(f"sweep: {spec.n_cells()} cells "
          f"({len(spec.methods)} methods x {len(spec.betas)} betas x "
          f"{len(spec.learning_rates)} learning rates)")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = run_sweep(spec, out_dir=out_dir, jobs=args.jobs)
    write_manifest(out_dir / "manifest.json", "sweep", args, SWEEP_FLAGS,
                   seeds={"data_seed": values["data_seed"],
                          "model_seed": values["model_seed"],
                          "train_seed": values["train_seed"]},
                   outputs=[out_dir / "summary.csv"], t0=t0)
    n_bad = sum(1 for c in cells if c.status != "ok")
    print(f"done: {len(cells)} cells, {n_bad} crashed/degenerate; summary at "
          f"{out_dir / 'summary.csv'}")
    return 0


# ----------------------------------------------------------------- sample

SAMPLE_FLAGS = [
    ("ckpt", "--ckpt"),
    ("prompt", "--prompt"),
    ("max_len", "--max-len"),
    ("temperature", "--temperature"),
    ("seed", "--seed"),
    ("out", "--out"),
]


def cmd_sample(args) -> int:
    t0 = time.monotonic()
    model = load_model(args.ckpt)
    prompt = _int_list(args.prompt)
    if not prompt:
        raise UsageError("--prompt must name at least one token")
    tokens = sample(model, prompt, args.max_len, args.temperature, args.seed)
    line = " ".join(str(t) for t in tokens)
    print(line)
    if args.out is not None:
        out = Path(args.out)
        out.write_text(line + "\n", encoding="utf-8")
        write_manifest(out.with_name(out.name + ".manifest.json"), "sample", args,
                       SAMPLE_FLAGS, seeds={"seed": args.seed}, outputs=[out], t0=t0)
    return 0


# ----------------------------------------------------------------- report

REPORT_FLAGS = [
    ("sweep_dir", "--sweep-dir"),
    ("out_dir", "--out-dir"),
]


def cmd_report(args) -> int:
    from .analysis import read_summary_csv, _cell_tag
    from .plots import accuracy_report_figure, save_figure

    t0 = time.monotonic()
    sweep_dir = Path(args.sweep_dir)
    summary = sweep_dir / "summary.csv"
    missing = []
    if not summary.exists():
        missing.append(summary)
        cells = []
    else:
        cells = read_summary_csv(summary)
        for cell in cells:
            metrics = sweep_dir / _cell_tag(cell.method, cell.beta, cell.lr) / "metrics.csv"
            if not metrics.exists():
                missing.append(metrics)
    if missing:
        print("missing sweep artifacts:", file=sys.stderr)
        for path in missing:
            print(f"  {path}", file=sys.stderr)
        return 1

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    methods = sorted({c.method for c in cells})
    grid = sorted({(c.beta, c.lr) for c in cells})
    by_key = {(c.method, c.beta, c.lr): c for c in cells}

    report_path = out_dir / "report.csv"
    with open(report_path, "w", encoding="utf-8") as f:
        cols = ["beta", "lr"]
        for m in methods:
            cols += [f"{m}_accuracy", f"{m}_margin", f"{m}_status"]
        f.write(",".join(cols) + "\n")
        for beta, lr in grid:
            row = [f"{beta:.9g}", f"{lr:.9g}"]
            for m in methods:
                cell = by_key.get((m, beta, lr))
                if cell is None:
                    row += ["", "", "absent"]
                else:
                    row += [f"{cell.toy_accuracy:.9g}", f"{cell.final_margin:.9g}", cell.status]
            f.write(",".join(row) + "\n")

    svg_path = out_dir / "report_accuracy.svg"
    save_figure(accuracy_report_figure(cells), svg_path)
    write_manifest(out_dir / "report.manifest.json", "report", args, REPORT_FLAGS,
                   seeds={}, outputs=[report_path, svg_path], t0=t0)
    print(f"wrote {report_path} and {svg_path}")
    return 0


# ------------------------------------------------------------------ rerun

def cmd_rerun(args) -> int:
    path = Path(args.manifest)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        print(f"cannot read manifest: {e}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as e:
        print(f"malformed manifest {path}: {e}", file=sys.stderr)
        return 1
    argv = payload.get("argv")
    if not isinstance(argv, list) or not all(isinstance(a, str) for a in argv):
        print(f"manifest {path} carries no usable argv", file=sys.stderr)
        return 1
    return main(argv)


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefopt",
        description="Preference-optimization lab: dpo / dpop / minordpo on a tiny policy.",
    )
    parser.add_argument("--version", action="version", version=f"prefopt {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("datagen", help="generate a synthetic preference dataset (JSONL)")
    p.add_argument("--n", type=int, default=2000, help="number of examples")
    p.add_argument("--vocab", type=int, default=DEFAULT_VOCAB, help="vocabulary size")
    p.add_argument("--prompt-len", type=int, default=DEFAULT_PROMPT_LEN)
    p.add_argument("--completion-len", type=int, default=DEFAULT_COMPLETION_LEN)
    p.add_argument("--edit-distance", type=int, default=1,
                   help="Hamming distance between chosen and rejected")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", help="preference-train a model and log reward metrics")
    p.add_argument("--data", required=True, help="JSONL dataset path")
    p.add_argument("--method", required=True, choices=[m.value for m in Method])
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="dpop compensation weight (dpop only)")
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--warmup-ratio", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--log-every", type=int, default=1)
    p.add_argument("--vocab", type=int, default=DEFAULT_VOCAB)
    p.add_argument("--context-len", type=int, default=DEFAULT_CONTEXT_LEN)
    p.add_argument("--embed-dim", type=int, default=DEFAULT_EMBED_DIM)
    p.add_argument("--hidden-dim", type=int, default=DEFAULT_HIDDEN_DIM)
    p.add_argument("--model-seed", type=int, default=11)
    p.add_argument("--sft-epochs", type=int, default=0,
                   help="supervised epochs on chosen before preference training")
    p.add_argument("--sft-lr", type=float, default=0.01)
    p.add_argument("--init-from", default=None, help="checkpoint to start from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="finite-difference check of all three gradients")
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--coords", type=int, default=None,
                   help="check a random subset of this many coordinates")
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=float, default=50.0)
    p.add_argument("--csv", default=None, help="also write a machine-readable report")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("curves", help="emit the dynamic-coefficient curve table and figure")
    p.add_argument("--betas", default=DEFAULT_BETAS)
    p.add_argument("--margin-min", type=float, default=-10.0)
    p.add_argument("--margin-max", type=float, default=40.0)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--name", default="coefficient")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("sweep", help="run a (method x beta x lr) comparison grid")
    p.add_argument("--config", required=True, help="key=value sweep config file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sample", help="sample a completion from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--prompt", required=True, help="comma-separated token ids")
    p.add_argument("--max-len", type=int, default=DEFAULT_COMPLETION_LEN)
    p.add_argument("--temperature", type=float, default=1.0,
                   help="0 means greedy decoding")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="also write the tokens to a file")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("report", help="merge sweep outputs into one comparison table")
    p.add_argument("--sweep-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("rerun", help="re-execute a command from its run manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (InvalidSpecError, InvalidConfigError, InvalidInputError,
            TokenRangeError, SequenceLengthError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NumericalAbort as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
