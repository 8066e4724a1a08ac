"""Finite-difference oracle for every analytical gradient path.

Central differences in float64 with a configurable step. Relative error
uses max(|analytic|, |numeric|, 1e-8) as the denominator so coordinates
with near-zero gradient do not blow up the ratio. Probe points whose
clamped reward terms sit within `kink_threshold` of zero are nudged away
from the non-differentiable boundary (or skipped if nudging fails);
boundary conventions are covered by exact unit tests instead.

A central difference of a loss of magnitude F carries roundoff noise of
roughly F * eps / (2 * step) regardless of the gradient's size, so
coordinates whose gradient is far below that noise cannot be certified
by a relative test at any tolerance. Such weak coordinates are instead
required to agree absolutely to within the noise-derived signal
threshold; the relative criterion applies to every coordinate above it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError, ProbeFailure
from .losses import LogProbQuad, LossGrad, LossSpec, Method, batch_loss_terms, reward_triple
from .policy import backward, sequence_log_prob

REL_ERR_FLOOR = 1e-8
DEFAULT_STEP = 1e-5
KINK_THRESHOLD = 1e-3


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of one analytic-vs-numeric comparison.

    n_checked counts the coordinates held to the relative criterion;
    n_weak counts those below the signal threshold, which are held to the
    absolute one.
    """

    method: str
    max_rel_error: float
    max_abs_error: float
    worst_coordinate: int
    n_checked: int
    passed: bool
    tolerance: float
    n_weak: int = 0

    def row(self) -> str:
        return (
            f"{self.method:<10} {self.n_checked:>7d} {self.n_weak:>6d} "
            f"{self.max_rel_error:>12.3e} {self.max_abs_error:>12.3e} "
            f"{self.worst_coordinate:>7d} {'pass' if self.passed else 'FAIL':>5}"
        )

    @staticmethod
    def table_header() -> str:
        return (
            f"{'method':<10} {'coords':>7} {'weak':>6} {'max_rel_err':>12} "
            f"{'max_abs_err':>12} {'worst':>7} {'ok':>5}"
        )


def finite_diff_loss_grad(loss_fn, params: np.ndarray, coords, step: float) -> np.ndarray:
    """Central difference (f(x+e) - f(x-e)) / 2e per requested coordinate.

    Returns the sparse gradient as an array aligned with `coords`. A
    non-finite loss during probing raises ProbeFailure naming the
    coordinate.
    """
    if step <= 0:
        raise InvalidSpecError(f"step must be > 0, got {step}")
    coords = np.asarray(coords, dtype=np.int64)
    if coords.size and (coords.min() < 0 or coords.max() >= params.size):
        raise InvalidSpecError("coordinate index out of range")
    work = params.astype(np.float64, copy=True)
    out = np.empty(coords.size)
    for k, i in enumerate(coords):
        keep = work[i]
        work[i] = keep + step
        f_plus = loss_fn(work)
        work[i] = keep - step
        f_minus = loss_fn(work)
        work[i] = keep
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise ProbeFailure("non-finite loss while probing", int(i))
        out[k] = (f_plus - f_minus) / (2.0 * step)
    return out


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_ERR_FLOOR)
    return np.abs(analytic - numeric) / denom


def _quad(model, ref, example) -> LogProbQuad:
    return LogProbQuad(
        lp_theta_chosen=sequence_log_prob(model, example.prompt, example.chosen),
        lp_theta_rejected=sequence_log_prob(model, example.prompt, example.rejected),
        lp_ref_chosen=sequence_log_prob(ref, example.prompt, example.chosen),
        lp_ref_rejected=sequence_log_prob(ref, example.prompt, example.rejected),
    )


def _near_kink(spec: LossSpec, h_w: float, h_l: float, threshold: float) -> bool:
    if spec.method is Method.DPOP:
        return abs(h_w) < threshold
    if spec.method is Method.MINOR_DPO:
        return abs(h_l) < threshold
    return False


def check_all_methods(
    model,
    ref,
    example,
    specs,
    tolerance: float = 1e-5,
    coords=None,
    step: float = DEFAULT_STEP,
    kink_threshold: float = KINK_THRESHOLD,
    nudge_seed: int = 0,
    min_signal: float | None = None,
) -> list[GradCheckReport]:
    """One report per spec, comparing policy.backward against the oracle.

    `coords` defaults to every parameter when the model has at most 4000,
    otherwise to a seeded 200-coordinate subset. A spec whose probe point
    cannot be nudged off its clamp kink is reported with n_checked == 0.
    `min_signal` (default: derived from the loss magnitude, the step and
    the tolerance) separates relative-checked coordinates from the weak
    ones that only admit an absolute comparison.
    """
    reports = []
    for spec in specs:
        probe = model.clone()
        r = reward_triple(_quad(probe, ref, example))
        if _near_kink(spec, r.chosen, r.reject, kink_threshold):
            rng = np.random.default_rng(nudge_seed)
            for attempt in range(8):
                probe = model.clone()
                probe.params += rng.normal(0.0, 0.05 * (attempt + 1), probe.params.size)
                r = reward_triple(_quad(probe, ref, example))
                if not _near_kink(spec, r.chosen, r.reject, kink_threshold):
                    break
            else:
                reports.append(
                    GradCheckReport(
                        method=spec.method.value,
                        max_rel_error=0.0,
                        max_abs_error=0.0,
                        worst_coordinate=-1,
                        n_checked=0,
                        passed=True,
                        tolerance=tolerance,
                    )
                )
                continue

        quad = _quad(probe, ref, example)
        rt = reward_triple(quad)
        loss, d_c, d_r = batch_loss_terms(rt.chosen, rt.reject, spec)
        analytic = backward(probe, example, LossGrad(float(loss), float(d_c), float(d_r)))

        if coords is None:
            if probe.params.size <= 4000:
                chosen_coords = np.arange(probe.params.size)
            else:
                chosen_coords = np.random.default_rng(nudge_seed).choice(
                    probe.params.size, size=200, replace=False
                )
        else:
            chosen_coords = np.asarray(coords, dtype=np.int64)

        scratch = probe.clone()

        def loss_of(params: np.ndarray) -> float:
            scratch.params[...] = params
            q = _quad(scratch, ref, example)
            t = reward_triple(q)
            value, _, _ = batch_loss_terms(t.chosen, t.reject, spec)
            return float(value)

        numeric = finite_diff_loss_grad(loss_of, probe.params, chosen_coords, step)
        a = analytic[chosen_coords]
        abs_err = np.abs(a - numeric)
        threshold = min_signal
        if threshold is None:
            eps = float(np.finfo(np.float64).eps)
            threshold = 10.0 * abs(float(loss)) * eps / (2.0 * step * tolerance)
        strong = np.maximum(np.abs(a), np.abs(numeric)) >= threshold
        rel = relative_errors(a[strong], numeric[strong])
        weak_ok = bool(np.all(abs_err[~strong] <= threshold))
        if rel.size:
            worst_local = int(np.flatnonzero(strong)[np.argmax(rel)])
            worst = int(chosen_coords[worst_local])
            max_rel = float(rel.max())
        else:
            worst, max_rel = -1, 0.0
        reports.append(
            GradCheckReport(
                method=spec.method.value,
                max_rel_error=max_rel,
                max_abs_error=float(abs_err.max()) if abs_err.size else 0.0,
                worst_coordinate=worst,
                n_checked=int(strong.sum()),
                passed=bool(weak_ok and max_rel <= tolerance),
                tolerance=tolerance,
                n_weak=int((~strong).sum()),
            )
        )
    return reports
