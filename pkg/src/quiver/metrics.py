"""Trace post-processing: regret, query mix, and cross-seed aggregation.

Everything here is a pure function over finished run traces, so batches
of runs can be scored independently and merged afterwards.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from quiver.problems import FrontSample

CSV_COLUMNS = ("problem", "policy", "seed", "regret", "ia_fraction",
               "n_eval", "n_ps", "n_ia", "spend_eval", "spend_ps",
               "spend_ia", "final_entropy")


@dataclass
class RunMetrics:
    problem: str
    policy: str
    seed: int
    regret: float
    ia_fraction: float | None   # None when the run made no queries
    n_eval: int
    n_ps: int
    n_ia: int
    spend_eval: float
    spend_ps: float
    spend_ia: float
    final_entropy: float


def utility_regret(trace, w_star, oracle: FrontSample) -> float:
    """Utility gap between the best front point and the recommendation.

    Utilities are in value space (u = -w.f), so the gap is the oracle-grid
    maximum minus the recommendation's utility under the true weights.  A
    negative gap means the recommendation beat every grid point; within
    1e-9 that is grid coarseness and is clamped to zero, beyond it the
    front sampler and the evaluator disagree and we refuse to report a
    number.
    """
    if trace.final_f is None:
        raise ValueError("trace has no recommendation")
    w = np.asarray(w_star, dtype=float)
    best = float(np.max(-oracle.points @ w))
    achieved = float(-(np.asarray(trace.final_f, dtype=float) @ w))
    regret = best - achieved
    if regret < -1e-9:
        raise ValueError(
            f"regret {regret:.3e} is significantly negative: the sampled "
            f"front (resolution {oracle.resolution}) and the evaluator "
            "disagree about what is attainable")
    return max(regret, 0.0)


def ia_fraction(trace):
    """Share of preference queries answered in absolute form.

    Returns None for query-free runs (the EvalOnly rows), where the
    fraction has no meaning.
    """
    n_ps = sum(1 for s in trace.steps if s.kind == "PS")
    n_ia = sum(1 for s in trace.steps if s.kind == "IA")
    if n_ps + n_ia == 0:
        return None
    return n_ia / (n_ps + n_ia)


def run_metrics(trace, w_star, oracle: FrontSample) -> RunMetrics:
    """Score one finished trace against the true weights."""
    s = trace.summary
    return RunMetrics(
        problem=trace.config["problem"],
        policy=trace.config["policy"],
        seed=trace.config["seed"],
        regret=utility_regret(trace, w_star, oracle),
        ia_fraction=ia_fraction(trace),
        n_eval=s["n_eval"],
        n_ps=s["n_ps"],
        n_ia=s["n_ia"],
        spend_eval=s["spend_eval"],
        spend_ps=s["spend_ps"],
        spend_ia=s["spend_ia"],
        final_entropy=s["final_entropy"],
    )


_NUMERIC_FIELDS = ("regret", "ia_fraction", "n_eval", "n_ps", "n_ia",
                   "spend_eval", "spend_ps", "spend_ia", "final_entropy")


def aggregate(metrics) -> dict:
    """Per-field mean and sample std (n-1 denominator) across runs.

    ia_fraction values of None are dropped before averaging; if every run
    in the group is query-free the field is absent from the summary.  A
    single-run group reports std 0 and is flagged as such.
    """
    metrics = list(metrics)
    if not metrics:
        raise ValueError("nothing to aggregate")
    out = {"n": len(metrics), "single_run": len(metrics) == 1}
    for name in _NUMERIC_FIELDS:
        values = [getattr(m, name) for m in metrics]
        values = [v for v in values if v is not None]
        if not values:
            continue
        arr = np.asarray(values, dtype=float)
        std = 0.0 if arr.size == 1 else float(np.std(arr, ddof=1))
        out[name] = {"mean": float(arr.mean()), "std": std}
    return out


def _row(m: RunMetrics) -> list:
    row = []
    for col in CSV_COLUMNS:
        v = getattr(m, col)
        row.append("" if v is None else v)
    return row


def write_metrics_csv(path, metrics) -> None:
    """One row per run, fixed column order, None rendered as empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for m in metrics:
            writer.writerow(_row(m))


def write_aggregate_csv(path, groups) -> None:
    """Aggregate rows keyed by (problem, policy): mean and std columns.

    `groups` maps (problem, policy) -> list of RunMetrics.
    """
    stat_cols = [c for c in CSV_COLUMNS if c not in ("problem", "policy",
                                                     "seed")]
    header = ["problem", "policy", "n_runs"]
    for c in stat_cols:
        header += [f"{c}_mean", f"{c}_std"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for (problem, policy), runs in sorted(groups.items()):
            summary = aggregate(runs)
            row = [problem, policy, summary["n"]]
            for c in stat_cols:
                if c in summary:
                    row += [summary[c]["mean"], summary[c]["std"]]
                else:
                    row += ["", ""]
            writer.writerow(row)


def group_by_problem_policy(metrics) -> dict:
    groups: dict = {}
    for m in metrics:
        groups.setdefault((m.problem, m.policy), []).append(m)
    return groups


__all__ = ["RunMetrics", "utility_regret", "ia_fraction", "run_metrics",
           "aggregate", "write_metrics_csv", "write_aggregate_csv",
           "group_by_problem_policy", "CSV_COLUMNS"]
