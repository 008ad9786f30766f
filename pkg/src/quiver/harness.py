"""Experiment grids: config files, seeded run batches, tables, replay.

A grid is the cross product problems x policies x seeds (x optional
sweep values).  Every cell maps to one orchestrator run whose random
streams are derived by hashing the cell coordinates, so re-running any
grid — at any parallelism level — reproduces every trace byte for byte.

The decision maker attached to a cell is derived *without* the policy
(and without the sweep value) in the hash: seed index 3 on dtlz2-3 means
the same latent weights and the same response noise no matter which
policy is interviewing, which keeps cross-policy comparisons paired.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

import quiver
from quiver.decision_makers import SyntheticDM, draw_dm_weights
from quiver.metrics import (
    group_by_problem_policy,
    run_metrics,
    write_aggregate_csv,
    write_metrics_csv,
)
from quiver.orchestrator import RunConfig, RunTrace, StepRecord, run
from quiver.problems import get_problem, sample_front

SWEEP_KEYS = ("cost_ratio", "fatigue_alpha")

# RunConfig overrides a config file may set in its [run] section
_RUN_FLOATS = ("budget", "c_eval", "c_ps", "c_ia0", "fatigue_alpha",
               "sigma_ps", "sigma_ia", "ia_eps", "eval_voc_weight",
               "exploration_weight")
_RUN_INTS = ("pop_size", "particles", "eig_samples", "prescreen_multiplier",
             "knn_k")


@dataclass
class ExperimentGrid:
    problems: list
    policies: list
    seeds: list
    master_seed: int = 0
    sweep: dict | None = None           # {"cost_ratio": [...]} etc.
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sweep:
            if len(self.sweep) != 1:
                raise ValueError("at most one sweep axis")
            key = next(iter(self.sweep))
            if key not in SWEEP_KEYS:
                raise ValueError(f"unknown sweep key {key!r}")

    def cells(self):
        """Every (problem, policy, seed_index, sweep_item) combination."""
        if self.sweep:
            key = next(iter(self.sweep))
            sweep_items = [(key, v) for v in self.sweep[key]]
        else:
            sweep_items = [None]
        for sweep_item in sweep_items:
            for problem in self.problems:
                for policy in self.policies:
                    for seed in self.seeds:
                        yield problem, policy, seed, sweep_item


def load_config(path) -> ExperimentGrid:
    """Parse an INI-style grid description.

    Sections: [grid] with problems/policies/seeds/master_seed, optional
    [sweep] with exactly one of cost_ratio / fatigue_alpha, optional
    [run] with orchestrator parameter overrides.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    if "grid" not in parser:
        raise ValueError("config needs a [grid] section")
    grid = parser["grid"]

    def split(value):
        return [v.strip() for v in value.split(",") if v.strip()]

    problems = split(grid.get("problems", ""))
    policies = split(grid.get("policies", ""))
    seeds = [int(s) for s in split(grid.get("seeds", ""))]
    master_seed = grid.getint("master_seed", fallback=0)

    sweep = None
    if "sweep" in parser and parser["sweep"]:
        items = dict(parser["sweep"])
        if len(items) != 1:
            raise ValueError("[sweep] must define exactly one axis")
        key, raw = next(iter(items.items()))
        sweep = {key: [float(v) for v in split(raw)]}

    overrides = {}
    if "run" in parser:
        for name, raw in parser["run"].items():
            if name in _RUN_FLOATS:
                overrides[name] = float(raw)
            elif name in _RUN_INTS:
                overrides[name] = int(raw)
            else:
                raise ValueError(f"unknown [run] override {name!r}")

    return ExperimentGrid(problems=problems, policies=policies, seeds=seeds,
                          master_seed=master_seed, sweep=sweep,
                          overrides=overrides)


# --------------------------------------------------------------------------
# seed derivation
# --------------------------------------------------------------------------

def _hash_stream(*parts) -> int:
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little")


def derive_streams(master_seed, problem, policy, seed, sweep_item) -> dict:
    """Named integer seeds for one cell.

    `run` feeds the optimizer loop and depends on everything; `w_star`
    and `dm_noise` identify the decision maker and deliberately omit the
    policy and sweep value so a seed index denotes one DM per problem.
    """
    sweep_tag = "" if sweep_item is None else f"{sweep_item[0]}={sweep_item[1]}"
    return {
        "run": _hash_stream("run", master_seed, problem, policy, sweep_tag,
                            seed),
        "w_star": _hash_stream("w_star", master_seed, problem, seed),
        "dm_noise": _hash_stream("dm_noise", master_seed, problem, seed),
    }


def cell_name(problem, policy, seed, sweep_item) -> str:
    name = f"{problem}__{policy}__s{seed}"
    if sweep_item is not None:
        name += f"__{sweep_item[0]}-{sweep_item[1]:g}"
    return name


def build_run_config(problem, policy, seed, sweep_item, overrides,
                     run_seed) -> RunConfig:
    params = dict(overrides)
    if sweep_item is not None:
        key, value = sweep_item
        if key == "cost_ratio":
            params["c_ia0"] = value * params.get("c_ps", 1.0)
        else:
            params["fatigue_alpha"] = value
    return RunConfig(problem=problem, policy=policy, seed=run_seed, **params)


def run_cell(problem, policy, seed, sweep_item, master_seed,
             overrides) -> tuple:
    """Execute one grid cell; returns (name, trace, w_star, streams)."""
    streams = derive_streams(master_seed, problem, policy, seed, sweep_item)
    config = build_run_config(problem, policy, seed, sweep_item, overrides,
                              streams["run"])
    spec = get_problem(problem)
    w_star = draw_dm_weights(spec.m, np.random.default_rng(streams["w_star"]))
    dm = SyntheticDM(w_star, np.random.default_rng(streams["dm_noise"]))
    trace = run(config, dm)
    return cell_name(problem, policy, seed, sweep_item), trace, w_star, streams


# --------------------------------------------------------------------------
# trace files
# --------------------------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_trace(path, name, trace: RunTrace, w_star, streams,
                seed_index) -> None:
    """Serialize one run as JSONL: header, one line per step, result."""
    lines = [_dumps({"type": "header", "run": name,
                     "seed_index": seed_index,
                     "config": trace.config,
                     "w_star": (None if w_star is None
                                else np.asarray(w_star).tolist()),
                     "streams": streams,
                     "version": quiver.__version__})]
    for step in trace.steps:
        lines.append(_dumps({"type": "step", **step.to_dict()}))
    lines.append(_dumps({"type": "result",
                         "final_x": np.asarray(trace.final_x).tolist(),
                         "final_f": np.asarray(trace.final_f).tolist(),
                         "summary": trace.summary}))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace(path) -> tuple:
    """Inverse of write_trace: returns (RunTrace, w_star, header dict)."""
    header, steps, result = None, [], None
    with open(path) as fh:
        for line in fh:
            obj = json.loads(line)
            kind = obj.pop("type")
            if kind == "header":
                header = obj
            elif kind == "step":
                steps.append(StepRecord(**obj))
            else:
                result = obj
    if header is None or result is None:
        raise ValueError(f"truncated trace file: {path}")
    trace = RunTrace(config=header["config"], steps=steps,
                     final_x=np.asarray(result["final_x"]),
                     final_f=np.asarray(result["final_f"]),
                     summary=result["summary"])
    return trace, np.asarray(header["w_star"]), header


# --------------------------------------------------------------------------
# grid execution
# --------------------------------------------------------------------------

def _run_cell_task(args):
    problem, policy, seed, sweep_item, master_seed, overrides = args
    return run_cell(problem, policy, seed, sweep_item, master_seed, overrides)


def _metrics_paths(out: Path, sweep_item):
    if sweep_item is None:
        return out / "metrics.csv", out / "aggregate.csv"
    key, value = sweep_item
    tag = f"{key}-{value:g}"
    return out / f"metrics__{tag}.csv", out / f"aggregate__{tag}.csv"


def grid_fingerprint(grid: ExperimentGrid) -> str:
    payload = _dumps({"problems": grid.problems, "policies": grid.policies,
                      "seeds": grid.seeds, "master_seed": grid.master_seed,
                      "sweep": grid.sweep, "overrides": grid.overrides})
    return hashlib.sha256(payload.encode()).hexdigest()


def run_grid(grid: ExperimentGrid, out_dir, parallelism: int = 1) -> dict:
    """Execute every cell, write traces + metrics CSVs + manifest.

    A failed cell is recorded in the manifest and does not stop the
    others.  Returns the manifest dict (also written to manifest.json).
    """
    out = Path(out_dir)
    traces_dir = out / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%S")

    cells = list(grid.cells())
    tasks = [(p, pol, s, sw, grid.master_seed, grid.overrides)
             for p, pol, s, sw in cells]

    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(_run_cell_task, t) for t in tasks]
            outcomes = []
            for future in futures:
                try:
                    outcomes.append(future.result())
                except Exception as exc:          # noqa: BLE001
                    outcomes.append(exc)
    else:
        outcomes = []
        for t in tasks:
            try:
                outcomes.append(_run_cell_task(t))
            except Exception as exc:              # noqa: BLE001
                outcomes.append(exc)

    fronts = {}
    runs_manifest = []
    by_sweep: dict = {}
    for (problem, policy, seed, sweep_item), outcome in zip(cells, outcomes):
        entry = {"run": cell_name(problem, policy, seed, sweep_item),
                 "problem": problem, "policy": policy, "seed_index": seed,
                 "sweep": None if sweep_item is None else list(sweep_item)}
        if isinstance(outcome, Exception):
            entry["status"] = "failed"
            entry["error"] = f"{type(outcome).__name__}: {outcome}"
            runs_manifest.append(entry)
            continue
        name, trace, w_star, streams = outcome
        write_trace(traces_dir / f"{name}.jsonl", name, trace, w_star,
                    streams, seed)
        if problem not in fronts:
            fronts[problem] = sample_front(get_problem(problem),
                                           _oracle_resolution(problem))
        m = run_metrics(trace, w_star, fronts[problem])
        m = replace(m, seed=seed)   # report the grid index, not the raw rng seed
        by_sweep.setdefault(None if sweep_item is None else tuple(sweep_item),
                            []).append(m)
        entry["status"] = "ok"
        entry["trace"] = f"traces/{name}.jsonl"
        entry["streams"] = streams
        runs_manifest.append(entry)

    if not by_sweep:
        by_sweep[None] = []     # empty grid still gets header-only CSVs
    csv_files = []
    for sweep_key, metrics in by_sweep.items():
        sweep_item = None if sweep_key is None else sweep_key
        per_run, agg = _metrics_paths(out, sweep_item)
        write_metrics_csv(per_run, metrics)
        write_aggregate_csv(agg, group_by_problem_policy(metrics))
        csv_files += [per_run.name, agg.name]

    manifest = {
        "config_hash": grid_fingerprint(grid),
        "version": quiver.__version__,
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "parallelism": parallelism,
        "n_runs": len(cells),
        "n_failed": sum(1 for r in runs_manifest if r["status"] == "failed"),
        "csv_files": sorted(csv_files),
        "runs": runs_manifest,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                  sort_keys=True) + "\n")
    return manifest


def _oracle_resolution(problem: str) -> int:
    from quiver.problems import default_oracle_resolution
    return default_oracle_resolution(get_problem(problem))


# --------------------------------------------------------------------------
# replay and oracle precomputation
# --------------------------------------------------------------------------

def replay(out_dir) -> dict:
    """Recompute every metrics CSV in out_dir from the stored traces."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    fronts = {}
    by_sweep: dict = {}
    for entry in manifest["runs"]:
        if entry["status"] != "ok":
            continue
        trace, w_star, header = read_trace(out / entry["trace"])
        problem = entry["problem"]
        if problem not in fronts:
            fronts[problem] = sample_front(get_problem(problem),
                                           _oracle_resolution(problem))
        m = run_metrics(trace, w_star, fronts[problem])
        m = replace(m, seed=entry["seed_index"])
        key = None if entry["sweep"] is None else tuple(entry["sweep"])
        by_sweep.setdefault(key, []).append(m)
    written = {}
    for sweep_key, metrics in by_sweep.items():
        per_run, agg = _metrics_paths(out, sweep_key)
        write_metrics_csv(per_run, metrics)
        write_aggregate_csv(agg, group_by_problem_policy(metrics))
        written[per_run.name] = len(metrics)
    return written


def precompute_oracle(grid: ExperimentGrid, out_dir) -> Path:
    """Tabulate each (problem, seed) DM's best attainable utility."""
    from quiver.problems import front_optimal_utility

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "oracle.csv"
    lines = ["problem,seed,w_star,front_optimal_utility"]
    for problem in grid.problems:
        spec = get_problem(problem)
        for seed in grid.seeds:
            streams = derive_streams(grid.master_seed, problem, "QUIVER",
                                     seed, None)
            w = draw_dm_weights(spec.m,
                                np.random.default_rng(streams["w_star"]))
            u = front_optimal_utility(spec, w)
            w_text = " ".join(f"{x:.10g}" for x in w)
            lines.append(f"{problem},{seed},{w_text},{u:.10g}")
    path.write_text("\n".join(lines) + "\n")
    return path


# --------------------------------------------------------------------------
# table emission
# --------------------------------------------------------------------------

def _read_csv_rows(path) -> list:
    import csv as _csv
    with open(path, newline="") as fh:
        return list(_csv.DictReader(fh))


def _fmt(x, digits=3):
    return f"{float(x):.{digits}f}"


def _pooled_fraction(row):
    """IA share computed from mean counts, the convention the query-mix
    and sweep tables report (robust when single runs ask few queries)."""
    n_ia = float(row["n_ia_mean"])
    total = n_ia + float(row["n_ps_mean"])
    return _fmt(n_ia / total) if total > 0 else ""


def make_tables(out_dir) -> list:
    """Emit the regret, query-mix, fatigue, and cost-sweep table files.

    Reads the aggregate CSVs produced by run_grid; missing cells become
    blank entries and are listed in tables/warnings.txt.  Output is
    deterministic, so re-running over the same directory is
    byte-identical.
    """
    out = Path(out_dir)
    tables = out / "tables"
    tables.mkdir(exist_ok=True)
    warnings = []
    written = []

    main_agg = out / "aggregate.csv"
    if main_agg.exists():
        rows = _read_csv_rows(main_agg)
        cell = {(r["problem"], r["policy"]): r for r in rows}
        problems = sorted({r["problem"] for r in rows})
        policies = [p for p in
                    ("QUIVER", "EvalOnly", "PSOnly", "IAOnly",
                     "FixedSchedule", "Random")
                    if any(r["policy"] == p for r in rows)]

        lines = ["problem," + ",".join(policies)]
        for problem in problems:
            parts = [problem]
            for policy in policies:
                r = cell.get((problem, policy))
                if r is None:
                    warnings.append(f"regret table: no runs for "
                                    f"{problem}/{policy}")
                    parts.append("")
                else:
                    parts.append(f"{_fmt(r['regret_mean'])} ± "
                                 f"{_fmt(r['regret_std'])}")
            lines.append(",".join(parts))
        p = tables / "regret_by_policy.csv"
        p.write_text("\n".join(lines) + "\n")
        written.append(p)

        lines = ["problem,n_eval,n_ps,n_ia,ia_fraction"]
        for problem in problems:
            r = cell.get((problem, "QUIVER"))
            if r is None:
                warnings.append(f"query-mix table: no QUIVER runs for "
                                f"{problem}")
                lines.append(f"{problem},,,,")
                continue
            lines.append(
                f"{problem},{_fmt(r['n_eval_mean'], 1)},"
                f"{_fmt(r['n_ps_mean'], 1)},{_fmt(r['n_ia_mean'], 1)},"
                + _pooled_fraction(r))
        p = tables / "query_mix.csv"
        p.write_text("\n".join(lines) + "\n")
        written.append(p)
    else:
        warnings.append("no aggregate.csv: skipped regret and query-mix "
                        "tables")

    for key, fname, header in (
            ("cost_ratio", "ia_fraction_vs_cost.csv",
             "cost_ratio,ia_fraction,ia_fraction_run_std"),
            ("fatigue_alpha", "fatigue.csv",
             "fatigue_alpha,regret_mean,regret_std,ia_fraction,"
             "n_ia_mean,n_ps_mean")):
        files = sorted(out.glob(f"aggregate__{key}-*.csv"),
                       key=lambda p: float(p.stem.split("-", 1)[1]))
        if not files:
            continue
        lines = [header]
        for path in files:
            value = float(path.stem.split("-", 1)[1])
            rows = [r for r in _read_csv_rows(path) if r["policy"] == "QUIVER"]
            if not rows:
                warnings.append(f"{fname}: no QUIVER aggregate in "
                                f"{path.name}")
                continue
            r = rows[0]
            run_std = r.get("ia_fraction_std", "")
            if key == "cost_ratio":
                lines.append(f"{value:g},{_pooled_fraction(r)},"
                             + (_fmt(run_std) if run_std else ""))
            else:
                lines.append(f"{value:g},{_fmt(r['regret_mean'])},"
                             f"{_fmt(r['regret_std'])},"
                             f"{_pooled_fraction(r)},"
                             f"{_fmt(r['n_ia_mean'], 1)},"
                             f"{_fmt(r['n_ps_mean'], 1)}")
        p = tables / fname
        p.write_text("\n".join(lines) + "\n")
        written.append(p)

    (tables / "warnings.txt").write_text(
        "\n".join(warnings) + "\n" if warnings else "")
    return written
