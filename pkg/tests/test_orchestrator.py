"""Run-loop tests: budget accounting, policy dispatch, determinism.

The baseline policies have exactly derivable action counts under the
default cost model (c_eval=5, c_ps=1, c_ia0=1.15, B=500), so most of
these tests pin integer counts rather than stochastic summaries.
"""

import numpy as np
import pytest

from quiver.controller import CostModel
from quiver.decision_makers import QueryRefused, SyntheticDM, draw_dm_weights
from quiver.evolution import Archive, Individual
from quiver.orchestrator import (
    FIXED_CYCLE,
    RunConfig,
    RunState,
    action_kind_probabilities,
    baseline_action_kind,
    random_pair,
    recommend,
    run,
)
from quiver.preferences import init_particles
from quiver import problems


def make_dm(seed, m=3):
    w = draw_dm_weights(m, np.random.default_rng(900 + seed))
    return SyntheticDM(w, np.random.default_rng(1900 + seed))


@pytest.fixture(scope="module")
def evalonly_trace():
    return run(RunConfig(problem="dtlz2-3", policy="EvalOnly", seed=0),
               make_dm(0))


@pytest.fixture(scope="module")
def psonly_trace():
    return run(RunConfig(problem="dtlz2-3", policy="PSOnly", seed=1),
               make_dm(1))


@pytest.fixture(scope="module")
def iaonly_trace():
    return run(RunConfig(problem="dtlz2-3", policy="IAOnly", seed=2),
               make_dm(2))


@pytest.fixture(scope="module")
def fixed_trace():
    return run(RunConfig(problem="dtlz2-3", policy="FixedSchedule", seed=3),
               make_dm(3))


@pytest.fixture(scope="module")
def random_trace():
    return run(RunConfig(problem="dtlz2-3", policy="Random", seed=4),
               make_dm(4))


def post_seed_kinds(trace):
    return [s.kind for s in trace.steps if s.kind != "Seed"]


# ---------------------------------------------------------------- counts

def test_evalonly_exact_counts(evalonly_trace):
    # 20 seed evals + 80 infill evals exhaust B=500 exactly.
    s = evalonly_trace.summary
    assert s["n_eval"] == 100
    assert s["n_ps"] == 0 and s["n_ia"] == 0
    assert s["total_spend"] == pytest.approx(500.0)


def test_psonly_exact_counts(psonly_trace):
    s = psonly_trace.summary
    assert s["n_eval"] == 20
    assert s["n_ps"] == 400
    assert s["n_ia"] == 0
    assert s["total_spend"] == pytest.approx(500.0)


def test_iaonly_exact_counts(iaonly_trace):
    # 400 budget / 1.15 per query -> 347 queries (spend 399.05), then the
    # 0.95 remainder affords nothing in the IA-only repertoire.
    s = iaonly_trace.summary
    assert s["n_eval"] == 20
    assert s["n_ia"] == 347
    assert s["n_ps"] == 0
    assert s["total_spend"] == pytest.approx(100.0 + 347 * 1.15)


def test_fixed_schedule_cycle_order(fixed_trace):
    kinds = post_seed_kinds(fixed_trace)
    assert kinds[:8] == ["Eval", "PS", "Eval", "IA", "Eval", "PS", "Eval", "IA"]
    assert tuple(FIXED_CYCLE) == ("Eval", "PS", "Eval", "IA")


def test_fixed_schedule_exact_counts(fixed_trace):
    # One cycle costs 5+1+5+1.15 = 12.15.  After seeding, 400 remains:
    # 32 full cycles spend 388.80, leaving 11.20, which affords
    # Eval(5) + PS(1) + Eval(5) = 11 before the next IA (1.15 > 0.20)
    # and every cheaper fallback are unaffordable.
    s = fixed_trace.summary
    assert s["n_eval"] == 20 + 66
    assert s["n_ps"] == 33
    assert s["n_ia"] == 32
    assert s["total_spend"] == pytest.approx(499.8)


def test_budget_never_exceeded(evalonly_trace, psonly_trace, iaonly_trace,
                               fixed_trace, random_trace):
    for trace in (evalonly_trace, psonly_trace, iaonly_trace, fixed_trace,
                  random_trace):
        budget = trace.config["budget"]
        assert trace.summary["total_spend"] <= budget + 1e-9
        spends = [s.cumulative_spend for s in trace.steps]
        assert all(b >= a for a, b in zip(spends, spends[1:]))


def test_archive_growth_tracks_eval_actions(evalonly_trace, psonly_trace,
                                            iaonly_trace, fixed_trace,
                                            random_trace):
    for trace in (evalonly_trace, psonly_trace, iaonly_trace, fixed_trace,
                  random_trace):
        n_eval_steps = sum(1 for s in trace.steps if s.kind == "Eval")
        assert trace.summary["n_eval"] == 20 + n_eval_steps


def test_summary_counts_match_step_kinds(random_trace):
    kinds = post_seed_kinds(random_trace)
    s = random_trace.summary
    assert kinds.count("PS") == s["n_ps"]
    assert kinds.count("IA") == s["n_ia"]
    assert kinds.count("Eval") == s["n_eval"] - 20


# ------------------------------------------------------------ seed phase

def test_budget_100_is_seed_only():
    trace = run(RunConfig(problem="dtlz2-3", policy="QUIVER", seed=5,
                          budget=100.0), make_dm(5))
    s = trace.summary
    assert s["n_eval"] == 20
    assert s["n_ps"] == 0 and s["n_ia"] == 0
    assert s["total_spend"] == pytest.approx(100.0)
    assert [st.kind for st in trace.steps] == ["Seed"]


def test_small_budget_shrinks_seed():
    trace = run(RunConfig(problem="dtlz2-3", policy="EvalOnly", seed=6,
                          budget=30.0), make_dm(6))
    # min(pop_size, floor(30 / 5)) = 6 seed points exhaust the budget.
    assert trace.steps[0].payload["n"] == 6
    assert trace.summary["n_eval"] == 6
    assert trace.summary["total_spend"] == pytest.approx(30.0)


# ---------------------------------------------------------- determinism

def test_same_seed_reproduces_trace():
    def once():
        return run(RunConfig(problem="dtlz2-3", policy="PSOnly", seed=7,
                             budget=150.0), make_dm(7))

    a, b = once(), once()
    assert len(a.steps) == len(b.steps)
    for sa, sb in zip(a.steps, b.steps):
        assert sa.kind == sb.kind
        assert sa.payload == sb.payload
        assert sa.cost == sb.cost
        assert sa.entropy == sb.entropy
    assert np.array_equal(a.final_f, b.final_f)
    assert a.summary == b.summary


def test_different_seed_changes_trace():
    a = run(RunConfig(problem="dtlz2-3", policy="EvalOnly", seed=8,
                      budget=150.0), make_dm(8))
    b = run(RunConfig(problem="dtlz2-3", policy="EvalOnly", seed=9,
                      budget=150.0), make_dm(8))
    assert not np.array_equal(a.final_x, b.final_x)


# -------------------------------------------------------- random policy

def test_action_kind_probabilities_inverse_cost():
    probs = action_kind_probabilities(CostModel())
    z = 1 / 5.0 + 1 / 1.0 + 1 / 1.15
    assert probs["Eval"] == pytest.approx((1 / 5.0) / z)
    assert probs["PS"] == pytest.approx(1.0 / z)
    assert probs["IA"] == pytest.approx((1 / 1.15) / z)
    assert probs["Eval"] == pytest.approx(0.0966386, abs=1e-6)
    assert sum(probs.values()) == pytest.approx(1.0)


def test_random_baseline_sampling_frequencies():
    cm = CostModel()
    rng = np.random.default_rng(0)
    draws = [baseline_action_kind("Random", 0, cm, 1e9, rng)
             for _ in range(4000)]
    probs = action_kind_probabilities(cm)
    for kind in ("Eval", "PS", "IA"):
        assert draws.count(kind) / 4000 == pytest.approx(probs[kind],
                                                         abs=0.03)


def test_random_pair_uniform_over_unordered_pairs():
    rng = np.random.default_rng(1)
    n = 8
    counts = {}
    draws = 20000
    for _ in range(draws):
        i, j = random_pair(n, rng)
        assert 0 <= i < j < n
        counts[(i, j)] = counts.get((i, j), 0) + 1
    assert len(counts) == n * (n - 1) // 2
    expected = draws / len(counts)
    # chi-square against uniformity; 27 dof, 99.9th percentile ~= 55.5
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 55.5


# ------------------------------------------------------- fall-through

def test_baseline_fall_through_and_termination():
    cm = CostModel()
    rng = np.random.default_rng(2)
    # FixedSchedule wants Eval (index 0) but can only afford PS.
    assert baseline_action_kind("FixedSchedule", 0, cm, 2.0, rng) == "PS"
    # Pure policies never borrow another modality.
    assert baseline_action_kind("EvalOnly", 0, cm, 2.0, rng) is None
    assert baseline_action_kind("PSOnly", 0, cm, 0.5, rng) is None
    assert baseline_action_kind("IAOnly", 0, cm, 1.0, rng) is None
    assert baseline_action_kind("IAOnly", 0, cm, 1.2, rng) == "IA"


# ------------------------------------------------------- recommendation

def test_recommend_uniform_weights_scan():
    archive = Archive()
    F = np.array([[1.0, 1.0], [0.2, 0.9], [0.9, 0.2]])
    for k, f in enumerate(F):
        archive.add(np.array([float(k), 0.0]), f)
    ps = init_particles(2, 64, np.ones(2), np.random.default_rng(3))
    x, f = recommend(ps, archive, uniform_weights=True)
    # mean utility -(f1+f2)/2: best is either of the 0.55s; earliest wins
    assert np.array_equal(f, F[1])


def test_recommend_uses_posterior_mean():
    archive = Archive()
    archive.add(np.zeros(2), np.array([1.0, 0.0]))
    archive.add(np.ones(2), np.array([0.0, 1.0]))
    rng = np.random.default_rng(4)
    ps = init_particles(2, 4096, np.array([400.0, 1.0]), rng)
    # posterior mass concentrated on w ~ (1, 0): utility of f=[1,0] is
    # about -1, of f=[0,1] about 0, so the second point wins.
    x, f = recommend(ps, archive)
    assert np.array_equal(f, np.array([0.0, 1.0]))


def test_recommend_empty_archive_raises():
    ps = init_particles(2, 16, np.ones(2), np.random.default_rng(5))
    with pytest.raises(ValueError):
        recommend(ps, Archive())


# ------------------------------------------------------------- refusals

class StubbornDM:
    def answer_ps(self, a, b):
        raise QueryRefused("no")

    def answer_ia(self, a, b, dim):
        raise QueryRefused("no")


class WarmupDM:
    """Refuses the first few queries, then delegates to a synthetic DM."""

    def __init__(self, refusals, inner):
        self.left = refusals
        self.inner = inner

    def _maybe(self):
        if self.left > 0:
            self.left -= 1
            raise QueryRefused("later")

    def answer_ps(self, a, b):
        self._maybe()
        return self.inner.answer_ps(a, b)

    def answer_ia(self, a, b, dim):
        self._maybe()
        return self.inner.answer_ia(a, b, dim)


def test_refusals_cost_nothing_and_stop_the_run():
    trace = run(RunConfig(problem="dtlz2-3", policy="PSOnly", seed=10),
                StubbornDM())
    refusal_steps = [s for s in trace.steps if s.kind == "Refusal"]
    assert len(refusal_steps) == 11          # stops past 10 consecutive
    assert all(s.cost == 0.0 for s in refusal_steps)
    assert trace.summary["n_ps"] == 0
    assert trace.summary["total_spend"] == pytest.approx(100.0)


def test_refusal_streak_resets_on_answer():
    dm = WarmupDM(3, make_dm(11))
    trace = run(RunConfig(problem="dtlz2-3", policy="PSOnly", seed=11,
                          budget=110.0), dm)
    assert sum(1 for s in trace.steps if s.kind == "Refusal") == 3
    assert trace.summary["n_ps"] == 10
    assert trace.summary["total_spend"] == pytest.approx(110.0)


# ------------------------------------------------------ offspring batch

def test_fresh_candidates_size_and_novelty():
    config = RunConfig(problem="dtlz2-3", policy="EvalOnly", seed=12)
    rng = np.random.default_rng(12)
    state = RunState(config, make_dm(12), rng)
    spec = problems.get_problem("dtlz2-3")
    pop = []
    for _ in range(config.pop_size):
        x = rng.uniform(spec.lower, spec.upper)
        f = problems.evaluate(spec, x)
        state.archive.add(x, f)
        pop.append(Individual(x=x, f=f))
    state.population = pop
    cands = state.fresh_candidates()
    assert cands.shape == (config.pop_size, spec.d)
    for x in cands:
        assert not state.archive.contains(x)


# -------------------------------------------------------------- config

def test_unknown_policy_rejected():
    with pytest.raises(ValueError):
        RunConfig(problem="dtlz2-3", policy="Greedy", seed=0)


def test_bad_budget_rejected():
    with pytest.raises(ValueError):
        RunConfig(problem="dtlz2-3", policy="QUIVER", seed=0, budget=0.0)


# ------------------------------------------------------------ cost-aware

def test_cost_aware_run_smoke():
    trace = run(RunConfig(problem="dtlz2-3", policy="QUIVER", seed=13,
                          budget=200.0), make_dm(13))
    s = trace.summary
    assert s["total_spend"] <= 200.0 + 1e-9
    assert s["n_ps"] + s["n_ia"] >= 1
    decided = [st for st in trace.steps if st.decision is not None]
    assert decided
    for st in decided:
        for kind, entry in st.decision.items():
            assert kind in ("Eval", "PS", "IA")
            assert entry["cost"] > 0.0


def test_fatigue_raises_ia_cost_in_trace():
    trace = run(RunConfig(problem="dtlz2-3", policy="IAOnly", seed=14,
                          budget=130.0, fatigue_alpha=0.5), make_dm(14))
    ia_costs = [s.cost for s in trace.steps if s.kind == "IA"]
    assert len(ia_costs) >= 3
    # cost of the k-th query is 1.15 * (1 + 0.5 k)
    assert ia_costs[0] == pytest.approx(1.15)
    assert ia_costs[1] == pytest.approx(1.15 * 1.5)
    assert ia_costs[2] == pytest.approx(1.15 * 2.0)
