"""Main optimization loop, policy dispatch, and budget accounting.

One run = seed evaluations, then a sequence of budget-charged actions
(Eval / PS / IA) chosen either by the cost-aware controller (QUIVER) or
by one of five fixed baseline rules, ending with a recommendation from
the evaluated archive.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from quiver import problems
from quiver.controller import (
    ActionProposal,
    CostModel,
    KNNPredictor,
    choose_action,
)
from quiver.decision_makers import QueryRefused
from quiver.evolution import (
    Archive,
    Individual,
    environmental_selection,
    generate_offspring,
    polynomial_mutation,
)
from quiver.preferences import (
    NoiseParams,
    QueryRecord,
    effective_sample_size,
    entropy,
    init_particles,
    posterior_mean,
    update,
)

POLICIES = ("QUIVER", "EvalOnly", "PSOnly", "IAOnly", "FixedSchedule", "Random")

FIXED_CYCLE = ("Eval", "PS", "Eval", "IA")

MAX_CONSECUTIVE_REFUSALS = 10


@dataclass
class RunConfig:
    problem: str
    policy: str
    seed: int
    budget: float = 500.0
    pop_size: int = 20
    particles: int = 2048
    eig_samples: int = 50
    c_eval: float = 5.0
    c_ps: float = 1.0
    c_ia0: float = 1.15
    fatigue_alpha: float = 0.0
    sigma_ps: float = 0.15
    sigma_ia: float = 0.18
    ia_eps: float = 1e-3
    eval_voc_weight: float = 1.0
    exploration_weight: float = 1.0
    prescreen_multiplier: int = 5
    knn_k: int = 5
    oracle_resolution: int | None = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        for name in ("pop_size", "particles", "eig_samples",
                     "prescreen_multiplier"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def cost_model(self) -> CostModel:
        return CostModel(c_eval=self.c_eval, c_ps=self.c_ps, c_ia0=self.c_ia0,
                         fatigue_alpha=self.fatigue_alpha)

    def noise(self) -> NoiseParams:
        return NoiseParams(sigma_ps=self.sigma_ps, sigma_ia=self.sigma_ia,
                           ia_eps=self.ia_eps)


@dataclass
class StepRecord:
    step: int
    kind: str                    # "Eval" | "PS" | "IA" | "Refusal"
    payload: dict
    cost: float
    cumulative_spend: float
    entropy: float
    ess: float
    rec_utility: float
    resampled: bool = False
    degenerate: bool = False
    decision: dict | None = None  # controller scores/ratios (QUIVER only)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunTrace:
    config: dict
    steps: list
    final_x: np.ndarray | None = None
    final_f: np.ndarray | None = None
    summary: dict = field(default_factory=dict)


def recommend(ps, archive: Archive, uniform_weights: bool = False):
    """Archive point with the best (posterior-mean or uniform) expected
    utility; earliest index wins ties."""
    if len(archive) == 0:
        raise ValueError("cannot recommend from an empty archive")
    F = archive.F
    m = F.shape[1]
    w = np.full(m, 1.0 / m) if uniform_weights else posterior_mean(ps)
    idx = int(np.argmax(F @ -w))
    return archive.X[idx], F[idx]


def random_pair(n: int, rng) -> tuple[int, int]:
    """Uniform draw over unordered pairs of distinct archive indices."""
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    return (i, j) if i < j else (j, i)


def action_kind_probabilities(cost_model: CostModel) -> dict:
    """Random baseline's action distribution: probability ∝ 1/cost."""
    inv = np.array([1.0 / cost_model.c_eval, 1.0 / cost_model.c_ps,
                    1.0 / cost_model.current_ia_cost()])
    inv /= inv.sum()
    return {"Eval": inv[0], "PS": inv[1], "IA": inv[2]}


_REPERTOIRE = {
    "EvalOnly": ("Eval",),
    "PSOnly": ("PS",),
    "IAOnly": ("IA",),
    "FixedSchedule": ("Eval", "PS", "IA"),
    "Random": ("Eval", "PS", "IA"),
}


def baseline_action_kind(policy: str, step_index: int,
                         cost_model: CostModel, remaining: float, rng):
    """Which action a baseline wants next, after affordability fall-through.

    The fall-through only considers the policy's own repertoire: a pure
    policy terminates rather than borrow another modality.  Returns None
    when nothing affordable remains.
    """
    def affordable(kind):
        return cost_model.cost_of(kind) <= remaining + 1e-9

    if policy == "EvalOnly":
        wanted = "Eval"
    elif policy == "PSOnly":
        wanted = "PS"
    elif policy == "IAOnly":
        wanted = "IA"
    elif policy == "FixedSchedule":
        wanted = FIXED_CYCLE[step_index % len(FIXED_CYCLE)]
    elif policy == "Random":
        probs = action_kind_probabilities(cost_model)
        kinds = list(probs)
        wanted = kinds[rng.choice(3, p=np.array([probs[k] for k in kinds]))]
    else:
        raise ValueError(f"not a baseline policy: {policy!r}")

    if affordable(wanted):
        return wanted
    options = [k for k in _REPERTOIRE[policy] if affordable(k)]
    if not options:
        return None
    return min(options, key=cost_model.cost_of)


def _uniform_infill(candidates, predictor, m):
    """EvalOnly's infill: best predicted utility under uniform weights."""
    pred = predictor.predict_batch(np.asarray(candidates, dtype=float))
    u = pred @ -np.full(m, 1.0 / m)
    return np.asarray(candidates, dtype=float)[int(np.argmax(u))]


def baseline_step(policy: str, state: "RunState") -> ActionProposal | None:
    """Build the next baseline action (kind + payload); None to terminate."""
    kind = baseline_action_kind(policy, state.action_index, state.cost_model,
                                state.remaining, state.rng)
    if kind is None:
        return None
    if kind == "Eval":
        candidates = state.fresh_candidates()
        if len(candidates) == 0:
            return None
        x = _uniform_infill(candidates, state.predictor(), state.m)
        return ActionProposal(kind="Eval", payload={"x": x}, score=0.0,
                              cost=state.cost_model.c_eval)
    i, j = random_pair(len(state.archive), state.rng)
    if kind == "PS":
        return ActionProposal(kind="PS", payload={"i": i, "j": j}, score=0.0,
                              cost=state.cost_model.c_ps)
    dim = int(state.rng.integers(state.m))
    return ActionProposal(kind="IA", payload={"i": i, "j": j, "dim": dim},
                          score=0.0, cost=state.cost_model.current_ia_cost())


class RunState:
    """Mutable loop state shared by the policy dispatchers."""

    def __init__(self, config: RunConfig, dm, rng):
        self.config = config
        self.dm = dm
        self.rng = rng
        self.spec = problems.get_problem(config.problem)
        self.m = self.spec.m
        self.archive = Archive()
        self.population: list[Individual] = []
        self.cost_model = config.cost_model()
        self.noise = config.noise()
        self.ps = init_particles(self.m, config.particles,
                                 np.ones(self.m), rng)
        self.spent = 0.0
        self.action_index = 0      # post-seed actions performed
        self.counts = {"Eval": 0, "PS": 0, "IA": 0}
        self.spend = {"Eval": 0.0, "PS": 0.0, "IA": 0.0}

    @property
    def remaining(self) -> float:
        return self.config.budget - self.spent

    def predictor(self) -> KNNPredictor:
        return KNNPredictor(self.archive, self.spec.lower, self.spec.upper,
                            k=self.config.knn_k)

    def fresh_candidates(self) -> np.ndarray:
        """One generation's worth (pop_size) of offspring decision vectors.

        Breeds prescreen_multiplier * pop_size raw offspring and keeps the
        pop_size with the best predicted utility (plus the local-uncertainty
        bonus) under the policy's weights — a cheap surrogate screen that
        concentrates the candidate set without extra true evaluations.
        Spending an Eval on a known point is pure waste, so a candidate that
        exactly matches an archived design is re-mutated once, and dropped
        if it still collides.
        """
        n = self.config.pop_size
        raw = generate_offspring(self.population,
                                 n * self.config.prescreen_multiplier,
                                 self.rng, self.spec.lower, self.spec.upper)
        out = []
        for x in raw:
            if self.archive.contains(x):
                x = polynomial_mutation(x, 20.0, 1.0 / self.spec.d, self.rng,
                                        self.spec.lower, self.spec.upper)
                if self.archive.contains(x):
                    continue
            out.append(x)
        if not out:
            return np.empty((0, self.spec.d))
        out = np.asarray(out)
        if len(out) <= n:
            return out
        if self.config.policy == "QUIVER":
            w = posterior_mean(self.ps)
        else:
            w = np.full(self.m, 1.0 / self.m)
        pred, disp = self.predictor().predict_with_dispersion(out, w)
        score = pred @ -w + self.config.exploration_weight * disp
        keep = np.sort(np.argsort(-score)[:n])   # stable original order
        return out[keep]

    def charge(self, kind: str, cost: float):
        self.spent += cost
        self.counts[kind] += 1
        self.spend[kind] += cost
        if kind == "IA":
            self.cost_model.note_ia_charged()

    def rec_utility(self) -> float:
        F = self.archive.F
        if self.config.policy == "EvalOnly":
            w = np.full(self.m, 1.0 / self.m)
        else:
            w = posterior_mean(self.ps)
        return float(np.max(F @ -w))


def _execute_eval(state: RunState, x) -> dict:
    f = problems.evaluate(state.spec, x)
    state.archive.add(x, f)
    child = Individual(x=np.asarray(x, dtype=float), f=f)
    state.population = environmental_selection(state.population, [child],
                                               state.config.pop_size)
    return {"x": np.asarray(x).tolist(), "f": f.tolist()}


def _execute_query(state: RunState, proposal: ActionProposal) -> dict:
    i, j = proposal.payload["i"], proposal.payload["j"]
    a_value = -state.archive.F[i]
    b_value = -state.archive.F[j]
    if proposal.kind == "PS":
        response = float(state.dm.answer_ps(a_value, b_value))
        record = QueryRecord(kind="PS", a_value=a_value, b_value=b_value,
                             response=response, cost_paid=proposal.cost)
    else:
        dim = proposal.payload["dim"]
        response = float(state.dm.answer_ia(a_value, b_value, dim))
        record = QueryRecord(kind="IA", a_value=a_value, b_value=b_value,
                             dim=dim, response=response,
                             cost_paid=proposal.cost)
    update(state.ps, record, state.noise, state.rng)
    out = {"i": int(i), "j": int(j), "response": response}
    if proposal.kind == "IA":
        out["dim"] = int(proposal.payload["dim"])
    return out


def _decision_summary(proposals) -> dict:
    return {p.kind: {"score": float(p.score), "cost": float(p.cost),
                     "ratio": float(p.ratio)} for p in proposals}


def run(config: RunConfig, dm, observer=None) -> RunTrace:
    """Execute one full budgeted run and return its trace.

    `observer(step, state)`, when given, is called after every appended
    step record with the live loop state; it must only read.
    """
    rng = np.random.default_rng(config.seed)
    state = RunState(config, dm, rng)
    spec = state.spec
    steps: list[StepRecord] = []

    def notify():
        if observer is not None:
            observer(steps[-1], state)

    # ---- seed phase: a uniform batch of true evaluations ----
    n_seed = min(config.pop_size, int(config.budget / config.c_eval))
    X0 = rng.uniform(spec.lower, spec.upper, size=(n_seed, spec.d))
    seeded = []
    for x in X0:
        f = problems.evaluate(spec, x)
        state.archive.add(x, f)
        seeded.append(Individual(x=x, f=f))
        state.charge("Eval", config.c_eval)
    state.population = environmental_selection(seeded, [], config.pop_size)
    steps.append(StepRecord(
        step=0, kind="Seed", payload={"n": n_seed},
        cost=n_seed * config.c_eval, cumulative_spend=state.spent,
        entropy=entropy(state.ps), ess=effective_sample_size(state.ps),
        rec_utility=state.rec_utility()))
    notify()

    refusals = 0
    while True:
        proposal, decision = _next_action(state)
        if proposal is None:
            break
        try:
            if proposal.kind == "Eval":
                payload = _execute_eval(state, proposal.payload["x"])
            else:
                payload = _execute_query(state, proposal)
        except QueryRefused:
            refusals += 1
            steps.append(StepRecord(
                step=len(steps), kind="Refusal",
                payload={"of": proposal.kind}, cost=0.0,
                cumulative_spend=state.spent, entropy=entropy(state.ps),
                ess=effective_sample_size(state.ps),
                rec_utility=state.rec_utility()))
            notify()
            if refusals > MAX_CONSECUTIVE_REFUSALS:
                break
            continue
        refusals = 0
        state.charge(proposal.kind, proposal.cost)
        state.action_index += 1
        steps.append(StepRecord(
            step=len(steps), kind=proposal.kind, payload=payload,
            cost=proposal.cost, cumulative_spend=state.spent,
            entropy=entropy(state.ps), ess=effective_sample_size(state.ps),
            rec_utility=state.rec_utility(),
            resampled=state.ps.last_resampled,
            degenerate=state.ps.last_degenerate,
            decision=decision))
        notify()

    x_rec, f_rec = recommend(state.ps, state.archive,
                             uniform_weights=(config.policy == "EvalOnly"))
    trace = RunTrace(config=asdict(config), steps=steps,
                     final_x=x_rec, final_f=f_rec)
    trace.summary = {
        "n_eval": len(state.archive),
        "n_ps": state.counts["PS"],
        "n_ia": state.counts["IA"],
        "spend_eval": state.spend["Eval"],
        "spend_ps": state.spend["PS"],
        "spend_ia": state.spend["IA"],
        "total_spend": state.spent,
        "final_entropy": entropy(state.ps),
        "final_ess": effective_sample_size(state.ps),
        "posterior_mean": posterior_mean(state.ps).tolist(),
        "final_f": f_rec.tolist(),
        "final_x": x_rec.tolist(),
    }
    return trace


def _next_action(state: RunState):
    """Policy dispatch: returns (proposal, decision-summary-or-None)."""
    config = state.config
    if config.policy == "QUIVER":
        candidates = state.fresh_candidates()
        predictor = state.predictor() if len(candidates) else None
        chosen, proposals = choose_action(
            state.ps, state.archive, candidates, state.cost_model,
            config.eig_samples, state.rng, state.remaining,
            noise=state.noise, predictor=predictor,
            eval_voc_weight=config.eval_voc_weight,
            exploration_weight=config.exploration_weight)
        if chosen is None:
            return None, None
        return chosen, _decision_summary(proposals)

    proposal = baseline_step(config.policy, state)
    if proposal is None:
        return None, None
    return proposal, None
