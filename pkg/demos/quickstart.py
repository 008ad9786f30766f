"""
A first QUIVER run, narrated
============================

One cost-aware optimization run on the three-objective DTLZ2 benchmark
against a synthetic decision maker, printing every preference query the
controller decides to buy and the recommendation it ends on.
"""

import numpy as np

from quiver import RunConfig, run
from quiver.decision_makers import SyntheticDM, draw_dm_weights
from quiver.problems import (
    default_oracle_resolution,
    front_optimal_utility,
    get_problem,
    sample_front,
)

rng = np.random.default_rng(7)

# The decision maker's true weights are hidden from the optimizer; it
# only ever sees noisy answers to the queries it pays for.
problem = get_problem("dtlz2-3")
w_star = draw_dm_weights(problem.m, rng)
dm = SyntheticDM(w_star, np.random.default_rng(8))
print(f"hidden DM weights: {np.round(w_star, 3)}")

config = RunConfig(problem="dtlz2-3", policy="QUIVER", budget=250.0,
                   seed=7)


# An observer lets us watch the run without touching its state.
def narrate(step, state):
    if step.kind == "PS":
        pick = "A" if step.payload["response"] >= 0.5 else "B"
        i, j = step.payload["i"], step.payload["j"]
        print(f"  step {step.step:3d}: compare #{i} vs #{j} "
              f"-> DM prefers {pick} (spend {step.cumulative_spend:5.1f})")
    elif step.kind == "IA":
        k = step.payload["dim"]
        print(f"  step {step.step:3d}: indifference adjustment on f{k + 1} "
              f"-> {step.payload['response']:+.3f} "
              f"(spend {step.cumulative_spend:5.1f})")


trace = run(config, dm, observer=narrate)

s = trace.summary
print(f"\nbudget spent: {s['total_spend']:.1f} of {config.budget:.0f} "
      f"({s['n_eval']} evaluations, {s['n_ps']} comparisons, "
      f"{s['n_ia']} adjustments)")
print(f"posterior mean weights: {np.round(s['posterior_mean'], 3)}")
print(f"recommended objectives: {np.round(s['final_f'], 3)}")

# Score the recommendation against the best utility available anywhere
# on the true front.
front = sample_front(problem, default_oracle_resolution(problem))
best = front_optimal_utility(problem, w_star, front=front)
achieved = float(-np.asarray(s["final_f"]) @ w_star)
print(f"utility regret vs. the true front: {best - achieved:.4f}")
