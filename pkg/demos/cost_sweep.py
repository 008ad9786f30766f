"""
What happens when the rich query gets expensive
===============================================

Indifference adjustments carry more information than binary comparisons
but cost more. Sweeping their price shows the controller trading them
away: the IA share of all preference queries falls as the price ratio
rises.
"""

import numpy as np

from quiver.harness import run_cell
from quiver.metrics import run_metrics
from quiver.problems import (
    default_oracle_resolution,
    get_problem,
    sample_front,
)

RATIOS = (1.0, 1.5, 2.0, 2.5, 3.0)
SEEDS = range(3)

spec = get_problem("dtlz2-3")
front = sample_front(spec, default_oracle_resolution(spec))

print("dtlz2-3, QUIVER, budget 500; IA price as a multiple of PS\n")
print(f"{'ratio':>5} {'IA share':>9} {'n_ia':>6} {'n_ps':>6} "
      f"{'regret':>8}")

for ratio in RATIOS:
    rows = [run_cell("dtlz2-3", "QUIVER", s, ("cost_ratio", ratio), 0, {})
            for s in SEEDS]
    metrics = [run_metrics(tr, w, front) for _, tr, w, _ in rows]
    n_ia = sum(m.n_ia for m in metrics)
    n_ps = sum(m.n_ps for m in metrics)
    share = n_ia / (n_ia + n_ps)
    regret = np.mean([m.regret for m in metrics])
    print(f"{ratio:5.1f} {share:9.3f} {n_ia / len(metrics):6.1f} "
          f"{n_ps / len(metrics):6.1f} {regret:8.3f}")

print("\nThe share is pooled over seeds (total IA over total queries); "
      "single\nruns can ask very few queries, which makes per-run "
      "ratios noisy.")
