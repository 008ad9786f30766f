"""NSGA-II backbone: variation operators, sorting, selection, archive."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Individual:
    """One candidate design. ``f`` is set once truly evaluated; ``rank`` and
    ``crowding`` are set by the most recent sorting pass it took part in."""

    x: np.ndarray
    f: np.ndarray | None = None
    rank: int | None = None
    crowding: float | None = None


class Archive:
    """Append-only store of genuinely evaluated designs, deduplicated on x."""

    def __init__(self):
        self._xs: list[np.ndarray] = []
        self._fs: list[np.ndarray] = []
        self._seen: set[bytes] = set()

    def add(self, x: np.ndarray, f: np.ndarray) -> bool:
        """Append one evaluated design; returns False on an exact duplicate."""
        key = np.asarray(x, dtype=float).tobytes()
        if key in self._seen:
            return False
        self._seen.add(key)
        self._xs.append(np.array(x, dtype=float))
        self._fs.append(np.array(f, dtype=float))
        return True

    def contains(self, x: np.ndarray) -> bool:
        return np.asarray(x, dtype=float).tobytes() in self._seen

    @property
    def X(self) -> np.ndarray:
        return np.array(self._xs) if self._xs else np.empty((0, 0))

    @property
    def F(self) -> np.ndarray:
        return np.array(self._fs) if self._fs else np.empty((0, 0))

    def __len__(self) -> int:
        return len(self._xs)


# ---------------------------------------------------------------------------
# variation operators
# ---------------------------------------------------------------------------

def sbx_crossover(p1, p2, eta_c, rng, lower, upper):
    """Simulated binary crossover.

    Standard spread-factor recipe: the whole operator fires with probability
    0.9, each variable independently with probability 0.5; children are mean
    preserving before the final clip to the box bounds.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    c1, c2 = p1.copy(), p2.copy()
    if rng.random() >= 0.9:
        return c1, c2
    cross = rng.random(p1.shape) < 0.5
    u = rng.random(p1.shape)
    beta = np.where(
        u <= 0.5,
        (2.0 * u) ** (1.0 / (eta_c + 1.0)),
        (2.0 * (1.0 - u)) ** (-1.0 / (eta_c + 1.0)),
    )
    mean = 0.5 * (p1 + p2)
    half_spread = 0.5 * beta * np.abs(p2 - p1)
    c1 = np.where(cross, mean - half_spread, c1)
    c2 = np.where(cross, mean + half_spread, c2)
    np.clip(c1, lower, upper, out=c1)
    np.clip(c2, lower, upper, out=c2)
    return c1, c2


def polynomial_mutation(x, eta_m, prob, rng, lower, upper):
    """Bounded polynomial mutation; each coordinate mutates with ``prob``."""
    x = np.asarray(x, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
    out = x.copy()
    mutate = rng.random(x.shape) < prob
    if not np.any(mutate):
        return out
    span = upper - lower
    d1 = (x - lower) / span
    d2 = (upper - x) / span
    u = rng.random(x.shape)
    exp = 1.0 / (eta_m + 1.0)
    low_branch = (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta_m + 1.0)) ** exp - 1.0
    high_branch = 1.0 - (
        2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta_m + 1.0)
    ) ** exp
    delta = np.where(u < 0.5, low_branch, high_branch)
    out = np.where(mutate, x + delta * span, out)
    # the bounded perturbation cannot escape the box, but guard against
    # floating-point wobble at the edges
    return np.clip(out, lower, upper)


# ---------------------------------------------------------------------------
# sorting and selection
# ---------------------------------------------------------------------------

def _dominance_matrix(F: np.ndarray) -> np.ndarray:
    """dom[i, j] is True when point i dominates point j (minimization)."""
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


def fast_nondominated_sort(points) -> np.ndarray:
    """Pareto rank of every point: 0 for the non-dominated set, then peeling."""
    F = np.asarray(points, dtype=float)
    n = len(F)
    if n == 0:
        return np.zeros(0, dtype=int)
    dom = _dominance_matrix(F)
    n_dominators = dom.sum(axis=0)
    ranks = np.full(n, -1, dtype=int)
    current = np.flatnonzero(n_dominators == 0)
    rank = 0
    while current.size:
        ranks[current] = rank
        n_dominators[current] = -1  # retire
        for i in current:
            n_dominators[dom[i]] -= 1
        current = np.flatnonzero(n_dominators == 0)
        rank += 1
    return ranks


def crowding_distance(front) -> np.ndarray:
    F = np.asarray(front, dtype=float)
    n = len(F)
    if n <= 2:
        return np.full(n, np.inf)
    dist = np.zeros(n)
    for j in range(F.shape[1]):
        order = np.argsort(F[:, j], kind="stable")
        span = F[order[-1], j] - F[order[0], j]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0:
            gaps = (F[order[2:], j] - F[order[:-2], j]) / span
            dist[order[1:-1]] += gaps
    return dist


def environmental_selection(parents, offspring, n_survivors):
    """NSGA-II survival over the union of two evaluated populations.

    Returns exactly ``n_survivors`` individuals ordered by (rank ascending,
    crowding descending), or everything when the union is smaller.  Rank and
    crowding fields on the returned individuals reflect this pass.
    """
    pool = list(parents) + list(offspring)
    if not pool:
        return []
    F = np.array([ind.f for ind in pool], dtype=float)
    ranks = fast_nondominated_sort(F)
    for rank in np.unique(ranks):
        members = np.flatnonzero(ranks == rank)
        crowd = crowding_distance(F[members])
        for i, c in zip(members, crowd):
            pool[i].rank = int(rank)
            pool[i].crowding = float(c)
    order = sorted(
        range(len(pool)), key=lambda i: (pool[i].rank, -pool[i].crowding, i)
    )
    if len(pool) <= n_survivors:
        return [pool[i] for i in order]
    return [pool[i] for i in order[:n_survivors]]


def _tournament(population, rng) -> Individual:
    i, j = rng.integers(0, len(population), size=2)
    a, b = population[i], population[j]
    ra = a.rank if a.rank is not None else 0
    rb = b.rank if b.rank is not None else 0
    ca = a.crowding if a.crowding is not None else np.inf
    cb = b.crowding if b.crowding is not None else np.inf
    if rb < ra or (rb == ra and cb > ca):
        return b
    return a


def generate_offspring(population, count, rng, lower, upper,
                       eta_c=20.0, eta_m=20.0, mutation_prob=None):
    """Produce ``count`` candidate decision vectors via binary tournament
    selection, SBX, and polynomial mutation."""
    if not population:
        raise ValueError("population must be nonempty")
    d = len(population[0].x)
    if mutation_prob is None:
        mutation_prob = 1.0 / d
    out = []
    while len(out) < count:
        pa = _tournament(population, rng)
        pb = _tournament(population, rng)
        c1, c2 = sbx_crossover(pa.x, pb.x, eta_c, rng, lower, upper)
        for child in (c1, c2):
            if len(out) < count:
                out.append(polynomial_mutation(child, eta_m, mutation_prob,
                                               rng, lower, upper))
    return out
