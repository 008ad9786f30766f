"""Particle posterior over preference weights on the simplex.

Utility convention: outcomes are compared in value space, v = -f, so the
linear utility u(f; w) = w·v increases for better (smaller-objective)
outcomes while the optimizer minimizes f.  Every likelihood below takes
value vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_SIGMA_PS = 0.15
DEFAULT_SIGMA_IA = 0.18
DEFAULT_IA_EPS = 1e-3


@dataclass
class NoiseParams:
    sigma_ps: float = DEFAULT_SIGMA_PS
    sigma_ia: float = DEFAULT_SIGMA_IA
    ia_eps: float = DEFAULT_IA_EPS

    @property
    def beta(self) -> float:
        """Logistic sharpness for pairwise comparisons, β = 1/σ_PS."""
        return 1.0 / self.sigma_ps


@dataclass
class QueryRecord:
    """One answered preference query, stored in value space."""

    kind: str                    # "PS" or "IA"
    a_value: np.ndarray
    b_value: np.ndarray
    response: float              # binary y for PS, real adjustment for IA
    dim: int | None = None       # IA only
    cost_paid: float = 0.0

    def __post_init__(self):
        if self.kind not in ("PS", "IA"):
            raise ValueError(f"unknown query kind {self.kind!r}")
        if self.kind == "IA" and self.dim is None:
            raise ValueError("IA record requires a dimension")


@dataclass
class ParticleSet:
    particles: np.ndarray        # (S, m), rows on the simplex
    weights: np.ndarray          # (S,), sums to 1
    history: list = field(default_factory=list)
    last_resampled: bool = False
    last_degenerate: bool = False

    @property
    def size(self) -> int:
        return len(self.particles)

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.particles.copy(), self.weights.copy(),
                           list(self.history))


def init_particles(m, S, alpha, rng) -> ParticleSet:
    """S iid Dirichlet(alpha) particles with uniform weights."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (m,) or np.any(alpha <= 0):
        raise ValueError("alpha must be a positive vector of length m")
    particles = rng.dirichlet(alpha, size=S)
    return ParticleSet(particles=particles, weights=np.full(S, 1.0 / S))


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def ps_likelihood(a_value, b_value, w, beta):
    """Pr(A preferred over B) under the logistic comparison model.

    ``w`` may be a single weight vector or an (S, m) stack.
    """
    diff = np.asarray(a_value, dtype=float) - np.asarray(b_value, dtype=float)
    gap = np.asarray(w, dtype=float) @ diff
    return _sigmoid(beta * gap)


def ia_mean(a_value, b_value, w, k, eps=DEFAULT_IA_EPS):
    """Mean of the importance-adjustment response: w·(a−b) / max(w_k, ε)."""
    w = np.asarray(w, dtype=float)
    diff = np.asarray(a_value, dtype=float) - np.asarray(b_value, dtype=float)
    num = w @ diff
    denom = np.maximum(w[..., k], eps)
    return num / denom


def _log_likelihood(particles, record: QueryRecord, noise: NoiseParams):
    if record.kind == "PS":
        p = ps_likelihood(record.a_value, record.b_value, particles, noise.beta)
        lik = p if record.response >= 0.5 else 1.0 - p
        with np.errstate(divide="ignore"):
            return np.log(lik)
    mu = ia_mean(record.a_value, record.b_value, particles, record.dim,
                 noise.ia_eps)
    z = (record.response - mu) / noise.sigma_ia
    # density in probability space first so true underflow to zero is
    # observable as -inf (degeneracy trigger), matching the PS branch
    dens = np.exp(-0.5 * z * z)
    with np.errstate(divide="ignore"):
        return np.log(dens)


def update(ps: ParticleSet, record: QueryRecord, noise: NoiseParams, rng,
           resample=True, copy=False) -> ParticleSet:
    """Bayes-update particle weights with one answered query.

    Weights are updated in log space and renormalized; if the effective
    sample size drops below S/2, particles are multinomially resampled and
    weights reset uniform.  With ``copy=True`` the input set is untouched
    (used by information-gain simulation).
    """
    target = ps.copy() if copy else ps
    target.last_resampled = False
    target.last_degenerate = False

    loglik = _log_likelihood(target.particles, record, noise)
    with np.errstate(divide="ignore"):
        logw = np.log(target.weights) + loglik
    finite = np.isfinite(logw)
    if not np.any(finite):
        # every particle assigns numerically zero likelihood; reset rather
        # than propagate NaNs
        target.weights = np.full(target.size, 1.0 / target.size)
        target.last_degenerate = True
        target.history.append(record)
        return target
    logw -= np.max(logw[finite])
    w = np.exp(logw)
    w[~finite] = 0.0
    target.weights = w / w.sum()

    if resample:
        ess = 1.0 / np.sum(target.weights**2)
        if ess < target.size / 2.0:
            idx = rng.choice(target.size, size=target.size, replace=True,
                             p=target.weights)
            target.particles = target.particles[idx]
            target.weights = np.full(target.size, 1.0 / target.size)
            target.last_resampled = True

    target.history.append(record)
    return target


def effective_sample_size(ps: ParticleSet) -> float:
    return 1.0 / np.sum(ps.weights**2)


def entropy(ps: ParticleSet) -> float:
    """Shannon entropy of the particle weights (nats)."""
    w = ps.weights[ps.weights > 0]
    return float(-np.sum(w * np.log(w)))


def posterior_mean(ps: ParticleSet) -> np.ndarray:
    return ps.weights @ ps.particles


def posterior_var(ps: ParticleSet, k: int) -> float:
    wk = ps.particles[:, k]
    mean = ps.weights @ wk
    return float(ps.weights @ (wk - mean) ** 2)


def sample(ps: ParticleSet, n: int, rng) -> np.ndarray:
    idx = rng.choice(ps.size, size=n, replace=True, p=ps.weights)
    return ps.particles[idx]


def expected_utility(ps: ParticleSet, f) -> float:
    """Posterior-expected utility of an objective vector (via the mean,
    exact by linearity)."""
    return float(posterior_mean(ps) @ -np.asarray(f, dtype=float))


def fisher_info_ps(a_value, b_value, w, sigma_ps=DEFAULT_SIGMA_PS) -> float:
    gap = float(np.asarray(w) @ (np.asarray(a_value) - np.asarray(b_value)))
    p = float(_sigmoid(np.array(gap / sigma_ps)))
    return (gap * gap / (sigma_ps * sigma_ps)) * p * (1.0 - p)


def fisher_info_ia(sigma_ia=DEFAULT_SIGMA_IA) -> float:
    return 1.0 / (sigma_ia * sigma_ia)
