"""Decision-maker models: synthetic ground-truth DM and a blocking bridge
for live humans behind the session service."""

from __future__ import annotations

from typing import Protocol

import numpy as np

from quiver.preferences import (
    DEFAULT_IA_EPS,
    DEFAULT_SIGMA_IA,
    DEFAULT_SIGMA_PS,
    _sigmoid,
    ia_mean,
)


class DMInterface(Protocol):
    """Anything able to answer the two query modalities in value space."""

    def answer_ps(self, a_value, b_value) -> int: ...

    def answer_ia(self, a_value, b_value, k: int) -> float: ...


class SyntheticDM:
    """Simulated decision-maker with fixed hidden weights.

    Responses follow exactly the likelihood models the posterior assumes:
    Bernoulli(σ(w*·(a−b)/σ_PS)) for comparisons and
    N(w*·(a−b)/max(w*_k, ε), σ_IA²) for importance adjustments.
    """

    def __init__(self, w_star, rng, sigma_ps=DEFAULT_SIGMA_PS,
                 sigma_ia=DEFAULT_SIGMA_IA, ia_eps=DEFAULT_IA_EPS):
        w_star = np.asarray(w_star, dtype=float)
        if np.any(w_star < 0) or abs(w_star.sum() - 1.0) > 1e-9:
            raise ValueError("w_star must lie on the simplex")
        self.w_star = w_star
        self.sigma_ps = float(sigma_ps)
        self.sigma_ia = float(sigma_ia)
        self.ia_eps = float(ia_eps)
        self.rng = rng

    def ps_probability(self, a_value, b_value) -> float:
        gap = float(self.w_star @ (np.asarray(a_value) - np.asarray(b_value)))
        return float(_sigmoid(np.asarray(gap / self.sigma_ps)))

    def answer_ps(self, a_value, b_value) -> int:
        return int(self.rng.random() < self.ps_probability(a_value, b_value))

    def answer_ia(self, a_value, b_value, k: int) -> float:
        mu = ia_mean(a_value, b_value, self.w_star, k, self.ia_eps)
        return float(mu + self.sigma_ia * self.rng.standard_normal())


def draw_dm_weights(m: int, rng) -> np.ndarray:
    """Ground-truth weights for one run: a flat-Dirichlet draw."""
    return rng.dirichlet(np.ones(m))


class QueryRefused(Exception):
    """A live DM did not answer within the timeout; the controller must
    re-plan at zero cost."""


class HumanBridgeDM:
    """Forwards queries to a session transport and blocks for the answer.

    The transport supplies ``ask(kind, payload, timeout) -> response`` and
    raises/returns None on timeout; answers are validated here before they
    reach the posterior, and malformed input is re-prompted rather than
    accepted.
    """

    def __init__(self, transport, timeout: float = 600.0, max_reprompts: int = 3):
        self.transport = transport
        self.timeout = float(timeout)
        self.max_reprompts = int(max_reprompts)

    def _ask(self, kind, payload, validate):
        for _ in range(self.max_reprompts + 1):
            raw = self.transport.ask(kind, payload, self.timeout)
            if raw is None:
                raise QueryRefused(f"{kind} query timed out after {self.timeout}s")
            try:
                return validate(raw)
            except (TypeError, ValueError):
                continue  # malformed input: re-prompt
        raise QueryRefused(f"{kind} query produced no valid answer")

    def answer_ps(self, a_value, b_value) -> int:
        def validate(raw):
            val = int(raw)
            if val not in (0, 1):
                raise ValueError(raw)
            return val

        payload = {"a_value": np.asarray(a_value).tolist(),
                   "b_value": np.asarray(b_value).tolist()}
        return self._ask("PS", payload, validate)

    def answer_ia(self, a_value, b_value, k: int) -> float:
        def validate(raw):
            val = float(raw)
            if not np.isfinite(val):
                raise ValueError(raw)
            return val

        payload = {"a_value": np.asarray(a_value).tolist(),
                   "b_value": np.asarray(b_value).tolist(), "dim": int(k)}
        return self._ask("IA", payload, validate)
