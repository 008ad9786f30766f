"""Benchmark problems: DTLZ2 (m=3,5), WFG4 and WFG9 (m=3).

All problems are minimization problems with box-constrained decision
spaces.  Each problem has an analytic Pareto front lying on the positive
orthant of a sphere (unit sphere for DTLZ2, radii 2i for the WFG
problems), which makes an exact regret oracle possible: the front is
sampled on a deterministic spherical grid and the utility optimum is
read off the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DTLZ_EXTRA_VARS = 9     # d = m + 9
WFG_EXTRA_VARS = 20     # d = 2m + 20


@dataclass(frozen=True)
class ProblemSpec:
    """Static description of one benchmark instance.

    ``k`` is the WFG position-parameter count (None for DTLZ problems).
    ``negate`` flips the sign of every objective, turning the instance
    into a maximization problem; none of the bundled benchmarks use it.
    """

    name: str
    m: int
    d: int
    lower: np.ndarray
    upper: np.ndarray
    k: int | None = None
    negate: bool = False

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"need at least 2 objectives, got m={self.m}")
        if np.any(self.lower >= self.upper):
            raise ValueError("lower bounds must be strictly below upper bounds")


@dataclass(frozen=True)
class FrontSample:
    """Deterministic grid sample of the analytic Pareto front."""

    points: np.ndarray          # (n_points, m)
    resolution: int


_PROBLEM_NAMES = ("dtlz2-3", "dtlz2-5", "wfg4-3", "wfg9-3")


def get_problem(name: str) -> ProblemSpec:
    """Build a ProblemSpec from its harness name, e.g. ``"dtlz2-3"``."""
    key = name.strip().lower()
    if key not in _PROBLEM_NAMES:
        raise KeyError(f"unknown problem {name!r}, expected one of {_PROBLEM_NAMES}")
    family, m_str = key.split("-")
    m = int(m_str)
    if family == "dtlz2":
        d = m + DTLZ_EXTRA_VARS
        return ProblemSpec(name=key, m=m, d=d,
                           lower=np.zeros(d), upper=np.ones(d))
    # WFG: variable i (1-indexed) lives in [0, 2i]; k position parameters.
    d = 2 * m + WFG_EXTRA_VARS
    k = 2 * (m - 1)
    return ProblemSpec(name=key, m=m, d=d,
                       lower=np.zeros(d),
                       upper=2.0 * np.arange(1, d + 1, dtype=float),
                       k=k)


def front_radii(spec: ProblemSpec) -> np.ndarray:
    """Per-objective radius of the spherical front (1 for DTLZ, 2i for WFG)."""
    if spec.name.startswith("dtlz"):
        return np.ones(spec.m)
    return 2.0 * np.arange(1, spec.m + 1, dtype=float)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(spec: ProblemSpec, x: np.ndarray) -> np.ndarray:
    """Evaluate the objective vector of a single decision vector.

    Deterministic.  Raises on wrong shape or out-of-bounds input.
    """
    return evaluate_batch(spec, np.asarray(x, dtype=float)[None, :])[0]


def evaluate_batch(spec: ProblemSpec, X: np.ndarray) -> np.ndarray:
    """Evaluate a batch of decision vectors, shape (n, d) -> (n, m)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.d:
        raise ValueError(f"expected decision vectors of length {spec.d}, "
                         f"got shape {X.shape}")
    if np.any(X < spec.lower - 1e-12) or np.any(X > spec.upper + 1e-12):
        raise ValueError("decision vector out of bounds")
    if spec.name.startswith("dtlz2"):
        F = _dtlz2(X, spec.m)
    elif spec.name.startswith("wfg4"):
        F = _wfg4(X, spec.m, spec.k)
    elif spec.name.startswith("wfg9"):
        F = _wfg9(X, spec.m, spec.k)
    else:
        raise ValueError(f"no evaluator for {spec.name}")
    return -F if spec.negate else F


def _dtlz2(X: np.ndarray, m: int) -> np.ndarray:
    g = np.sum((X[:, m - 1:] - 0.5) ** 2, axis=1)
    theta = X[:, :m - 1] * (np.pi / 2.0)
    cos = np.cos(theta)
    sin = np.sin(theta)
    cumcos = np.cumprod(cos, axis=1)
    F = np.empty((X.shape[0], m))
    F[:, 0] = cumcos[:, m - 2]
    for i in range(1, m - 1):
        F[:, i] = cumcos[:, m - 2 - i] * sin[:, m - 1 - i]
    F[:, m - 1] = sin[:, 0]
    return (1.0 + g)[:, None] * F


# WFG transformation toolbox.  The working variables live in [0, 1]; each
# transformation maps [0,1]^n -> [0,1]^n (clipped against float noise).

def _clip01(y):
    return np.clip(y, 0.0, 1.0)


def _shift_multimodal(y, a, b, c):
    t = np.abs(y - c) / (2.0 * (np.floor(c - y) + c))
    return _clip01((1.0 + np.cos((4.0 * a + 2.0) * np.pi * (0.5 - t))
                    + 4.0 * b * t ** 2) / (b + 2.0))


def _shift_deceptive(y, a, b, c):
    t1 = np.floor(y - a + b) * (1.0 - c + (a - b) / b) / (a - b)
    t2 = np.floor(a + b - y) * (1.0 - c + (1.0 - a - b) / b) / (1.0 - a - b)
    return _clip01(1.0 + (np.abs(y - a) - b) * (t1 + t2 + 1.0 / b))


def _bias_param(y, u, a, b, c):
    v = a - (1.0 - 2.0 * u) * np.abs(np.floor(0.5 - u) + a)
    return _clip01(y ** (b + (c - b) * v))


def _reduce_mean(y):
    return _clip01(np.mean(y, axis=1))


def _reduce_nonsep(y, a):
    n, width = y.shape
    num = np.zeros(n)
    for j in range(width):
        num += y[:, j]
        for p in range(a - 1):
            num += np.abs(y[:, j] - y[:, (1 + j + p) % width])
    half = np.ceil(a / 2.0)
    denom = width * half * (1.0 + 2.0 * a - 2.0 * half) / a
    return _clip01(num / denom)


def _concave_shapes(x_front: np.ndarray, m: int) -> np.ndarray:
    """Concave shape functions on the position variables, shape (n, m-1) -> (n, m)."""
    angles = x_front * (np.pi / 2.0)
    sin = np.sin(angles)
    cos = np.cos(angles)
    cumsin = np.cumprod(sin, axis=1)
    H = np.empty((x_front.shape[0], m))
    H[:, 0] = cumsin[:, m - 2]
    for j in range(1, m - 1):
        H[:, j] = cumsin[:, m - 2 - j] * cos[:, m - 1 - j]
    H[:, m - 1] = cos[:, 0]
    return H


def _wfg_assemble(t: np.ndarray, m: int) -> np.ndarray:
    """Final WFG step: degeneracy map, shapes, and scaling by radii 2j."""
    dist = t[:, -1]
    # degeneracy constants are all 1 for WFG4/WFG9, so the position part
    # passes through unchanged; kept in full form for fidelity
    pos = np.maximum(dist[:, None], 1.0) * (t[:, :-1] - 0.5) + 0.5
    H = _concave_shapes(pos, m)
    radii = 2.0 * np.arange(1, m + 1, dtype=float)
    return dist[:, None] + radii[None, :] * H


def _wfg4(X: np.ndarray, m: int, k: int) -> np.ndarray:
    d = X.shape[1]
    y = X / (2.0 * np.arange(1, d + 1, dtype=float))
    y = _shift_multimodal(y, 30.0, 10.0, 0.35)
    gap = k // (m - 1)
    t = [_reduce_mean(y[:, i * gap:(i + 1) * gap]) for i in range(m - 1)]
    t.append(_reduce_mean(y[:, k:]))
    return _wfg_assemble(np.column_stack(t), m)


def _wfg9(X: np.ndarray, m: int, k: int) -> np.ndarray:
    d = X.shape[1]
    y = X / (2.0 * np.arange(1, d + 1, dtype=float))
    for i in range(d - 1):
        y[:, i] = _bias_param(y[:, i], _reduce_mean(y[:, i + 1:]),
                              0.98 / 49.98, 0.02, 50.0)
    head = _shift_deceptive(y[:, :k], 0.35, 0.001, 0.05)
    tail = _shift_multimodal(y[:, k:], 30.0, 95.0, 0.35)
    y = np.column_stack([head, tail])
    gap = k // (m - 1)
    t = [_reduce_nonsep(y[:, i * gap:(i + 1) * gap], gap) for i in range(m - 1)]
    t.append(_reduce_nonsep(y[:, k:], d - k))
    return _wfg_assemble(np.column_stack(t), m)


# ---------------------------------------------------------------------------
# analytic front and regret oracle
# ---------------------------------------------------------------------------

def sample_front(spec: ProblemSpec, resolution: int) -> FrontSample:
    """Sample the analytic front on a regular spherical-angle grid.

    The grid covers (m-1) angles in [0, pi/2] with ``resolution`` points
    each (endpoints included), so the sample always contains the m axis
    vertices and the point count grows as resolution**(m-1).
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    grid = np.linspace(0.0, np.pi / 2.0, resolution)
    axes = np.meshgrid(*([grid] * (spec.m - 1)), indexing="ij")
    angles = np.column_stack([a.ravel() for a in axes])
    sin = np.sin(angles)
    cos = np.cos(angles)
    cumcos = np.cumprod(cos, axis=1)
    m = spec.m
    U = np.empty((angles.shape[0], m))
    U[:, 0] = cumcos[:, m - 2]
    for i in range(1, m - 1):
        U[:, i] = cumcos[:, m - 2 - i] * sin[:, m - 1 - i]
    U[:, m - 1] = sin[:, 0]
    return FrontSample(points=U * front_radii(spec)[None, :], resolution=resolution)


def default_oracle_resolution(spec: ProblemSpec) -> int:
    # finer grids for m=3 are cheap; m=5 grids grow as resolution^4
    return 256 if spec.m <= 3 else 32


def front_optimal_utility(spec: ProblemSpec, w: np.ndarray,
                          resolution: int | None = None,
                          front: FrontSample | None = None) -> float:
    """Best achievable utility u(f; w) = -w.f over the sampled front.

    For these spherical fronts and linear utility the optimum sits at an
    axis vertex, which every grid contains, so the value is exact for
    any resolution >= 2 and nondecreasing in the resolution.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.m,):
        raise ValueError(f"weight vector must have length {spec.m}")
    if front is None:
        if resolution is None:
            resolution = default_oracle_resolution(spec)
        front = sample_front(spec, resolution)
    return float(np.max(-front.points @ w))


def front_surface_residual(spec: ProblemSpec, F: np.ndarray) -> np.ndarray:
    """|sum_i (f_i / r_i)^2 - 1| for each row; zero exactly on the front."""
    scaled = np.atleast_2d(F) / front_radii(spec)[None, :]
    return np.abs(np.sum(scaled ** 2, axis=1) - 1.0)
