"""Scalar reference implementations of the benchmark objective functions.

Coded independently from quiver.problems, directly from the published
transformation definitions, using plain Python loops over one decision
vector at a time.  Used by the tests to cross-check the vectorized
module on fixed and randomized inputs.
"""

import math


def dtlz2_scalar(x, m):
    d = len(x)
    g = sum((xi - 0.5) ** 2 for xi in x[m - 1:])
    f = []
    for i in range(m):
        val = 1.0 + g
        for j in range(m - 1 - i):
            val *= math.cos(x[j] * math.pi / 2.0)
        if i > 0:
            val *= math.sin(x[m - 1 - i] * math.pi / 2.0)
        f.append(val)
    return f


def _s_multi(y, a, b, c):
    t = abs(y - c) / (2.0 * (math.floor(c - y) + c))
    return (1.0 + math.cos((4.0 * a + 2.0) * math.pi * (0.5 - t)) + 4.0 * b * t * t) / (b + 2.0)


def _s_decept(y, a, b, c):
    t1 = math.floor(y - a + b) * (1.0 - c + (a - b) / b) / (a - b)
    t2 = math.floor(a + b - y) * (1.0 - c + (1.0 - a - b) / b) / (1.0 - a - b)
    return 1.0 + (abs(y - a) - b) * (t1 + t2 + 1.0 / b)


def _b_param(y, u, a, b, c):
    v = a - (1.0 - 2.0 * u) * abs(math.floor(0.5 - u) + a)
    return y ** (b + (c - b) * v)


def _r_sum_mean(ys):
    return sum(ys) / len(ys)


def _r_nonsep(ys, a):
    n = len(ys)
    num = 0.0
    for j in range(n):
        num += ys[j]
        for k in range(a - 1):
            num += abs(ys[j] - ys[(1 + j + k) % n])
    half = math.ceil(a / 2.0)
    denom = n * half * (1.0 + 2.0 * a - 2.0 * half) / a
    return num / denom


def _shapes_concave(xs, m):
    h = []
    for i in range(1, m + 1):
        val = 1.0
        for j in range(m - i):
            val *= math.sin(xs[j] * math.pi / 2.0)
        if i > 1:
            val *= math.cos(xs[m - i] * math.pi / 2.0)
        h.append(val)
    return h


def _assemble(t, m):
    # x_i = max(t_m, 1) * (t_i - 0.5) + 0.5 which is the identity here
    # because the degeneracy constants are all 1 for these problems.
    xs = list(t[: m - 1]) + [t[m - 1]]
    h = _shapes_concave(xs, m)
    return [t[m - 1] + 2.0 * (i + 1) * h[i] for i in range(m)]


def wfg4_scalar(z, m, k):
    n = len(z)
    y = [z[i] / (2.0 * (i + 1)) for i in range(n)]
    y = [_s_multi(v, 30.0, 10.0, 0.35) for v in y]
    gap = k // (m - 1)
    t = []
    for i in range(m - 1):
        t.append(_r_sum_mean(y[i * gap:(i + 1) * gap]))
    t.append(_r_sum_mean(y[k:]))
    return _assemble(t, m)


def wfg9_scalar(z, m, k):
    n = len(z)
    y = [z[i] / (2.0 * (i + 1)) for i in range(n)]
    out = []
    for i in range(n - 1):
        u = _r_sum_mean(y[i + 1:])
        out.append(_b_param(y[i], u, 0.98 / 49.98, 0.02, 50.0))
    out.append(y[-1])
    y = out
    y = [_s_decept(y[i], 0.35, 0.001, 0.05) if i < k else _s_multi(y[i], 30.0, 95.0, 0.35)
         for i in range(n)]
    gap = k // (m - 1)
    t = []
    for i in range(m - 1):
        t.append(_r_nonsep(y[i * gap:(i + 1) * gap], gap))
    t.append(_r_nonsep(y[k:], n - k))
    return _assemble(t, m)
