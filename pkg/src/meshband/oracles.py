"""Slow, direct reference implementations used to cross-check the fast paths.

None of these share code with the modules they check beyond filter taps.
They are exercised by the test suite and by ``meshband verify``.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def dense_ridge_solve(neighbors, target, lam):
    """Solve ``(N^T N + lam I) w = N^T y`` by Gaussian elimination with partial pivoting."""
    n = [[float(v) for v in row] for row in np.atleast_2d(np.asarray(neighbors, dtype=float))]
    y = [float(v) for v in np.ravel(target)]
    rows, p = len(n), len(n[0])
    a = [[sum(n[t][i] * n[t][k] for t in range(rows)) + (lam if i == k else 0.0) for k in range(p)]
         for i in range(p)]
    b = [sum(n[t][i] * y[t] for t in range(rows)) for i in range(p)]
    for col in range(p):
        piv = max(range(col, p), key=lambda r: abs(a[r][col]))
        if a[piv][col] == 0.0:
            raise ZeroDivisionError("singular normal equations")
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(col + 1, p):
            f = a[r][col] / a[col][col]
            for k in range(col, p):
                a[r][k] -= f * a[col][k]
            b[r] -= f * b[col]
    w = [0.0] * p
    for i in reversed(range(p)):
        w[i] = (b[i] - sum(a[i][k] * w[k] for k in range(i + 1, p))) / a[i][i]
    return np.array(w)


def _level_matrix(n, lowpass, highpass):
    """One periodic analysis level as an explicit n x n matrix."""
    m = np.zeros((n, n))
    for row in range(n // 2):
        for k in range(len(lowpass)):
            col = (2 * row + k) % n
            m[row, col] += lowpass[k]
            m[n // 2 + row, col] += highpass[k]
    return m


def matrix_dwt(n, lowpass, highpass, levels):
    """Full multi-level transform matrix for length-``n`` signals.

    Output ordering of ``Q @ x`` is ``[a_L, d_L, d_{L-1}, ..., d_1]``.
    """
    q = np.eye(n)
    size = n
    for _ in range(levels):
        step = np.eye(n)
        step[:size, :size] = _level_matrix(size, lowpass, highpass)
        q = step @ q
        size //= 2
    return q


def split_matrix_dwt(vec, n, levels):
    """Split ``matrix_dwt`` output into (approx_L, [d_1 .. d_L])."""
    sizes = [n >> l for l in range(1, levels + 1)]
    approx = vec[:sizes[-1]]
    details = []
    start = sizes[-1]
    for l in range(levels, 0, -1):
        details.append(vec[start:start + sizes[l - 1]])
        start += sizes[l - 1]
    return approx, details[::-1]


def _arc_lengths(adjacency):
    """Arc list ``(s, r, 1/w)`` for every positive weight, arc s -> r from A[r][s]."""
    a = np.asarray(adjacency, dtype=float)
    arcs = {}
    for r in range(a.shape[0]):
        for s in range(a.shape[1]):
            if r != s and a[r, s] > 0:
                arcs.setdefault(s, []).append((r, 1.0 / a[r, s]))
    return arcs


def _close(a, b):
    return abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))


def allpairs_paths(adjacency):
    """Enumerate every simple path between every ordered pair.

    Returns ``(dist, sigma, through)`` where ``through[s][t][v]`` counts the
    shortest s->t paths passing through ``v`` as an interior node.
    """
    arcs = _arc_lengths(adjacency)
    n = len(adjacency)
    dist = np.full((n, n), np.inf)
    sigma = [[0] * n for _ in range(n)]
    through = [[[0] * n for _ in range(n)] for _ in range(n)]
    paths_by_pair: dict = {}

    def dfs(path, length):
        u = path[-1]
        if len(path) > 1:
            paths_by_pair.setdefault((path[0], u), []).append((length, tuple(path)))
        for v, ln in arcs.get(u, ()):
            if v not in path:
                path.append(v)
                dfs(path, length + ln)
                path.pop()

    for s in range(n):
        dfs([s], 0.0)
    for (s, t), paths in paths_by_pair.items():
        best = min(length for length, _ in paths)
        dist[s, t] = best
        for length, path in paths:
            if _close(length, best):
                sigma[s][t] += 1
                for v in path[1:-1]:
                    through[s][t][v] += 1
    for s in range(n):
        dist[s, s] = 0.0
    return dist, sigma, through


def brute_betweenness(adjacency):
    """Betweenness from full path enumeration, in exact rational arithmetic."""
    _, sigma, through = allpairs_paths(adjacency)
    n = len(adjacency)
    bc = [Fraction(0)] * n
    for s in range(n):
        for t in range(n):
            if s == t or sigma[s][t] == 0:
                continue
            for v in range(n):
                if v != s and v != t and through[s][t][v]:
                    bc[v] += Fraction(through[s][t][v], sigma[s][t])
    return bc


def relaxation_distances(adjacency, normalize=False):
    """All-pairs shortest lengths by repeated relaxation over every arc."""
    a = np.asarray(adjacency, dtype=float)
    n = a.shape[0]
    if normalize:
        top = a[a > 0].max() if np.any(a > 0) else 1.0
        a = a / top
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    arcs = [(s, r, 1.0 / a[r, s]) for r in range(n) for s in range(n) if r != s and a[r, s] > 0]
    for _ in range(n):
        changed = False
        for src in range(n):
            for s, r, ln in arcs:
                if d[src, s] + ln < d[src, r]:
                    d[src, r] = d[src, s] + ln
                    changed = True
        if not changed:
            break
    return d


def brute_global_efficiency(adjacency):
    d = relaxation_distances(adjacency, normalize=True)
    n = d.shape[0]
    if n < 2:
        return 0.0
    total = 0.0
    for s in range(n):
        for t in range(n):
            if s != t and math.isfinite(d[s, t]):
                total += 1.0 / d[s, t]
    return total / (n * (n - 1))


def pair_contingency(a, b):
    """Counts ``(n11, n10, n01, n00)`` for two binary oracle columns."""
    n11 = n10 = n01 = n00 = 0
    for x, y in zip(a, b):
        if x and y:
            n11 += 1
        elif x:
            n10 += 1
        elif y:
            n01 += 1
        else:
            n00 += 1
    return n11, n10, n01, n00
