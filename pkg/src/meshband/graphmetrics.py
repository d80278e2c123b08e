"""Topology measures on directed, weighted mesh networks.

An arc ``s -> r`` exists when ``A[r, s] != 0``. For path-based measures only
positive weights are kept and an arc's length is ``1 / w``; global efficiency
first divides all weights by the network's largest positive weight, which
bounds it to ``[0, 1]``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .mesh import MeshNetwork

_TIE_TOL = 1e-12


def _adjacency(network) -> np.ndarray:
    a = network.adjacency if isinstance(network, MeshNetwork) else network
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be square")
    return a


def out_degree(network) -> np.ndarray:
    a = _adjacency(network).copy()
    np.fill_diagonal(a, 0.0)
    return np.count_nonzero(a, axis=0)


def in_degree(network) -> np.ndarray:
    a = _adjacency(network).copy()
    np.fill_diagonal(a, 0.0)
    return np.count_nonzero(a, axis=1)


def out_strength(network, absolute: bool = False) -> np.ndarray:
    """Column sums of the adjacency, i.e. summed weight on each node's outgoing arcs."""
    a = _adjacency(network)
    return np.abs(a).sum(axis=0) if absolute else a.sum(axis=0)


def total_strength(network, absolute: bool = False) -> float:
    return float(out_strength(network, absolute).sum())


def _out_arcs(a, normalize=False):
    n = a.shape[0]
    positive = a > 0
    np.fill_diagonal(positive, False)
    if normalize and positive.any():
        a = a / a[positive].max()
    arcs = [[] for _ in range(n)]
    heads, tails = np.nonzero(positive)
    for tail, head in sorted(zip(tails.tolist(), heads.tolist())):
        arcs[tail].append((head, 1.0 / a[head, tail]))
    return arcs


def _single_source(arcs, source):
    """Dijkstra with shortest-path counting from one source.

    Returns ``(dist, sigma, preds, order)``; ``order`` lists settled nodes by
    non-decreasing distance.
    """
    n = len(arcs)
    dist = [np.inf] * n
    sigma = [0] * n
    preds = [[] for _ in range(n)]
    settled = [False] * n
    order = []
    dist[source] = 0.0
    sigma[source] = 1
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if settled[u]:
            continue
        settled[u] = True
        order.append(u)
        for v, length in arcs[u]:
            if settled[v]:
                continue
            nd = d + length
            cur = dist[v]
            if cur != np.inf and abs(nd - cur) <= _TIE_TOL * max(1.0, nd, cur):
                sigma[v] += sigma[u]
                preds[v].append(u)
            elif nd < cur:
                dist[v] = nd
                sigma[v] = sigma[u]
                preds[v] = [u]
                heapq.heappush(heap, (nd, v))
    return dist, sigma, preds, order


def shortest_paths(network, normalize: bool = False):
    """All-pairs shortest lengths and path counts over positive arcs.

    Returns ``(dist, sigma)``; ``sigma[s][t]`` is the exact number of
    shortest ``s -> t`` paths as a Python int.
    """
    a = _adjacency(network)
    arcs = _out_arcs(a, normalize)
    n = a.shape[0]
    dist = np.empty((n, n))
    sigma = []
    for s in range(n):
        d, sg, _, _ = _single_source(arcs, s)
        dist[s] = d
        sigma.append(sg)
    return dist, sigma


def betweenness_centrality(network) -> np.ndarray:
    """Unnormalised betweenness: sum over pairs of the fraction of shortest paths through a node."""
    a = _adjacency(network)
    arcs = _out_arcs(a)
    n = a.shape[0]
    bc = np.zeros(n)
    for s in range(n):
        _, sigma, preds, order = _single_source(arcs, s)
        delta = [0.0] * n
        for w in reversed(order):
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in preds[w]:
                delta[v] += sigma[v] * coeff
            if w != s:
                bc[w] += delta[w]
    return bc


def global_efficiency(network) -> float:
    a = _adjacency(network)
    n = a.shape[0]
    if n < 2:
        return 0.0
    arcs = _out_arcs(a, normalize=True)
    total = 0.0
    for s in range(n):
        dist = _single_source(arcs, s)[0]
        total += sum(1.0 / d for t, d in enumerate(dist) if t != s and d != np.inf)
    return total / (n * (n - 1))


@dataclass(frozen=True, eq=False)
class NodeMetricsReport:
    out_degree: np.ndarray
    in_degree: np.ndarray
    out_strength: np.ndarray
    out_strength_abs: np.ndarray
    betweenness: np.ndarray
    total_strength: float
    global_efficiency: float
    std_out_degree: float

    def as_dict(self) -> dict:
        return {
            "out_degree": self.out_degree.tolist(),
            "in_degree": self.in_degree.tolist(),
            "out_strength": self.out_strength.tolist(),
            "out_strength_abs": self.out_strength_abs.tolist(),
            "betweenness": self.betweenness.tolist(),
            "total_strength": self.total_strength,
            "global_efficiency": self.global_efficiency,
            "std_out_degree": self.std_out_degree,
        }


def node_metrics(network) -> NodeMetricsReport:
    deg = out_degree(network)
    return NodeMetricsReport(
        out_degree=deg,
        in_degree=in_degree(network),
        out_strength=out_strength(network),
        out_strength_abs=out_strength(network, absolute=True),
        betweenness=betweenness_centrality(network),
        total_strength=total_strength(network),
        global_efficiency=global_efficiency(network),
        std_out_degree=float(np.std(deg)),
    )


@dataclass(frozen=True, eq=False)
class GroupSummary:
    """Session-averaged metrics for one (task, subband) group.

    ``*_std`` fields are the spread across sessions; ``std_out_degree`` is
    the across-node spread of out-degree averaged over sessions.
    """

    n_sessions: int
    out_degree: np.ndarray
    out_strength: np.ndarray
    out_strength_abs: np.ndarray
    betweenness: np.ndarray
    out_degree_std: np.ndarray
    out_strength_std: np.ndarray
    betweenness_std: np.ndarray
    std_out_degree: float
    total_strength: float
    global_efficiency: float
    global_efficiency_std: float

    def as_dict(self) -> dict:
        out = {}
        for key, value in self.__dict__.items():
            out[key] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


def summarize_reports(reports) -> GroupSummary:
    reports = list(reports)
    if not reports:
        raise ValueError("empty group")

    def stack(attr):
        return np.array([getattr(r, attr) for r in reports], dtype=np.float64)

    deg, strength, bc = stack("out_degree"), stack("out_strength"), stack("betweenness")
    eff = stack("global_efficiency")
    return GroupSummary(
        n_sessions=len(reports),
        out_degree=deg.mean(axis=0),
        out_strength=strength.mean(axis=0),
        out_strength_abs=stack("out_strength_abs").mean(axis=0),
        betweenness=bc.mean(axis=0),
        out_degree_std=deg.std(axis=0),
        out_strength_std=strength.std(axis=0),
        betweenness_std=bc.std(axis=0),
        std_out_degree=float(stack("std_out_degree").mean()),
        total_strength=float(stack("total_strength").mean()),
        global_efficiency=float(eff.mean()),
        global_efficiency_std=float(eff.std()),
    )


def subband_summary(networks) -> dict:
    """Group networks by ``(label, subband)`` and summarise each group.

    ``networks`` is an iterable of :class:`MeshNetwork` whose ``meta`` holds a
    ``label`` entry, or of ``((label, subband), network)`` pairs.
    """
    groups: dict = {}
    for item in networks:
        if isinstance(item, MeshNetwork):
            key = (item.meta.get("label"), str(item.subband) if item.subband is not None else None)
            net = item
        else:
            key, net = item
        groups.setdefault(key, []).append(node_metrics(net))
    return {key: summarize_reports(reps) for key, reps in groups.items()}
