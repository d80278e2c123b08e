"""Cross-checks of the fast implementations against the reference oracles."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import oracles
from .analysis import pairwise_diversity
from .data import region_average
from .graphmetrics import betweenness_centrality, global_efficiency
from .mesh import build_mesh_network, correlation_matrix, standardize_rows
from .wavelet import decompose, get_family, reconstruct_subband


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def check_reconstruction(rng, n_signals=10, length=1940, levels=11, tol=1e-8):
    worst = 0.0
    for name in ("haar", "daubechies4"):
        fam = get_family(name)
        for _ in range(n_signals):
            x = rng.standard_normal(length)
            c = decompose(x, fam, levels)
            parts = [reconstruct_subband(c, j, fam) for j in range(2 * levels + 1)]
            total = parts[levels] + sum(parts[levels + 1:])
            worst = max(worst, np.max(np.abs(x - total)))
            for l in range(1, levels + 1):
                worst = max(worst, np.max(np.abs(parts[l - 1] - parts[l] - parts[levels + l])))
    return Check("perfect reconstruction", worst <= tol, f"max error {worst:.2e} (tol {tol:g})")


def check_wavelet_matrix(rng, n_signals=10, length=256, levels=4, tol=1e-10):
    worst = 0.0
    for name in ("haar", "daubechies4"):
        fam = get_family(name)
        q = oracles.matrix_dwt(length, fam.lowpass, fam.highpass, levels)
        for _ in range(n_signals):
            x = rng.standard_normal(length)
            c = decompose(x, fam, levels)
            approx, details = oracles.split_matrix_dwt(q @ x, length, levels)
            worst = max(worst, np.max(np.abs(c.approx[-1] - approx)))
            for l in range(levels):
                worst = max(worst, np.max(np.abs(c.detail[l] - details[l])))
    return Check("wavelet vs matrix oracle", worst <= tol, f"max error {worst:.2e} (tol {tol:g})")


def check_ridge(rng, n_instances=20, regions=10, p=4, length=60, tol=1e-9):
    worst = 0.0
    degree_ok = True
    for i in range(n_instances):
        lam = (0.1, 32.0)[i % 2]
        m = rng.standard_normal((regions, length))
        net = build_mesh_network(m, p, lam)
        z = standardize_rows(m)
        corr = correlation_matrix(z)
        for seed in range(regions):
            order = sorted((v for v in range(regions) if v != seed), key=lambda v: (-corr[seed, v], v))[:p]
            w = oracles.dense_ridge_solve(z[order].T, z[seed], lam)
            worst = max(worst, np.max(np.abs(net.adjacency[seed, order] - w)))
            degree_ok &= np.count_nonzero(net.adjacency[seed]) == p
    ok = worst <= tol and degree_ok
    return Check("ridge vs normal equations", ok, f"max error {worst:.2e}, in-degree p: {degree_ok}")


def _random_digraph(rng, n):
    a = rng.choice([0.0, 0.0, 1.0, 0.5, 0.25, -0.5], size=(n, n))
    np.fill_diagonal(a, 0.0)
    return a


def check_graph(rng, n_graphs=40, max_nodes=7, tol=1e-9):
    worst_bc = worst_eff = 0.0
    for _ in range(n_graphs):
        a = _random_digraph(rng, int(rng.integers(2, max_nodes + 1)))
        brute = np.array([float(v) for v in oracles.brute_betweenness(a)])
        worst_bc = max(worst_bc, np.max(np.abs(betweenness_centrality(a) - brute)))
        worst_eff = max(worst_eff, abs(global_efficiency(a) - oracles.brute_global_efficiency(a)))
    ok = worst_bc <= tol and worst_eff <= tol
    return Check("graph metrics vs path enumeration", ok,
                 f"betweenness {worst_bc:.2e}, efficiency {worst_eff:.2e}")


def check_diversity(rng, n_cases=20, tol=1e-12):
    worst = 0.0
    for _ in range(n_cases):
        m = rng.integers(0, 2, size=(30, 2))
        n11, n10, n01, n00 = oracles.pair_contingency(m[:, 0], m[:, 1])
        qden = n11 * n00 + n10 * n01
        rden = (n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)
        want = ((n10 + n01) / 30,
                (n11 * n00 - n10 * n01) / qden if qden else 0.0,
                (n11 * n00 - n10 * n01) / np.sqrt(rden) if rden else 0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            got = pairwise_diversity(m)
        worst = max(worst, max(abs(g - w) for g, w in zip(got, want)))
    return Check("pairwise diversity vs contingency counts", worst <= tol, f"max error {worst:.2e}")


def check_region_average(rng, tol=1e-12):
    v = rng.standard_normal((90, 50))
    err = np.max(np.abs(region_average(v) - v.sum(axis=0) / 90))
    return Check("region average vs column sums", err <= tol, f"max error {err:.2e}")


CHECKS = (check_reconstruction, check_wavelet_matrix, check_ridge, check_graph,
          check_diversity, check_region_average)


def run_checks(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    return [check(rng) for check in CHECKS]
