"""Mesh networks: ridge regression of each region on its functional neighbours.

Arc orientation: ``adjacency[r, s]`` is the weight of the arc ``s -> r``,
i.e. the coefficient of neighbour ``s`` in the regression of seed ``r``.
Every row therefore has exactly ``p`` nonzero entries (in-degree ``p``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .wavelet import SubbandIndex

FEATURE_KINDS = ("mesh_arcs", "pairwise_corr", "raw_series")


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Neighborhood:
    seed: int
    neighbors: tuple[int, ...]
    correlations: tuple[float, ...]

    @property
    def p(self) -> int:
        return len(self.neighbors)


@dataclass(frozen=True, eq=False)
class MeshNetwork:
    adjacency: np.ndarray
    subband: SubbandIndex | None = None
    meta: dict = field(default_factory=dict)
    residual_variance: np.ndarray | None = None

    @property
    def n_regions(self) -> int:
        return self.adjacency.shape[0]


@dataclass(frozen=True, eq=False)
class FeatureTable:
    features: np.ndarray
    labels: np.ndarray
    subject_ids: tuple[str, ...]
    feature_kind: str
    subband: SubbandIndex | None = None

    def __post_init__(self):
        if self.feature_kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.feature_kind!r}")
        n = self.features.shape[0]
        if len(self.labels) != n or len(self.subject_ids) != n:
            raise ValueError("features, labels and subject_ids must have equal length")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("feature table contains non-finite entries")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]


def standardize_rows(matrix) -> np.ndarray:
    """Z-score each row (population variance)."""
    m = np.asarray(matrix, dtype=np.float64)
    mu = m.mean(axis=1, keepdims=True)
    sd = m.std(axis=1, keepdims=True)
    _check_variance(m, sd.ravel())
    return (m - mu) / sd


def _check_variance(m, sd):
    scale = np.abs(m).max(axis=1)
    bad = np.flatnonzero(~(sd > 1e-13 * np.maximum(scale, 1e-300)))
    if bad.size:
        raise MeshError(f"region {int(bad[0])} has zero variance in this window")


def correlation_matrix(session_matrix) -> np.ndarray:
    """Pearson correlation between all region rows."""
    m = np.asarray(session_matrix, dtype=np.float64)
    centered = m - m.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", centered, centered))
    _check_variance(m, norms)
    corr = (centered @ centered.T) / np.outer(norms, norms)
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def _rank_neighbors(corr_row, seed, p):
    candidates = np.array([s for s in range(corr_row.size) if s != seed])
    # descending correlation, smaller index first on ties
    order = np.lexsort((candidates, -corr_row[candidates]))
    chosen = candidates[order[:p]]
    return Neighborhood(int(seed), tuple(int(s) for s in chosen),
                        tuple(float(corr_row[s]) for s in chosen))


def _check_shape(m, p):
    if m.ndim != 2:
        raise MeshError("session matrix must be R x D")
    r, d = m.shape
    if not 1 <= p < r:
        raise MeshError(f"mesh size p={p} must satisfy 1 <= p < R={r}")
    if d < 3:
        raise MeshError(f"session has {d} scans, need at least 3")


def functional_neighbors(session_matrix, seed: int, p: int) -> Neighborhood:
    """The ``p`` regions most positively correlated with ``seed``."""
    m = np.asarray(session_matrix, dtype=np.float64)
    _check_shape(m, p)
    if not 0 <= seed < m.shape[0]:
        raise MeshError(f"seed {seed} outside [0, {m.shape[0]})")
    return _rank_neighbors(correlation_matrix(m)[seed], seed, p)


def ridge_mesh(session_matrix, hood: Neighborhood, lam: float):
    """Ridge weights of ``hood.seed`` regressed on its neighbours.

    Returns ``(weights, residual_variance)`` with
    ``weights = (N^T N + lam I)^-1 N^T y``.
    """
    if lam < 0:
        raise MeshError("lambda must be non-negative")
    m = np.asarray(session_matrix, dtype=np.float64)
    n = m[list(hood.neighbors)].T
    y = m[hood.seed]
    gram = n.T @ n
    gram[np.diag_indices_from(gram)] += lam
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        factor = None
    if factor is not None:
        pivots = np.abs(np.diag(factor[0]))
        if pivots.min() ** 2 <= 1e-12 * np.abs(np.diag(gram)).max():
            factor = None
    if factor is None:
        raise MeshError(
            f"singular normal equations for seed {hood.seed} (collinear neighbours); use lambda > 0"
        )
    w = scipy.linalg.cho_solve(factor, n.T @ y, check_finite=False)
    resid = y - n @ w
    return w, float(np.var(resid))


def build_mesh_network(session_matrix, p: int, lam: float, subband=None, meta=None,
                       standardize: bool = True) -> MeshNetwork:
    """Solve one local mesh per seed region and assemble the R x R adjacency."""
    m = np.asarray(session_matrix, dtype=np.float64)
    _check_shape(m, p)
    if standardize:
        m = standardize_rows(m)
    corr = correlation_matrix(m)
    r = m.shape[0]
    adjacency = np.zeros((r, r))
    residual = np.empty(r)
    for seed in range(r):
        hood = _rank_neighbors(corr[seed], seed, p)
        w, residual[seed] = ridge_mesh(m, hood, lam)
        adjacency[seed, list(hood.neighbors)] = w
    return MeshNetwork(adjacency, subband, dict(meta or {}), residual)


def embed_mesh(network) -> np.ndarray:
    a = network.adjacency if isinstance(network, MeshNetwork) else np.asarray(network)
    return a.reshape(-1).copy()


def unembed(vector, n_regions: int | None = None) -> np.ndarray:
    v = np.asarray(vector, dtype=np.float64)
    r = n_regions or int(round(np.sqrt(v.size)))
    if r * r != v.size:
        raise ValueError(f"vector of length {v.size} is not a square adjacency")
    return v.reshape(r, r).copy()


def pairwise_correlation_features(session_matrix) -> np.ndarray:
    return correlation_matrix(session_matrix).reshape(-1)


def raw_series_features(session_matrix, t_fix: int) -> np.ndarray:
    """Rows cut or zero-padded to ``t_fix`` samples, then concatenated."""
    m = np.asarray(session_matrix, dtype=np.float64)
    if t_fix < 1:
        raise ValueError("t_fix must be positive")
    out = np.zeros((m.shape[0], t_fix))
    keep = min(t_fix, m.shape[1])
    out[:, :keep] = m[:, :keep]
    return out.reshape(-1)
