"""Ensemble diversity over oracle outputs and one-vs-rest membership significance.

Diversity definitions follow Kuncheva & Whitaker (2003), "Measures of
diversity in classifier ensembles". For ``L`` classifiers, ``N`` samples and
``m(n)`` the number of classifiers correct on sample ``n``:

* disagreement, Q and rho are averaged over all classifier pairs;
* entropy ``E = 1/N sum min(m, L - m) / (L - ceil(L/2))``;
* Kohavi-Wolpert ``KW = 1/(N L^2) sum m (L - m)``;
* ``kappa = 1 - (1/L sum m (L - m)) / (N (L - 1) pbar (1 - pbar))``;
* difficulty ``theta`` is the variance of ``m / L`` over samples.

Degenerate denominators yield a neutral value (0 for Q and rho, 1 for
kappa) and a flag in the report instead of an exception.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

ORACLE_RULE = "membership of the true class > 0.5"


@dataclass(frozen=True, eq=False)
class OracleMatrix:
    matrix: np.ndarray
    rule: str = ORACLE_RULE

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or not np.isin(m, (0, 1)).all():
            raise ValueError("oracle matrix must be a 2-D array of 0/1 entries")
        object.__setattr__(self, "matrix", m.astype(np.int8))


def oracle_outputs(space, labels=None, n_classes=None, threshold: float = 0.5) -> OracleMatrix:
    """1 where a base's membership for the true class exceeds ``threshold``.

    ``space`` is a :class:`~meshband.learn.DecisionSpace`, or an N x (C*E)
    matrix together with ``labels`` and ``n_classes``.
    """
    if hasattr(space, "matrix"):
        matrix, c = space.matrix, space.n_classes
        labels = space.labels if labels is None else labels
    else:
        if labels is None or n_classes is None:
            raise ValueError("a bare matrix needs labels and n_classes")
        matrix, c = np.asarray(space, dtype=np.float64), int(n_classes)
    return _oracle(matrix, np.asarray(labels), c, threshold)


def _oracle(matrix, labels, c, threshold):
    n, width = matrix.shape
    if width % c:
        raise ValueError(f"matrix width {width} is not a multiple of C={c}")
    blocks = matrix.reshape(n, width // c, c)
    true_membership = blocks[np.arange(n), :, labels]
    return OracleMatrix((true_membership > threshold).astype(np.int8))


@dataclass(frozen=True)
class DiversityReport:
    disagreement: float
    mean_q: float
    mean_rho: float
    entropy: float
    kappa: float
    kw_variance: float
    theta: float
    flags: tuple = field(default=())

    def as_dict(self) -> dict:
        return {
            "disagreement": self.disagreement,
            "mean_q": self.mean_q,
            "mean_rho": self.mean_rho,
            "entropy": self.entropy,
            "kappa": self.kappa,
            "kw_variance": self.kw_variance,
            "theta": self.theta,
            "flags": list(self.flags),
        }


def _matrix(oracle):
    m = oracle.matrix if isinstance(oracle, OracleMatrix) else OracleMatrix(np.asarray(oracle)).matrix
    if m.shape[1] < 2:
        raise ValueError("diversity needs at least two classifiers")
    if m.shape[0] < 1:
        raise ValueError("diversity needs at least one sample")
    return m.astype(np.int64)


def _pairwise(m):
    n, n_cls = m.shape
    dis, qs, rhos = [], [], []
    flags = set()
    for i in range(n_cls):
        a = m[:, i]
        for k in range(i + 1, n_cls):
            b = m[:, k]
            n11 = int(np.sum(a & b))
            n10 = int(np.sum(a & (1 - b)))
            n01 = int(np.sum((1 - a) & b))
            n00 = n - n11 - n10 - n01
            dis.append((n10 + n01) / n)
            num = n11 * n00 - n10 * n01
            qden = n11 * n00 + n10 * n01
            if qden == 0:
                flags.add("q_zero_denominator")
                qs.append(0.0)
            else:
                qs.append(num / qden)
            rden = (n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)
            if rden == 0:
                flags.add("rho_zero_denominator")
                rhos.append(0.0)
            else:
                rhos.append(num / math.sqrt(rden))
    return float(np.mean(dis)), float(np.mean(qs)), float(np.mean(rhos)), flags


def pairwise_diversity(oracle) -> tuple[float, float, float]:
    """Mean (disagreement, Yule's Q, correlation) over all classifier pairs."""
    dis, q, rho, flags = _pairwise(_matrix(oracle))
    for flag in sorted(flags):
        warnings.warn(f"pairwise diversity: {flag}, value set to 0", RuntimeWarning, stacklevel=2)
    return dis, q, rho


def _nonpairwise(m):
    n, n_cls = m.shape
    correct = m.sum(axis=1)
    flags = set()
    entropy = float(np.mean(np.minimum(correct, n_cls - correct)) / (n_cls - math.ceil(n_cls / 2)))
    spread = correct * (n_cls - correct)
    kw = float(spread.sum() / (n * n_cls ** 2))
    pbar = float(m.mean())
    denom = n * (n_cls - 1) * pbar * (1.0 - pbar)
    if denom == 0:
        flags.add("kappa_undefined")
        kappa = 1.0
    else:
        kappa = float(1.0 - (spread.sum() / n_cls) / denom)
    theta = float(np.var(correct / n_cls))
    return entropy, kappa, kw, theta, flags


def nonpairwise_diversity(oracle) -> tuple[float, float, float, float]:
    """(entropy, kappa, Kohavi-Wolpert variance, difficulty theta)."""
    entropy, kappa, kw, theta, flags = _nonpairwise(_matrix(oracle))
    for flag in sorted(flags):
        warnings.warn(f"non-pairwise diversity: {flag}, kappa set to 1", RuntimeWarning, stacklevel=2)
    return entropy, kappa, kw, theta


def diversity_report(oracle) -> DiversityReport:
    m = _matrix(oracle)
    dis, q, rho, f1 = _pairwise(m)
    entropy, kappa, kw, theta, f2 = _nonpairwise(m)
    return DiversityReport(dis, q, rho, entropy, kappa, kw, theta, tuple(sorted(f1 | f2)))


# --------------------------------------------------------------------------
# membership significance


@dataclass(frozen=True, eq=False)
class SignificanceTable:
    """``z[c]`` holds one statistic per membership column for class ``c`` vs the rest.

    ``block_max[c, e]`` is the largest statistic within base block ``e``.
    """

    z: np.ndarray
    block_max: np.ndarray
    block_labels: tuple
    as_printed: bool = False

    def as_dict(self) -> dict:
        return {
            "z": np.where(np.isfinite(self.z), self.z, None).tolist(),
            "block_max": np.where(np.isfinite(self.block_max), self.block_max, None).tolist(),
            "block_labels": list(self.block_labels),
            "as_printed": self.as_printed,
        }


def pooled_t(group, rest) -> np.ndarray:
    """Absolute two-sample t statistic with pooled variance, per column."""
    g = np.asarray(group, dtype=np.float64)
    r = np.asarray(rest, dtype=np.float64)
    n1, n0 = g.shape[0], r.shape[0]
    if n1 < 2 or n0 < 2:
        raise ValueError(f"each group needs at least 2 rows, got {n1} and {n0}")
    diff = np.abs(g.mean(axis=0) - r.mean(axis=0))
    pooled = ((n1 - 1) * g.var(axis=0, ddof=1) + (n0 - 1) * r.var(axis=0, ddof=1)) / (n1 + n0 - 2)
    se = np.sqrt(pooled * (1.0 / n1 + 1.0 / n0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, diff / se, np.where(diff > 0, np.inf, 0.0))
    return z


def printed_statistic(group, rest) -> np.ndarray:
    """``|mean1 - mean0| / sqrt(sd1/n1 - sd0/n0)``; NaN where the radicand is negative."""
    g = np.asarray(group, dtype=np.float64)
    r = np.asarray(rest, dtype=np.float64)
    n1, n0 = g.shape[0], r.shape[0]
    if n1 < 2 or n0 < 2:
        raise ValueError(f"each group needs at least 2 rows, got {n1} and {n0}")
    radicand = g.std(axis=0, ddof=1) / n1 - r.std(axis=0, ddof=1) / n0
    diff = np.abs(g.mean(axis=0) - r.mean(axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(radicand > 0, diff / np.sqrt(np.where(radicand > 0, radicand, 1.0)), np.nan)


def membership_significance(memberships, labels, n_classes=None, block_size=None,
                            block_labels=None, as_printed: bool = False) -> SignificanceTable:
    """One-vs-rest statistic for every membership column and class.

    ``block_size`` (default ``n_classes``) splits the columns into base
    blocks for the per-block maxima.
    """
    m = np.asarray(memberships, dtype=np.float64)
    y = np.asarray(labels)
    if m.ndim != 2 or y.shape != (m.shape[0],):
        raise ValueError("memberships must be N x F with N labels")
    c = int(n_classes if n_classes is not None else y.max() + 1)
    block = int(block_size or c)
    if m.shape[1] % block:
        raise ValueError(f"{m.shape[1]} columns do not split into blocks of {block}")
    stat = printed_statistic if as_printed else pooled_t
    z = np.vstack([stat(m[y == k], m[y != k]) for k in range(c)])
    n_blocks = m.shape[1] // block
    blocks = z.reshape(c, n_blocks, block)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        block_max = np.nanmax(np.where(np.isnan(blocks), -np.inf, blocks), axis=2)
    block_max = np.where(np.isneginf(block_max), np.nan, block_max)
    labels_out = tuple(block_labels) if block_labels is not None else tuple(range(n_blocks))
    return SignificanceTable(z, block_max, labels_out, as_printed)
