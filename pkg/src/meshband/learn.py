"""Linear classifiers, stacked fusion of per-subband classifiers, and voting baselines.

Class labels are 0-based integers throughout this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mesh import FeatureTable

MODEL_KINDS = ("multinomial_logistic", "linear_max_margin")
META_KINDS = ("logistic", "maxmargin", "mv", "wmv")


@dataclass(frozen=True, eq=False)
class LinearClassifierModel:
    """``weights`` is C x (F + 1); the last column is the bias."""

    kind: str
    weights: np.ndarray
    n_iter: int
    final_loss: float
    seed: int
    losses: tuple = field(default=(), repr=False)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def scores(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        return x @ self.weights[:, :-1].T + self.weights[:, -1]


def _validate(features, labels, n_classes):
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValueError("features must be N x F and labels length N")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    if y.size and (y.min() < 0 or (n_classes is not None and y.max() >= n_classes)):
        raise ValueError("labels must lie in [0, n_classes)")
    c = int(n_classes if n_classes is not None else y.max() + 1)
    if np.unique(y).size < 2:
        raise ValueError("training labels cover a single class")
    if x.shape[0] < c:
        raise ValueError(f"need at least C={c} training rows, got {x.shape[0]}")
    return x, y.astype(np.int64), c


def _row_space(x):
    """Orthonormal basis of the row space of ``x`` (F x k) and coordinates (N x k).

    Gradient iterates started at zero never leave this subspace, so
    optimising in these coordinates reproduces the full-dimensional path.
    """
    if x.shape[1] <= x.shape[0]:
        return None, x
    _, s, vt = np.linalg.svd(x, full_matrices=False)
    keep = s > s[0] * 1e-13 if s.size and s[0] > 0 else np.zeros(s.size, bool)
    basis = vt[keep].T
    return basis, x @ basis


def softmax(scores) -> np.ndarray:
    z = np.asarray(scores, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logistic_objective(params, features, labels, reg):
    """Mean cross-entropy plus ``reg / 2 * ||W||^2`` (bias unpenalised), with gradient.

    ``params`` is C x (F + 1) with the bias in the last column.
    """
    x = features
    n = x.shape[0]
    w, b = params[:, :-1], params[:, -1]
    z = x @ w.T + b
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), labels]) + 0.5 * reg * np.sum(w * w))
    prob = np.exp(z - logsum[:, None])
    prob[np.arange(n), labels] -= 1.0
    prob /= n
    grad = np.empty_like(params)
    grad[:, :-1] = prob.T @ x + reg * w
    grad[:, -1] = prob.sum(axis=0)
    return loss, grad


def train_logistic(features, labels, n_classes=None, reg: float = 1.0, seed: int = 0,
                   max_iter: int = 2000, tol: float = 1e-6) -> LinearClassifierModel:
    """Multinomial logistic regression by full-batch gradient descent.

    Each step backtracks (halving) from twice the previous step length until
    the Armijo condition holds. Stops at gradient norm ``tol`` or
    ``max_iter`` steps. Zero initialisation; ``seed`` is recorded only.
    """
    x, y, c = _validate(features, labels, n_classes)
    if reg < 0:
        raise ValueError("reg must be non-negative")
    basis, xr = _row_space(x)
    params = np.zeros((c, xr.shape[1] + 1))
    loss, grad = logistic_objective(params, xr, y, reg)
    losses = [loss]
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        gnorm2 = float(np.sum(grad * grad))
        if np.sqrt(gnorm2) <= tol:
            it -= 1
            break
        step *= 2.0
        while True:
            trial = params - step * grad
            trial_loss, trial_grad = logistic_objective(trial, xr, y, reg)
            if trial_loss <= loss - 1e-4 * step * gnorm2 or step < 1e-12:
                break
            step *= 0.5
        if trial_loss > loss:
            it -= 1
            break
        params, loss, grad = trial, trial_loss, trial_grad
        losses.append(loss)
    weights = _lift(params, basis)
    return LinearClassifierModel("multinomial_logistic", weights, it, loss, seed, tuple(losses))


def _lift(params, basis):
    if basis is None:
        return params
    out = np.empty((params.shape[0], basis.shape[0] + 1))
    out[:, :-1] = params[:, :-1] @ basis.T
    out[:, -1] = params[:, -1]
    return out


def train_linear_max_margin(features, labels, n_classes=None, reg: float = 1.0, seed: int = 0,
                            max_iter: int = 1000) -> LinearClassifierModel:
    """One-vs-rest linear hinge-loss classifiers by full-batch subgradient descent.

    Objective per class: ``reg / 2 * ||w||^2 + mean(max(0, 1 - y (w.x + b)))``.
    Step ``1 / (reg * t)`` on ``w`` and ``1 / t`` on ``b``; the returned
    weights average the iterates of the second half of the run.
    """
    x, y, c = _validate(features, labels, n_classes)
    if reg <= 0:
        raise ValueError("reg must be positive for the max-margin classifier")
    basis, xr = _row_space(x)
    n, f = xr.shape
    targets = np.where(y[:, None] == np.arange(c)[None, :], 1.0, -1.0)
    w = np.zeros((c, f))
    b = np.zeros(c)
    w_avg = np.zeros_like(w)
    b_avg = np.zeros_like(b)
    n_avg = 0
    losses = []
    for t in range(1, max_iter + 1):
        margins = targets * (xr @ w.T + b)
        active = (margins < 1.0) * targets
        losses.append(float(np.mean(np.maximum(0.0, 1.0 - margins).sum(axis=1)) + 0.5 * reg * np.sum(w * w)))
        eta = 1.0 / (reg * t)
        w = (1.0 - eta * reg) * w + eta * (active.T @ xr) / n
        b = b + (active.sum(axis=0) / n) / t
        if t > max_iter // 2:
            w_avg += w
            b_avg += b
            n_avg += 1
    params = np.hstack([w_avg / n_avg, (b_avg / n_avg)[:, None]])
    weights = _lift(params, basis)
    return LinearClassifierModel("linear_max_margin", weights, max_iter, losses[-1], seed, tuple(losses))


def train_classifier(kind, features, labels, n_classes=None, reg=1.0, seed=0) -> LinearClassifierModel:
    if kind in ("logistic", "multinomial_logistic"):
        return train_logistic(features, labels, n_classes, reg, seed)
    if kind in ("maxmargin", "linear_max_margin", "svm"):
        return train_linear_max_margin(features, labels, n_classes, reg, seed)
    raise ValueError(f"unknown classifier kind {kind!r}")


def predict_posteriors(model: LinearClassifierModel, features) -> np.ndarray:
    """Class-membership rows summing to one (softmax of the linear scores)."""
    return softmax(model.scores(features))


def predict_labels(model: LinearClassifierModel, features) -> np.ndarray:
    return np.argmax(model.scores(features), axis=1)


def accuracy(predicted, labels) -> float:
    predicted = np.asarray(predicted)
    return float(np.mean(predicted == np.asarray(labels))) if predicted.size else float("nan")


# --------------------------------------------------------------------------
# cross-validation plumbing


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: dict

    def fold_of(self, subject_id) -> int:
        return self.assignment[subject_id]

    def subjects_in(self, fold: int) -> list:
        return [s for s, f in self.assignment.items() if f == fold]


def make_fold_plan(subjects, k: int, seed: int = 0) -> FoldPlan:
    """Shuffle subjects with a seeded generator and deal them round-robin into ``k`` folds."""
    ids = list(subjects.subject_ids if hasattr(subjects, "subject_ids") else subjects)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate subject ids")
    if not 2 <= k <= len(ids):
        raise ValueError(f"k must lie in [2, {len(ids)}], got {k}")
    order = np.random.default_rng(seed).permutation(len(ids))
    return FoldPlan(k, {ids[i]: pos % k for pos, i in enumerate(order)})


@dataclass(frozen=True, eq=False)
class DecisionSpace:
    """Concatenated class memberships: block ``e`` spans columns ``e*C .. (e+1)*C``."""

    matrix: np.ndarray
    base_order: tuple
    labels: np.ndarray
    subject_ids: tuple
    n_classes: int
    rows: np.ndarray | None = None

    @property
    def n_bases(self) -> int:
        return len(self.base_order)

    def block(self, e: int) -> np.ndarray:
        c = self.n_classes
        return self.matrix[:, e * c:(e + 1) * c]

    def base_votes(self) -> np.ndarray:
        """N x E argmax class of each base."""
        return np.stack([np.argmax(self.block(e), axis=1) for e in range(self.n_bases)], axis=1)


def decision_space_from_blocks(blocks, labels, n_classes, base_order=None, subject_ids=None):
    blocks = [np.asarray(b, dtype=np.float64) for b in blocks]
    n = blocks[0].shape[0]
    return DecisionSpace(
        np.hstack(blocks),
        tuple(base_order if base_order is not None else range(len(blocks))),
        np.asarray(labels),
        tuple(subject_ids if subject_ids is not None else [""] * n),
        int(n_classes),
    )


@dataclass(frozen=True, eq=False)
class FoldDecision:
    fold: int
    train: DecisionSpace
    test: DecisionSpace
    base_train_accuracy: np.ndarray
    base_test_accuracy: np.ndarray


def _check_tables(tables):
    first = tables[0]
    for t in tables[1:]:
        if t.n_rows != first.n_rows or tuple(t.subject_ids) != tuple(first.subject_ids) \
                or not np.array_equal(t.labels, first.labels):
            raise ValueError(
                f"feature tables are not aligned ({t.subband} vs {first.subband})"
            )


def build_decision_space(tables: Sequence[FeatureTable], plan: FoldPlan, base_kind: str = "logistic",
                         n_classes=None, reg: float = 1.0, seed: int = 0) -> list[FoldDecision]:
    """Base-layer memberships for every outer fold of ``plan``.

    For outer fold ``f`` the bases are trained on the remaining folds. The
    meta-training memberships of those rows come from an inner
    leave-one-fold-out pass over the training folds; the test memberships
    come from bases trained on all training folds.
    """
    tables = list(tables)
    if not tables:
        raise ValueError("no feature tables")
    _check_tables(tables)
    labels = np.asarray(tables[0].labels)
    c = int(n_classes if n_classes is not None else labels.max() + 1)
    subjects = tuple(tables[0].subject_ids)
    fold_of_row = np.array([plan.fold_of(s) for s in subjects])
    base_order = tuple(str(t.subband) if t.subband is not None else str(i) for i, t in enumerate(tables))
    results = []
    for f in range(plan.k):
        test_rows = np.flatnonzero(fold_of_row == f)
        train_rows = np.flatnonzero(fold_of_row != f)
        inner_folds = sorted(set(fold_of_row[train_rows].tolist()))
        if len(inner_folds) < 2:
            raise ValueError("stacking needs at least two training folds (k >= 3)")
        train_blocks, test_blocks = [], []
        train_acc, test_acc = [], []
        for table in tables:
            x = table.features
            meta_train = np.empty((train_rows.size, c))
            for g in inner_folds:
                held = fold_of_row[train_rows] == g
                model = train_classifier(base_kind, x[train_rows[~held]], labels[train_rows[~held]], c, reg, seed)
                meta_train[held] = predict_posteriors(model, x[train_rows[held]])
            model = train_classifier(base_kind, x[train_rows], labels[train_rows], c, reg, seed)
            meta_test = predict_posteriors(model, x[test_rows])
            train_blocks.append(meta_train)
            test_blocks.append(meta_test)
            train_acc.append(accuracy(np.argmax(meta_train, axis=1), labels[train_rows]))
            test_acc.append(accuracy(np.argmax(meta_test, axis=1), labels[test_rows]))
        train_space = DecisionSpace(np.hstack(train_blocks), base_order, labels[train_rows],
                                    tuple(subjects[i] for i in train_rows), c, train_rows)
        test_space = DecisionSpace(np.hstack(test_blocks), base_order, labels[test_rows],
                                   tuple(subjects[i] for i in test_rows), c, test_rows)
        results.append(FoldDecision(f, train_space, test_space, np.array(train_acc), np.array(test_acc)))
    return results


def single_subband_accuracy(tables: Sequence[FeatureTable], plan: FoldPlan, base_kind: str = "logistic",
                            n_classes=None, reg: float = 1.0, seed: int = 0) -> np.ndarray:
    """k x E test accuracy of each base trained on the other folds, without the stacking pass.

    Equals ``base_test_accuracy`` of :func:`build_decision_space` at a fraction of the cost.
    """
    tables = list(tables)
    if not tables:
        raise ValueError("no feature tables")
    _check_tables(tables)
    labels = np.asarray(tables[0].labels)
    c = int(n_classes if n_classes is not None else labels.max() + 1)
    fold_of_row = np.array([plan.fold_of(s) for s in tables[0].subject_ids])
    out = np.empty((plan.k, len(tables)))
    for f in range(plan.k):
        test = fold_of_row == f
        for e, table in enumerate(tables):
            model = train_classifier(base_kind, table.features[~test], labels[~test], c, reg, seed)
            out[f, e] = accuracy(predict_labels(model, table.features[test]), labels[test])
    return out


def _vote(votes, weights, summed, n_classes):
    n = votes.shape[0]
    tally = np.zeros((n, n_classes))
    for e in range(votes.shape[1]):
        tally[np.arange(n), votes[:, e]] += weights[e]
    best = tally.max(axis=1, keepdims=True)
    tied = np.isclose(tally, best, rtol=0.0, atol=1e-12 * max(1.0, float(np.max(weights))))
    # ties: larger summed membership, then lowest class index
    return np.argmax(np.where(tied, summed, -np.inf), axis=1)


def majority_vote(space: DecisionSpace) -> np.ndarray:
    """Plurality of the bases' argmax classes."""
    return weighted_majority_vote(space, np.ones(space.n_bases))


def weighted_majority_vote(space: DecisionSpace, weights) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (space.n_bases,):
        raise ValueError(f"need {space.n_bases} weights, got {weights.shape}")
    c = space.n_classes
    summed = space.matrix.reshape(space.matrix.shape[0], space.n_bases, c).sum(axis=1)
    return _vote(space.base_votes(), weights, summed, c)


@dataclass(frozen=True, eq=False)
class FusionResult:
    meta_kind: str
    predictions: np.ndarray
    labels: np.ndarray
    fold_accuracies: np.ndarray
    confusion: np.ndarray

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.fold_accuracies))


def confusion_matrix(labels, predicted, n_classes) -> np.ndarray:
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (np.asarray(labels), np.asarray(predicted)), 1)
    return out


def fsg_classify(folds: Sequence[FoldDecision], meta_kind: str = "logistic", reg: float = 1.0,
                 seed: int = 0) -> FusionResult:
    """Meta-layer decision on each fold's test memberships.

    ``logistic`` and ``maxmargin`` train a meta classifier on the fold's
    meta-training memberships; ``mv`` and ``wmv`` vote, the latter weighting
    each base by its inner cross-validated training accuracy.
    """
    if meta_kind not in META_KINDS:
        raise ValueError(f"unknown meta kind {meta_kind!r}; choose from {META_KINDS}")
    n_total = sum(f.test.matrix.shape[0] for f in folds)
    predictions = np.full(n_total, -1, dtype=np.int64)
    labels = np.full(n_total, -1, dtype=np.int64)
    fold_acc = []
    c = folds[0].test.n_classes
    for fold in folds:
        if meta_kind in ("logistic", "maxmargin"):
            model = train_classifier(meta_kind, fold.train.matrix, fold.train.labels, c, reg, seed)
            pred = predict_labels(model, fold.test.matrix)
        elif meta_kind == "mv":
            pred = majority_vote(fold.test)
        else:
            pred = weighted_majority_vote(fold.test, fold.base_train_accuracy)
        rows = fold.test.rows if fold.test.rows is not None else np.arange(pred.size)
        predictions[rows] = pred
        labels[rows] = fold.test.labels
        fold_acc.append(accuracy(pred, fold.test.labels))
    return FusionResult(meta_kind, predictions, labels, np.array(fold_acc),
                        confusion_matrix(labels, predictions, c))


def out_of_fold_space(folds: Sequence[FoldDecision]) -> DecisionSpace:
    """Every row's test-fold memberships, reassembled in original row order."""
    first = folds[0].test
    n = sum(f.test.matrix.shape[0] for f in folds)
    matrix = np.empty((n, first.matrix.shape[1]))
    labels = np.empty(n, dtype=np.int64)
    subjects = [""] * n
    for fold in folds:
        rows = fold.test.rows
        matrix[rows] = fold.test.matrix
        labels[rows] = fold.test.labels
        for r, s in zip(rows.tolist(), fold.test.subject_ids):
            subjects[r] = s
    return DecisionSpace(matrix, first.base_order, labels, tuple(subjects), first.n_classes, np.arange(n))
