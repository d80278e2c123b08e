"""Per-subband feature tables for a whole dataset."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .data import Dataset, slice_session
from .mesh import (FeatureTable, build_mesh_network, embed_mesh,
                   pairwise_correlation_features, raw_series_features)
from .wavelet import SubbandIndex, subband_stack

KIND_ALIASES = {"mesh": "mesh_arcs", "corr": "pairwise_corr", "raw": "raw_series",
                "mesh_arcs": "mesh_arcs", "pairwise_corr": "pairwise_corr", "raw_series": "raw_series"}


def feature_kind(name: str) -> str:
    try:
        return KIND_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown feature kind {name!r}; choose mesh, corr or raw") from None


def session_windows(dataset: Dataset, family, levels, subbands, per_session=False):
    """Yield ``(subject_id, q, session, {label: R x D_q window})`` in dataset order."""
    for subj in dataset.subjects:
        yield from _subject_windows(subj, family, levels, subbands, per_session)


def _subject_windows(subj, family, levels, subbands, per_session):
    stack = subband_stack(subj, family, levels, per_session=per_session)
    for q, sess in enumerate(subj.sessions):
        yield subj.subject_id, q, sess, {str(s): slice_session(stack[s], sess) for s in subbands}


def _subject_rows(subj, family, levels, subbands, kind, p, lam, standardize, t_fix, per_session, keep):
    rows = {str(s): [] for s in subbands}
    labels, networks = [], []
    for sid, q, sess, windows in _subject_windows(subj, family, levels, subbands, per_session):
        labels.append(sess.task_label - 1)
        for s in subbands:
            window = windows[str(s)]
            if kind == "mesh_arcs":
                meta = {"subject": sid, "session": q, "label": sess.task_label}
                net = build_mesh_network(window, p, lam, s, meta, standardize=standardize)
                rows[str(s)].append(embed_mesh(net))
                if keep:
                    networks.append(net)
            elif kind == "pairwise_corr":
                rows[str(s)].append(pairwise_correlation_features(window))
            else:
                rows[str(s)].append(raw_series_features(window, t_fix))
    return rows, labels, networks


def build_feature_tables(dataset: Dataset, family, levels: int, subbands, kind: str = "mesh",
                         p: int = 40, lam: float = 32.0, standardize: bool = True,
                         t_fix: int = 405, per_session: bool = False, keep_networks: bool = False,
                         workers: int = 1):
    """Feature table per subband, rows in subject then timeline order.

    Returns ``(tables, networks)``; ``networks`` is a list of
    :class:`MeshNetwork` when ``keep_networks`` and the kind is mesh, else
    empty. Labels in the tables are 0-based. ``workers > 1`` spreads subjects
    over a thread pool; the output does not depend on it.
    """
    kind = feature_kind(kind)
    subbands = [s if isinstance(s, SubbandIndex) else SubbandIndex.from_label(s, levels) for s in subbands]
    if not subbands:
        raise ValueError("no subbands selected")

    def one(subj):
        return _subject_rows(subj, family, levels, subbands, kind, p, lam, standardize,
                             t_fix, per_session, keep_networks)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, dataset.subjects))
    else:
        parts = [one(subj) for subj in dataset.subjects]
    labels, subject_ids, networks = [], [], []
    rows = {str(s): [] for s in subbands}
    for subj, (sub_rows, sub_labels, sub_nets) in zip(dataset.subjects, parts):
        for key, vals in sub_rows.items():
            rows[key].extend(vals)
        labels.extend(sub_labels)
        subject_ids.extend([subj.subject_id] * len(sub_labels))
        networks.extend(sub_nets)
    labels = np.array(labels, dtype=np.int64)
    tables = {
        str(s): FeatureTable(np.vstack(rows[str(s)]), labels, tuple(subject_ids), kind, s)
        for s in subbands
    }
    return tables, networks
