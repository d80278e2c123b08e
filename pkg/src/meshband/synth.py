"""Synthetic region time series with planted, subband-specific connectivity.

Each session is synthesised directly in wavelet-coefficient space. Every
region receives independent Gaussian coefficients in every band; in the
band(s) designated for the session's class the coefficients are mixed by a
linear structural model ``x = A x + e`` over the planted adjacency
``A[target, source]``. A shared low-rank component with session-specific
region loadings (``confound``) is added in all bands, which shifts marginal
correlations from session to session while leaving conditional dependencies
intact. The inverse transform plus white noise gives the session signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .data import Dataset, SubjectRecord, sessions_from_scans
from .wavelet import SubbandIndex, WaveletCoefficients, get_family, reconstruct

STRUCTURES = ("pairs", "hub", "chain")


@dataclass
class SynthConfig:
    n_regions: int = 20
    n_classes: int = 7
    levels: int = 4
    n_subjects: int = 20
    session_length: int = 128
    noise: float = 0.3
    seed: int = 0
    family: str = "daubechies4"
    arcs_per_class: int = 9
    # "pairs": disjoint source->target arcs; "hub": one source; "chain": a directed path
    structure: str = "chain"
    weight_range: tuple = (0.8, 1.2)
    own_scale: float = 1.0
    subject_jitter: float = 0.1
    # shared session-specific components with random region loadings
    confound: float = 1.5
    confound_rank: int = 1
    # class (1-based) -> subband labels; default cycles over D2..DL, AL
    designated: dict | None = None
    # class (1-based) -> {subband label: R x R adjacency, A[target, source]}
    planted: dict | None = None

    def validate(self):
        if self.n_regions < 2 or self.n_classes < 1 or self.n_subjects < 1:
            raise ValueError("need R >= 2, C >= 1 and at least one subject")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.session_length % (1 << self.levels):
            raise ValueError(
                f"session_length {self.session_length} must be a multiple of 2**levels={1 << self.levels}"
            )
        if self.noise < 0 or self.own_scale < 0 or self.subject_jitter < 0 or self.confound < 0:
            raise ValueError("noise, own_scale, subject_jitter and confound must be non-negative")
        if self.confound_rank < 1:
            raise ValueError("confound_rank must be >= 1")
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}; choose from {STRUCTURES}")
        needed = 2 * self.arcs_per_class if self.structure == "pairs" else self.arcs_per_class + 1
        if self.arcs_per_class < 1 or needed > self.n_regions:
            raise ValueError(f"arcs_per_class={self.arcs_per_class} needs {needed} regions, have {self.n_regions}")
        for label in self.designated_subbands().values():
            for item in label:
                s = SubbandIndex.from_label(item, self.levels)
                if s.kind == "original" or (s.kind == "approx" and s.level != self.levels):
                    raise ValueError(f"planted subband must be a coefficient band (D1..D{self.levels} or A{self.levels}), got {item}")
        get_family(self.family)

    def designated_subbands(self) -> dict:
        if self.planted is not None:
            return {int(c): list(bands) for c, bands in self.planted.items()}
        if self.designated is not None:
            return {int(c): list(v) for c, v in self.designated.items()}
        pool = [f"D{l}" for l in range(2, self.levels + 1)] + [f"A{self.levels}"]
        if self.levels == 1:
            pool = ["D1", "A1"]
        return {c: [pool[(c - 1) % len(pool)]] for c in range(1, self.n_classes + 1)}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["weight_range"] = list(self.weight_range)
        if self.planted is not None:
            out["planted"] = {
                str(c): {b: np.asarray(a).tolist() for b, a in bands.items()}
                for c, bands in self.planted.items()
            }
        if self.designated is not None:
            out["designated"] = {str(c): list(v) for c, v in self.designated.items()}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "weight_range" in d:
            d["weight_range"] = tuple(d["weight_range"])
        if d.get("designated") is not None:
            d["designated"] = {int(c): list(v) for c, v in d["designated"].items()}
        if d.get("planted") is not None:
            d["planted"] = {int(c): {b: np.asarray(a, dtype=float) for b, a in bands.items()}
                            for c, bands in d["planted"].items()}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown synth config keys {sorted(unknown)}")
        return cls(**d)


def planted_adjacency(config: SynthConfig) -> dict:
    """Ground-truth arcs per ``(class, subband label)`` as R x R ``A[target, source]``."""
    config.validate()
    if config.planted is not None:
        return {(int(c), b): np.asarray(a, dtype=float)
                for c, bands in config.planted.items() for b, a in bands.items()}
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    out = {}
    r, k = config.n_regions, config.arcs_per_class
    lo, hi = config.weight_range
    for c, bands in config.designated_subbands().items():
        for band in bands:
            perm = rng.permutation(r)
            if config.structure == "pairs":
                sources, targets = perm[:k], perm[k:2 * k]
            elif config.structure == "hub":
                sources, targets = np.repeat(perm[0], k), perm[1:k + 1]
            else:
                sources, targets = perm[:k], perm[1:k + 1]
            weights = rng.uniform(lo, hi, size=k) * rng.choice([-1.0, 1.0], size=k)
            a = np.zeros((r, r))
            a[targets, sources] = weights
            out[(c, band)] = a
    return out


def _band_slot(label, levels):
    s = SubbandIndex.from_label(label, levels)
    return ("approx", levels) if s.kind == "approx" else ("detail", s.level)


def _synth_session(rng, config, fam, planted_for_class, subject_scale):
    r, n, levels = config.n_regions, config.session_length, config.levels
    detail = []
    for level in range(1, levels + 1):
        gain = 2.0 ** (level / 2.0)
        detail.append(rng.standard_normal((r, n >> level)) * gain)
    approx_top = rng.standard_normal((r, n >> levels)) * 2.0 ** (levels / 2.0)
    for label, adjacency in planted_for_class:
        kind, level = _band_slot(label, levels)
        base = approx_top if kind == "approx" else detail[level - 1]
        a = adjacency * subject_scale.get(label, 1.0)
        targets = np.flatnonzero(np.any(a != 0, axis=1))
        driven = base.copy()
        driven[targets] *= config.own_scale
        # linear structural model: x = A x + driven
        mixed = np.linalg.solve(np.eye(r) - a, driven)
        if kind == "approx":
            approx_top = mixed
        else:
            detail[level - 1] = mixed
    if config.confound > 0:
        loadings = config.confound * rng.standard_normal((r, config.confound_rank))
        for level in range(1, levels + 1):
            detail[level - 1] = detail[level - 1] + loadings @ (
                rng.standard_normal((config.confound_rank, n >> level)) * 2.0 ** (level / 2.0))
        approx_top = approx_top + loadings @ (
            rng.standard_normal((config.confound_rank, n >> levels)) * 2.0 ** (levels / 2.0))
    approx = tuple(np.zeros((r, n >> l)) for l in range(1, levels)) + (approx_top,)
    coeffs = WaveletCoefficients(approx, tuple(detail), levels, n, n, fam.name)
    signal = reconstruct(coeffs, fam)
    if config.noise > 0:
        signal = signal + config.noise * rng.standard_normal(signal.shape)
    return signal


def generate(config: SynthConfig) -> Dataset:
    """Deterministic dataset: every subject performs one session per class, in class order."""
    config.validate()
    fam = get_family(config.family)
    truth = planted_adjacency(config)
    by_class: dict = {}
    for (c, band), a in truth.items():
        by_class.setdefault(c, []).append((band, a))
    children = np.random.SeedSequence([config.seed, 1]).spawn(config.n_subjects)
    subjects = []
    width = len(str(config.n_subjects - 1))
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        sessions = []
        for c in range(1, config.n_classes + 1):
            planted = by_class.get(c, [])
            scale = {}
            for band, a in planted:
                jitter = 1.0 + config.subject_jitter * rng.standard_normal(a.shape)
                scale[band] = jitter
            sessions.append(_synth_session(rng, config, fam, planted, scale))
        series = np.hstack(sessions)
        specs = sessions_from_scans(range(1, config.n_classes + 1), [config.session_length] * config.n_classes)
        subjects.append(SubjectRecord(f"s{i:0{width}d}", series, specs))
    return Dataset(tuple(subjects), config.n_classes,
                   tuple(f"region_{k}" for k in range(config.n_regions)))
