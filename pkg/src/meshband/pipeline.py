"""End-to-end orchestration: configuration, cached intermediates and the results report.

Stages run in order ``load -> features -> train -> metrics -> diversity ->
significance -> report``; any failure is re-raised as :class:`StageError`
naming the stage, after the sections finished so far are written to
``report.partial.json``.
"""

from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from ._version import __version__
from .analysis import ORACLE_RULE, diversity_report, membership_significance, oracle_outputs
from .data import Dataset, load_dataset, read_container, write_container
from .features import build_feature_tables, feature_kind
from .graphmetrics import node_metrics, summarize_reports
from .learn import META_KINDS, build_decision_space, fsg_classify, make_fold_plan, out_of_fold_space
from .mesh import FeatureTable, MeshNetwork
from .synth import SynthConfig, generate
from .wavelet import FAMILY_NAMES, SubbandIndex, parse_subbands

log = logging.getLogger(__name__)

STAGES = ("train", "metrics", "diversity", "significance")
BASE_KINDS = ("logistic", "maxmargin")
RESOURCES = Path(__file__).with_name("resources")
SCHEMA_PATH = RESOURCES / "report.schema.json"
BENCHMARK_PATH = RESOURCES / "benchmark.yaml"

# fields that change no result value and stay out of the config hash
_RUNTIME_FIELDS = ("out", "cache", "workers")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@dataclass
class PipelineConfig:
    dataset: str | None = None
    format: str | None = None
    synth: dict | None = None
    family: str = "daubechies4"
    levels: int = 11
    subbands: str | list = "default"
    p: int = 40
    lam: float = 32.0
    standardize: bool = True
    per_session: bool = False
    t_fix: int = 405
    features: str = "mesh"
    base: str = "logistic"
    meta: str = "logistic"
    k: int = 5
    seed: int = 7
    reg: float = 1.0
    stages: list = field(default_factory=lambda: ["train"])
    as_printed: bool = False
    out: str | None = None
    cache: str | None = None
    workers: int = 1

    def validate(self) -> "PipelineConfig":
        if (self.dataset is None) == (self.synth is None):
            raise ConfigError("give exactly one of dataset (a path) or synth (generator settings)")
        if self.dataset is not None and not Path(self.dataset).exists():
            raise ConfigError(f"dataset {self.dataset} does not exist")
        if self.format not in (None, "csv", "bin"):
            raise ConfigError(f"format must be csv or bin, got {self.format!r}")
        if self.synth is not None:
            try:
                SynthConfig.from_dict(self.synth).validate()
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"synth: {exc}") from exc
        if self.family not in FAMILY_NAMES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {FAMILY_NAMES}")
        if int(self.levels) < 1:
            raise ConfigError("levels must be >= 1")
        try:
            parse_subbands(self.subbands, self.levels)
            feature_kind(self.features)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if int(self.p) < 1 or self.lam < 0 or int(self.t_fix) < 1:
            raise ConfigError("need p >= 1, lam >= 0 and t_fix >= 1")
        if self.base not in BASE_KINDS:
            raise ConfigError(f"base must be one of {BASE_KINDS}, got {self.base!r}")
        if self.meta not in META_KINDS:
            raise ConfigError(f"meta must be one of {META_KINDS}, got {self.meta!r}")
        if int(self.k) < 3:
            raise ConfigError("k must be >= 3 so the meta layer has inner folds")
        if self.reg <= 0:
            raise ConfigError("reg must be positive")
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stages {sorted(unknown)}; choose from {STAGES}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def subband_labels(self) -> list[str]:
        return [str(s) for s in parse_subbands(self.subbands, self.levels)]

    def hashed(self) -> dict:
        """Result-relevant settings in canonical form."""
        out = {k: v for k, v in asdict(self).items() if k not in _RUNTIME_FIELDS}
        out["subbands"] = self.subband_labels()
        out["stages"] = [s for s in STAGES if s in self.stages]
        out["features"] = feature_kind(self.features)
        out["lam"] = float(self.lam)
        out["reg"] = float(self.reg)
        if self.synth is not None:
            out["synth"] = SynthConfig.from_dict(self.synth).to_dict()
        if self.dataset is not None:
            out["dataset"] = str(Path(self.dataset).resolve())
        return out

    def config_hash(self) -> str:
        return _digest(self.hashed())


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def read_config_file(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return data


def make_config(file_values: dict | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Merge with precedence overrides > file values > defaults; ``None`` overrides are ignored."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "lambda" in merged:
        merged["lam"] = merged.pop("lambda")
    names = {f.name for f in fields(PipelineConfig)}
    unknown = set(merged) - names
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    try:
        return PipelineConfig(**merged).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def benchmark_config(**overrides) -> PipelineConfig:
    """The desk-scale synthetic benchmark shipped with the package."""
    return make_config(read_config_file(BENCHMARK_PATH), overrides)


def dataset_digest(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(json.dumps([ds.n_classes, list(ds.region_names or ())]).encode())
    for subj in ds.subjects:
        h.update(subj.subject_id.encode() + b"\0")
        h.update(np.ascontiguousarray(subj.series, dtype="<f8").tobytes())
        h.update(json.dumps([[s.task_label, s.n_scans, s.offset] for s in subj.sessions]).encode())
    return h.hexdigest()


# --------------------------------------------------------------------------
# cache


class FeatureCache:
    """Feature tables and mesh adjacencies keyed by a hash of inputs and stage parameters."""

    def __init__(self, root):
        self.root = Path(root) if root is not None else None
        self.hits = 0
        self.misses = 0

    def _path(self, key):
        return None if self.root is None else self.root / f"{key}.bin"

    def load(self, key):
        path = self._path(key)
        if path is None or not path.exists():
            self.misses += 1
            return None
        self.hits += 1
        return read_container(path)

    def store(self, key, arrays, meta):
        path = self._path(key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        write_container(tmp, arrays, meta)
        tmp.replace(path)


def _pack_tables(tables, networks):
    arrays, meta = {}, {"subbands": list(tables)}
    first = next(iter(tables.values()))
    arrays["labels"] = first.labels.astype(np.float64)
    meta["subject_ids"] = list(first.subject_ids)
    meta["kind"] = first.feature_kind
    for label, t in tables.items():
        arrays[f"features/{label}"] = t.features
    if networks:
        meta["networks"] = [[str(n.subband), n.meta] for n in networks]
        arrays["adjacency"] = np.stack([n.adjacency for n in networks])
        arrays["residual"] = np.stack([n.residual_variance for n in networks])
    return arrays, meta


def _unpack_tables(arrays, meta, levels):
    labels = arrays["labels"].astype(np.int64)
    ids = tuple(meta["subject_ids"])
    tables = {
        label: FeatureTable(arrays[f"features/{label}"], labels, ids, meta["kind"],
                            SubbandIndex.from_label(label, levels))
        for label in meta["subbands"]
    }
    networks = []
    for i, (label, net_meta) in enumerate(meta.get("networks", [])):
        networks.append(MeshNetwork(arrays["adjacency"][i], SubbandIndex.from_label(label, levels),
                                    net_meta, arrays["residual"][i]))
    return tables, networks


def cached_features(ds, config, kind, cache: FeatureCache, digest=None, keep_networks=False):
    kind = feature_kind(kind)
    params = {
        "dataset": digest or dataset_digest(ds), "family": config.family, "levels": int(config.levels),
        "subbands": config.subband_labels(), "kind": kind, "p": int(config.p), "lam": float(config.lam),
        "standardize": bool(config.standardize), "t_fix": int(config.t_fix),
        "per_session": bool(config.per_session), "networks": bool(keep_networks), "version": __version__,
    }
    key = _digest(params)
    hit = cache.load(key)
    if hit is not None:
        log.info("feature cache hit %s", key[:12])
        return _unpack_tables(*hit, config.levels)
    tables, networks = build_feature_tables(
        ds, config.family, config.levels, config.subband_labels(), kind, p=config.p, lam=config.lam,
        standardize=config.standardize, t_fix=config.t_fix, per_session=config.per_session,
        keep_networks=keep_networks, workers=config.workers)
    cache.store(key, *_pack_tables(tables, networks))
    return tables, networks


# --------------------------------------------------------------------------
# stages


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-tagged with the stage name
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc


def load_input(config: PipelineConfig) -> Dataset:
    if config.synth is not None:
        return generate(SynthConfig.from_dict(config.synth))
    return load_dataset(config.dataset, config.format)


def _fusion_entry(result):
    return {
        "mean": result.mean_accuracy,
        "std": result.std_accuracy,
        "per_fold": result.fold_accuracies.tolist(),
        "confusion": result.confusion.tolist(),
    }


def train_section(tables, config, n_classes, plan):
    folds = build_decision_space(list(tables.values()), plan, config.base, n_classes,
                                 reg=config.reg, seed=config.seed)
    per_fold = np.array([f.base_test_accuracy for f in folds])
    single = [
        {"subband": label, "mean": float(per_fold[:, e].mean()), "std": float(per_fold[:, e].std()),
         "per_fold": per_fold[:, e].tolist()}
        for e, label in enumerate(tables)
    ]
    fusion = {kind: _fusion_entry(fsg_classify(folds, kind, reg=config.reg, seed=config.seed))
              for kind in META_KINDS}
    section = {
        "feature_kind": feature_kind(config.features),
        "base": config.base,
        "meta": config.meta,
        "k": int(config.k),
        "fold_of_subject": dict(sorted(plan.assignment.items())),
        "single_subband": single,
        "single_subband_mean": float(np.mean([s["mean"] for s in single])),
        "single_subband_max": float(np.max([s["mean"] for s in single])),
        "accuracy": fusion[config.meta]["mean"],
        "fusion": fusion,
    }
    return section, folds


def metrics_section(networks):
    groups: dict = {}
    for net in networks:
        groups.setdefault((int(net.meta["label"]), str(net.subband)), []).append(node_metrics(net))
    out = []
    for (label, band), reps in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        entry = {"task_label": label, "subband": band}
        entry.update(summarize_reports(reps).as_dict())
        out.append(entry)
    return {"groups": out}


def diversity_section(space):
    report = diversity_report(oracle_outputs(space))
    return {"oracle_rule": ORACLE_RULE, "bases": list(space.base_order), **report.as_dict()}


def significance_section(space, as_printed):
    table = membership_significance(space.matrix, space.labels, space.n_classes,
                                    block_labels=space.base_order, as_printed=as_printed)
    return {"statistic": "as_printed" if as_printed else "pooled_t", **table.as_dict()}


@dataclass
class PipelineResult:
    report: dict
    tables: dict
    networks: list
    cache_hits: int
    cache_misses: int


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run the selected stages and, with ``config.out`` set, write the report and CSV tables."""
    config.validate()
    out = Path(config.out) if config.out else None
    cache_root = config.cache if config.cache else (out / "cache" if out else None)
    cache = FeatureCache(cache_root)
    report = {
        "tool": "meshband",
        "version": __version__,
        "config_hash": config.config_hash(),
        "config": config.hashed(),
    }
    tables, networks = {}, []
    try:
        with stage("load"):
            ds = load_input(config)
            digest = dataset_digest(ds)
            report["dataset"] = {
                "digest": digest, "n_subjects": len(ds.subjects), "n_regions": ds.n_regions,
                "n_classes": ds.n_classes, "n_sessions": len(ds.session_index()),
            }
        report["subbands"] = config.subband_labels()
        needs_space = any(s in config.stages for s in ("train", "diversity", "significance"))
        keep = "metrics" in config.stages and feature_kind(config.features) == "mesh_arcs"
        if needs_space or keep:
            with stage("features"):
                tables, networks = cached_features(ds, config, config.features, cache, digest, keep)
        if "metrics" in config.stages and not keep:
            with stage("features"):
                _, networks = cached_features(ds, config, "mesh", cache, digest, True)
        if needs_space:
            with stage("train"):
                plan = make_fold_plan(ds, config.k, config.seed)
                section, folds = train_section(tables, config, ds.n_classes, plan)
                space = out_of_fold_space(folds)
            if "train" in config.stages:
                report["train"] = section
        if "metrics" in config.stages:
            with stage("metrics"):
                report["metrics"] = metrics_section(networks)
        if "diversity" in config.stages:
            with stage("diversity"):
                report["diversity"] = diversity_section(space)
        if "significance" in config.stages:
            with stage("significance"):
                report["significance"] = significance_section(space, config.as_printed)
        report = clean_json(report)
        if out is not None:
            with stage("report"):
                write_outputs(report, out)
    except StageError as exc:
        if out is not None:
            partial = clean_json(dict(report, failed_stage=exc.stage, error=str(exc)))
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.partial.json").write_text(dumps(partial))
        raise
    return PipelineResult(report, tables, networks, cache.hits, cache.misses)


# --------------------------------------------------------------------------
# output


def clean_json(obj):
    """Plain JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean_json(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(report) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def load_schema() -> dict:
    return json.loads(SCHEMA_PATH.read_text())


def validate_report(report) -> None:
    import jsonschema

    jsonschema.validate(report, load_schema())


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_tables(report, directory) -> list[Path]:
    """Human-readable CSV tables for each report section present."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if "train" in report:
        t = report["train"]
        path = directory / "single_subband.csv"
        k = len(t["single_subband"][0]["per_fold"])
        _write_csv(path, ["subband", "mean", "std"] + [f"fold{i}" for i in range(k)],
                   [[s["subband"], s["mean"], s["std"], *s["per_fold"]] for s in t["single_subband"]])
        written.append(path)
        path = directory / "fusion.csv"
        _write_csv(path, ["meta", "mean", "std"],
                   [[kind, v["mean"], v["std"]] for kind, v in sorted(t["fusion"].items())])
        written.append(path)
    if "metrics" in report:
        for g in report["metrics"]["groups"]:
            path = directory / f"metrics_task{g['task_label']}_{g['subband']}.csv"
            cols = ["out_degree", "out_strength", "out_strength_abs", "betweenness"]
            _write_csv(path, ["region"] + cols,
                       [[r] + [g[c][r] for c in cols] for r in range(len(g["out_degree"]))])
            written.append(path)
        path = directory / "metrics_summary.csv"
        _write_csv(path, ["task_label", "subband", "n_sessions", "total_strength", "global_efficiency",
                          "global_efficiency_std", "std_out_degree"],
                   [[g["task_label"], g["subband"], g["n_sessions"], g["total_strength"],
                     g["global_efficiency"], g["global_efficiency_std"], g["std_out_degree"]]
                    for g in report["metrics"]["groups"]])
        written.append(path)
    if "diversity" in report:
        d = report["diversity"]
        keys = ["disagreement", "mean_q", "mean_rho", "entropy", "kappa", "kw_variance", "theta"]
        path = directory / "diversity.csv"
        _write_csv(path, keys, [[d[k] for k in keys]])
        written.append(path)
    if "significance" in report:
        s = report["significance"]
        path = directory / "significance_block_max.csv"
        _write_csv(path, ["task_label"] + list(s["block_labels"]),
                   [[c + 1] + row for c, row in enumerate(s["block_max"])])
        written.append(path)
    return written


def write_outputs(report, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(report))
    (out / "config.json").write_text(dumps({"config_hash": report["config_hash"],
                                            "version": report["version"],
                                            "config": report["config"]}))
    write_tables(report, out / "tables")
    partial = out / "report.partial.json"
    if partial.exists():
        partial.unlink()


def summary_text(report) -> str:
    """Short plain-text rendering of the main numbers."""
    lines = [f"meshband {report['version']}  config {report['config_hash'][:12]}"]
    if "dataset" in report:
        d = report["dataset"]
        lines.append(f"dataset: {d['n_subjects']} subjects, R={d['n_regions']}, C={d['n_classes']}, "
                     f"{d['n_sessions']} sessions")
    if "train" in report:
        t = report["train"]
        lines.append(f"features {t['feature_kind']}, base {t['base']}, k={t['k']}")
        for s in t["single_subband"]:
            lines.append(f"  {s['subband']:>4}  {s['mean']:.4f} +/- {s['std']:.4f}")
        lines.append(f"  mean single-subband {t['single_subband_mean']:.4f}")
        for kind, v in sorted(t["fusion"].items()):
            mark = "*" if kind == t["meta"] else " "
            lines.append(f" {mark}fusion {kind:<9} {v['mean']:.4f} +/- {v['std']:.4f}")
    if "diversity" in report:
        d = report["diversity"]
        lines.append("diversity: " + ", ".join(
            f"{k}={d[k]:.4f}" for k in ("disagreement", "mean_q", "mean_rho", "entropy", "kappa",
                                        "kw_variance", "theta") if d[k] is not None))
    return "\n".join(lines)
