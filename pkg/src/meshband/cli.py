"""Command-line entry point: ``meshband <subcommand> [options]``.

Settings come from ``--config`` (YAML) or the shipped benchmark
(``--benchmark``), and any flag given on the command line overrides them.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from ._version import __version__
from .data import ParseError, save_dataset, write_container
from .pipeline import ConfigError, StageError, stage
from .synth import SynthConfig, generate, planted_adjacency
from .wavelet import all_subbands, subband_stack

log = logging.getLogger("meshband")

# argparse dest -> PipelineConfig field
_FLAG_FIELDS = {
    "data": "dataset", "format": "format", "family": "family", "levels": "levels",
    "subbands": "subbands", "p": "p", "lam": "lam", "standardize": "standardize",
    "per_session": "per_session", "t_fix": "t_fix", "features": "features", "base": "base",
    "meta": "meta", "k": "k", "seed": "seed", "reg": "reg", "as_printed": "as_printed",
    "out": "out", "cache": "cache", "workers": "workers",
}


def _pipeline_options(parser, training=True):
    g = parser.add_argument_group("pipeline settings (override the config file)")
    g.add_argument("--config", help="YAML settings file")
    g.add_argument("--benchmark", action="store_true", help="start from the shipped synthetic benchmark")
    g.add_argument("--data", help="dataset directory (csv) or file (bin)")
    g.add_argument("--format", choices=("csv", "bin"))
    g.add_argument("--family", help="haar, daubechies4 or battle_lemarie_cubic")
    g.add_argument("--levels", type=int)
    g.add_argument("--subbands", help="all, default (drops D1) or a list such as A0,D2,D3")
    g.add_argument("--per-session", dest="per_session", action="store_const", const=True,
                   help="decompose each session window separately")
    g.add_argument("--p", type=int, help="neighbors per mesh")
    g.add_argument("--lambda", dest="lam", type=float, help="ridge penalty")
    g.add_argument("--no-standardize", dest="standardize", action="store_const", const=False,
                   help="keep raw scale instead of z-scoring windows")
    g.add_argument("--t-fix", dest="t_fix", type=int, help="window length for raw-series features")
    g.add_argument("--workers", type=int, help="threads for feature extraction")
    g.add_argument("--cache", help="cache directory (default OUT/cache)")
    g.add_argument("--out", help="output directory")
    if training:
        g.add_argument("--features", choices=("mesh", "corr", "raw"))
        g.add_argument("--base", choices=pipeline.BASE_KINDS)
        g.add_argument("--meta", choices=("logistic", "maxmargin", "mv", "wmv"))
        g.add_argument("--k", type=int, help="cross-validation folds")
        g.add_argument("--seed", type=int)
        g.add_argument("--reg", type=float, help="L2 penalty of the linear classifiers")


def _config(args, stages=None) -> pipeline.PipelineConfig:
    if args.config:
        values = pipeline.read_config_file(args.config)
    elif args.benchmark or not getattr(args, "data", None):
        values = pipeline.read_config_file(pipeline.BENCHMARK_PATH)
    else:
        values = {}
    overrides = {f: getattr(args, dest, None) for dest, f in _FLAG_FIELDS.items()}
    if overrides["dataset"] is not None:
        values.pop("synth", None)
    if stages is not None:
        overrides["stages"] = stages
    return pipeline.make_config(values, overrides)


def _emit(result, args):
    report = result.report
    pipeline.validate_report(report)
    print(pipeline.summary_text(report))
    if args.out:
        print(f"wrote {Path(args.out) / 'report.json'}")
    if args.json:
        print(pipeline.dumps(report), end="")


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    values = pipeline.read_config_file(args.config) if args.config else {}
    values = values.get("synth", values)
    if args.seed is not None:
        values["seed"] = args.seed
    with stage("synth"):
        cfg = SynthConfig.from_dict(values)
        ds = generate(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        target = out / "dataset.bin" if args.format == "bin" else out / "dataset"
        save_dataset(ds, target, args.format)
        truth = planted_adjacency(cfg)
        write_container(out / "truth.bin",
                        {f"class{c}/{band}": a for (c, band), a in sorted(truth.items())},
                        {"version": __version__})
        (out / "synth.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(ds.subjects)} subjects to {target}")
    return 0


def cmd_decompose(args):
    config = _config(args, stages=[])
    out = Path(config.out or "decomposed")
    with stage("load"):
        ds = pipeline.load_input(config)
    with stage("decompose"):
        out.mkdir(parents=True, exist_ok=True)
        table = [{"j": s.j, "label": s.label, "kind": s.kind, "level": s.level}
                 for s in all_subbands(config.levels)]
        for subj in ds.subjects:
            st = subband_stack(subj, config.family, config.levels, per_session=config.per_session)
            arrays = {s["label"]: st.data[s["j"]] for s in table}
            meta = {"subject": subj.subject_id, "family": config.family, "levels": config.levels,
                    "subbands": table, "version": __version__,
                    "sessions": [[q.task_label, q.n_scans, q.offset] for q in subj.sessions]}
            write_container(out / f"subject_{subj.subject_id}.bin", arrays, meta)
    print(f"wrote {len(ds.subjects)} subband stacks to {out}")
    return 0


def cmd_mesh(args):
    config = _config(args, stages=[])
    out = Path(config.out or "mesh")
    cache = pipeline.FeatureCache(config.cache or out / "cache")
    with stage("load"):
        ds = pipeline.load_input(config)
    with stage("features"):
        tables, networks = pipeline.cached_features(ds, config, "mesh", cache, keep_networks=True)
    with stage("report"):
        out.mkdir(parents=True, exist_ok=True)
        meta = {"config_hash": config.config_hash(), "version": __version__}
        for label, t in tables.items():
            write_container(out / f"features_{label}.bin", {"features": t.features, "labels": t.labels + 1.0},
                            dict(meta, subband=label, subject_ids=list(t.subject_ids)))
            with open(out / f"features_{label}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["subject", "task_label"] + [f"a_{r}_{s}" for r in range(ds.n_regions)
                                                        for s in range(ds.n_regions)])
                for sid, y, row in zip(t.subject_ids, t.labels, t.features):
                    w.writerow([sid, int(y) + 1] + [repr(float(v)) for v in row])
            nets = [n for n in networks if str(n.subband) == label]
            write_container(out / f"adjacency_{label}.bin", {"adjacency": np.stack([n.adjacency for n in nets])},
                            dict(meta, subband=label, sessions=[n.meta for n in nets]))
            with open(out / f"adjacency_{label}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["subject", "session", "task_label", "target", "source", "weight"])
                for n in nets:
                    for r, s in zip(*np.nonzero(n.adjacency)):
                        w.writerow([n.meta["subject"], n.meta["session"], n.meta["label"], int(r), int(s),
                                    repr(float(n.adjacency[r, s]))])
    print(f"wrote mesh features for {len(tables)} subbands to {out}")
    return 0


def _stage_command(stages):
    def run(args):
        config = _config(args, stages=stages)
        _emit(pipeline.run_pipeline(config), args)
        return 0
    return run


def cmd_report(args):
    config = _config(args)
    if not args.config:
        config.stages = list(pipeline.STAGES)
    _emit(pipeline.run_pipeline(config), args)
    return 0


def cmd_verify(args):
    from .verify import run_checks

    checks = run_checks(args.seed or 0)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshband", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"meshband {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="YAML generator settings (top level or under 'synth')")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "bin"), default="csv")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("decompose", help="write per-subject subband stacks")
    _pipeline_options(p, training=False)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("mesh", help="write per-subband mesh features and adjacencies")
    _pipeline_options(p, training=False)
    p.set_defaults(func=cmd_mesh)

    for name, stages, text in (("metrics", ["metrics"], "graph metrics per task and subband"),
                               ("train", ["train"], "base and fusion classification"),
                               ("diversity", ["diversity"], "diversity of the base classifiers"),
                               ("significance", ["significance"], "membership significance")):
        p = sub.add_parser(name, help=text)
        _pipeline_options(p)
        if name == "significance":
            p.add_argument("--as-printed", dest="as_printed", action="store_const", const=True,
                           help="use the variance-difference statistic instead of the pooled t")
        p.add_argument("--json", action="store_true", help="also print the JSON report")
        p.set_defaults(func=_stage_command(stages))

    p = sub.add_parser("report", help="run every stage selected in the config")
    _pipeline_options(p)
    p.add_argument("--as-printed", dest="as_printed", action="store_const", const=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("verify", help="cross-check the fast code against the reference oracles")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"meshband: error: [config] {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"meshband: error: {exc}", file=sys.stderr)
        return 1
    except ParseError as exc:
        print(f"meshband: error: [load] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
