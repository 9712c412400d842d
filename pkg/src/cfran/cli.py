"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 degenerate geometry,
3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys

import numpy as np
import scipy
import yaml

from . import __version__, kernels
from .association import build_conflict_graph, graph_color_associate, kmeans_pp
from .errors import (ConfigError, DegenerateGeometryError, InfeasibleColoringError,
                     UnsupportedConfigurationError)
from .fbl import solve_error_prob, sum_fbl_rate
from .harness import ExperimentSpec, load_preset, preset_names, run_experiment
from .scenario import (SEED_ENV_VAR, apply_overrides, config_from_dict, derive_stream,
                       generate_geometry, parse_config_text)

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_INTERNAL = 0, 1, 2, 3

KIND_FOR_COMMAND = {
    "validate-bounds": "bound_validation",
    "sweep": "se_sweep",
    "error-sweep": "error_sweep",
    "compare-assoc": "association_comparison",
}


def _add_common(p, config_required=False):
    p.add_argument("--config", required=config_required, metavar="PATH",
                   help="YAML scenario or experiment file (a run manifest is accepted)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field by dotted path, e.g. coloring.tenure=9 (repeatable)")
    p.add_argument("--out", default=".", metavar="DIR",
                   help="output directory; nothing is written outside it (default: .)")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")


def _add_run(p):
    p.add_argument("--sweep", action="append", default=[], metavar="AXIS=V1,V2,...",
                   help="add a sweep axis with a comma-separated grid (repeatable)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1, metavar="N",
                   help="worker processes (default: available cores)")
    p.add_argument("--basename", default=None, metavar="NAME",
                   help="basename of the output files (default: experiment name)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfran",
        description="Uplink finite-blocklength SE of cell-free RAN with edge distributed units.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    for cmd, text in (("validate-bounds", "Monte Carlo SE under ZF against the closed-form bounds"),
                      ("sweep", "mean SE over a parameter grid"),
                      ("error-sweep", "error probability meeting a target SE over a grid"),
                      ("compare-assoc", "paired graph-coloring versus K-means++ grouping")):
        p = sub.add_parser(cmd, help=text, description=text)
        _add_common(p)
        _add_run(p)

    p = sub.add_parser("associate", help="partition one deployment's RRUs into EDUs",
                       description="Partition one deployment's RRUs into EDUs and write the "
                                   "groups and the final conflict-graph edge list as JSON.")
    _add_common(p)
    p.add_argument("--algorithm", choices=("graphcolor", "kmeans"), default="graphcolor",
                   help="grouping algorithm (default: graphcolor)")
    p.add_argument("--delta-init", type=float, default=None, metavar="D",
                   help="initial conflict threshold as a fraction of the area side")
    p.add_argument("--trial", type=int, default=0, help="deployment index (default: 0)")

    p = sub.add_parser("fbl-calc", help="finite-blocklength sum rate for given SINRs",
                       description="Print the finite-blocklength sum rate for given linear SINRs.")
    p.add_argument("--gamma", type=float, nargs="+", required=True, metavar="G",
                   help="linear SINR of each UE")
    p.add_argument("--n", type=int, required=True, help="block length in symbols")
    p.add_argument("--eps", type=float, required=True, help="error probability")
    p.add_argument("--target", type=float, default=None, metavar="R",
                   help="also print the error probability that meets sum rate R")
    p.add_argument("--unscaled-dispersion", action="store_true",
                   help="drop the log2(e)^2 factor from the joint dispersion")

    p = sub.add_parser("preset", help="run a shipped figure preset",
                       description="Run a shipped figure preset: " + ", ".join(preset_names()) + ".")
    p.add_argument("name", help="preset name")
    _add_common(p)
    _add_run(p)
    return parser


def _read_source(path):
    if not os.path.isfile(path):
        raise ConfigError(f"config not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_document(path) -> dict:
    data = parse_config_text(_read_source(path)) if path else {}
    if "spec" in data and isinstance(data["spec"], dict):  # run manifest
        data = data["spec"]
    return data


def _seed_from_env(data: dict) -> dict:
    if os.environ.get(SEED_ENV_VAR):
        try:
            data["master_seed"] = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer", field="master_seed") from None
    return data


def _parse_sweep(items):
    axes = []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"sweep {item!r} is not of the form axis=v1,v2")
        axis, raw = item.split("=", 1)
        values = [yaml.safe_load(v) for v in raw.split(",") if v.strip()]
        axes.append((axis.strip(), values))
    return axes


def _experiment(args, kind=None) -> ExperimentSpec:
    if args.command == "preset":
        spec = load_preset(args.name)
        doc = spec.to_dict()
        if args.config:
            raise ConfigError("preset does not take --config")
    else:
        doc = _load_document(args.config)
        if "base" not in doc:
            doc = {"base": doc}
    doc["base"] = _seed_from_env(apply_overrides(doc.get("base") or {}, args.overrides))
    if kind is not None:
        if doc.get("kind", kind) != kind:
            raise ConfigError(f"config describes a {doc['kind']} experiment, not {kind}", field="kind")
        doc["kind"] = kind
    sweep = _parse_sweep(getattr(args, "sweep", []))
    if sweep:
        given = {a for a, _ in sweep}
        doc["sweep"] = [e for e in doc.get("sweep") or [] if e["axis"] not in given]
        doc["sweep"] += [{"axis": a, "values": v} for a, v in sweep]
    if args.basename:
        doc["name"] = args.basename
    elif args.command != "preset" and "name" not in doc:
        doc["name"] = args.command.replace("-", "_")
    return ExperimentSpec.from_dict(doc)


def _manifest(spec: ExperimentSpec, table_meta: dict) -> dict:
    return {
        "spec_hash": table_meta.get("spec_hash"),
        "config_hash": spec.base.digest(),
        "seed": spec.base.master_seed,
        "versions": {"cfran": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "kernels": kernels.BACKEND},
        "spec": spec.to_dict(),
    }


def _run(args, kind=None) -> int:
    spec = _experiment(args, kind)
    os.makedirs(args.out, exist_ok=True)
    log = logging.getLogger("cfran")
    log.info("running %s (%s) with %d point(s)", spec.name, spec.kind, len(spec.points()))
    table = run_experiment(spec, workers=max(1, args.workers))
    base = os.path.join(args.out, spec.name)
    table.to_csv(base + ".csv")
    table.to_json(base + ".json")
    with open(base + ".manifest.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(_manifest(spec, table.meta), fh, sort_keys=False)
    print(f"wrote {base}.csv, {base}.json and {base}.manifest.yaml")
    empty = [r[0] for r in table.select("trials_used") if r[-2] == 0]
    if empty:
        print(f"cfran: degenerate geometry: every trial was skipped at point(s) {empty}",
              file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def _associate(args) -> int:
    doc = _load_document(args.config)
    doc = doc.get("base", doc)
    data = _seed_from_env(apply_overrides(doc, args.overrides))
    if args.delta_init is not None:
        data.setdefault("coloring", {})["delta_init"] = args.delta_init
    config = config_from_dict(data)
    seed = config.master_seed
    geometry = generate_geometry(config, derive_stream(seed, args.trial, "geometry"))
    if args.algorithm == "graphcolor":
        rng = derive_stream(seed, args.trial, "partition/graph_coloring")
        part = graph_color_associate(geometry, config.num_edus, config.coloring, rng)
        delta = part.info.get("delta")
    else:
        rng = derive_stream(seed, args.trial, "partition/kmeans_pp")
        part = kmeans_pp(geometry, config.num_edus, rng, config.kmeans_restarts)
        delta = None
    edges = build_conflict_graph(geometry, delta).edges() if delta else []
    doc = {
        "algorithm": args.algorithm,
        "num_edus": part.num_groups,
        "delta": delta,
        "groups": [g.tolist() for g in part.groups],
        "edges": [list(e) for e in edges],
        "rru_positions": geometry.rru_positions.tolist(),
        "config_hash": config.digest(),
    }
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"partition_{args.algorithm}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    print(f"wrote {path} ({part.num_groups} groups, sizes {part.sizes})")
    return EXIT_OK


def _fbl_calc(args) -> int:
    res = sum_fbl_rate(args.gamma, args.n, args.eps, args.unscaled_dispersion)
    print(f"{res.rate:.4f}")
    if args.target is not None:
        eps = solve_error_prob(args.gamma, args.n, args.target, args.unscaled_dispersion)
        print(f"{eps:.6g}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * getattr(args, "verbose", 0)
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in KIND_FOR_COMMAND:
            return _run(args, KIND_FOR_COMMAND[args.command])
        if args.command == "preset":
            return _run(args)
        if args.command == "associate":
            return _associate(args)
        return _fbl_calc(args)
    except (ConfigError, UnsupportedConfigurationError) as exc:
        where = f" [{exc.field}]" if getattr(exc, "field", None) else ""
        print(f"cfran: config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateGeometryError, InfeasibleColoringError) as exc:
        print(f"cfran: degenerate geometry: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"cfran: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - contractual catch-all exit code
        print(f"cfran: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
