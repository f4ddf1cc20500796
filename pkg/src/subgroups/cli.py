"""Command-line entry point: ``subgroups <command> <config>``.

Exit status is 0 on success, 1 for invalid input or configuration and 2 for
any other failure. Errors are written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

from . import __version__
from .config import load_config
from .errors import ConfigError, InputError, StageError, SubgroupsError
from .ingest import SyntheticSpec, write_synthetic
from .mvtest import pairwise_matrix
from .pipeline import (
    centroids_csv,
    choose_k,
    cluster,
    compare,
    dumps,
    load_model,
    prepare,
    raw_centroids,
    run_pipeline,
    write_outputs,
)
from .selection import select_k
from .supervised.crossval import comparison_csv
from .supervised.logistic import per_cluster_significance


def _emit(obj) -> None:
    sys.stdout.write(dumps(obj))


def _files(cfg, files: dict[str, str]) -> None:
    """Keep only the files whose format was requested, then write them."""
    ext = {"json": ".json", "csv": ".csv", "markdown": ".md"}
    wanted = {ext[f] for f in cfg.formats}
    write_outputs(cfg.output_dir, {n: t for n, t in files.items() if Path(n).suffix in wanted})


def cmd_validate(args) -> None:
    cfg = load_config(args.config)
    out = cfg.output_dir
    parent = next((p for p in (out, *out.parents) if p.exists()), None)
    if parent is None or not parent.is_dir():
        raise ConfigError(f"output_dir {out} is not a usable directory")
    if not os.access(parent, os.W_OK):
        raise ConfigError(f"output_dir {out} is not writable")
    _emit({"valid": True, "profile": cfg.profile.name, "csv_path": str(cfg.csv_path)})


def cmd_select_k(args) -> None:
    cfg = load_config(args.config)
    prep = prepare(cfg)
    _, trace = select_k(prep.normalized, cfg.selection, cfg.kproto)
    _files(cfg, {"trace.json": dumps(trace.to_json()), "trace.csv": trace.to_csv()})
    _emit(trace.to_json())


def cmd_cluster(args) -> None:
    cfg = load_config(args.config)
    prep = prepare(cfg)
    k, trace = choose_k(cfg, prep.normalized)
    model = cluster(cfg, prep.normalized, k)
    cents = raw_centroids(cfg, prep, model.assignment, k)
    model_json = model.to_json(prep.normalized)
    files = {"model.json": dumps(model_json), "centroids.csv": centroids_csv(cents)}
    if trace is not None:
        files["trace.csv"] = trace.to_csv()
    _files(cfg, files)
    _emit({"model": model_json, "centroids": cents.to_rows()})


def cmd_test(args) -> None:
    cfg = load_config(args.config)
    prep = prepare(cfg)
    model = load_model(cfg, prep.normalized)
    mat = pairwise_matrix(prep.normalized, model.assignment, model.k)
    _files(cfg, {"hotelling.json": dumps(mat.to_json()), "hotelling.csv": mat.to_csv()})
    _emit(mat.to_json())


def cmd_explain(args) -> None:
    cfg = load_config(args.config)
    prep = prepare(cfg)
    model = load_model(cfg, prep.normalized)
    table = per_cluster_significance(prep.normalized, model.assignment, model.k, cfg.reference_levels)
    _files(cfg, {"significance.json": dumps(table.to_json()), "significance.md": table.to_markdown()})
    _emit(table.to_json())


def cmd_compare(args) -> None:
    cfg = load_config(args.config)
    prep = prepare(cfg)
    results = compare(cfg, prep.normalized, prep.report)
    body = comparison_csv({"data": results})
    _files(cfg, {
        "comparison.json": dumps({k: r.to_json() for k, r in results.items()}),
        "comparison.csv": body,
    })
    sys.stdout.write(body)


def cmd_pipeline(args) -> None:
    cfg = load_config(args.config)
    bundle = run_pipeline(cfg)
    _emit({"k": bundle.k, "output_dir": str(cfg.output_dir), "stages": bundle.provenance["stages"]})


def cmd_synth(args) -> None:
    try:
        with open(args.spec, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read spec: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("spec must be a JSON object")
    _emit(write_synthetic(SyntheticSpec.from_json(obj), args.out))


COMMANDS = {
    "validate": (cmd_validate, "check a run configuration"),
    "select-k": (cmd_select_k, "choose the number of clusters and emit the index trace"),
    "cluster": (cmd_cluster, "fit at fixed or chosen k; emit model and centroids"),
    "test": (cmd_test, "Hotelling T2 matrix for a saved model"),
    "explain": (cmd_explain, "per-cluster logistic significance table for a saved model"),
    "compare": (cmd_compare, "classifier accuracy/AUC comparison"),
    "pipeline": (cmd_pipeline, "run every stage and write all reports"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are input errors: exit 1 with the same JSON shape
        sys.stderr.write(json.dumps({"error": "UsageError", "message": message}) + "\n")
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subgroups", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (fn, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="run configuration JSON")
        p.set_defaults(func=fn)
    p = sub.add_parser("synth", help="write a synthetic dataset with label and profile sidecars")
    p.add_argument("spec", help="synthetic spec JSON")
    p.add_argument("out", help="output CSV path")
    p.set_defaults(func=cmd_synth)
    return parser


def _error_payload(exc: SubgroupsError) -> dict:
    payload = {"error": exc.code, "message": str(exc)}
    if isinstance(exc, StageError):
        payload["stage"] = exc.stage
        payload["completed"] = exc.completed
        payload["message"] = str(exc.cause)
    return payload


def exit_code(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    return 1 if isinstance(cause, InputError) else 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # warnings would pollute the machine-readable streams
            args.func(args)
    except SubgroupsError as exc:
        sys.stderr.write(json.dumps(_error_payload(exc)) + "\n")
        return exit_code(exc)
    except Exception as exc:  # noqa: BLE001 - last-resort reporting in the CLI only
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
