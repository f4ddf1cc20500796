"""End-to-end orchestration: load, normalize, choose k, cluster, test, explain, compare."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path


from . import __version__
from .config import RunConfig
from .data import Dataset, PreprocessReport, normalize_numeric, undersample
from .errors import DataFileNotFound, KTooLarge, StageError, SubgroupsError
from .ingest import load_csv
from .kproto import CentroidTable, ClusterModel, assign, centroid_table, fit
from .mvtest import PairwiseMatrix, pairwise_matrix
from .selection import IndexTrace, select_k
from .supervised.crossval import EvalResult, comparison_csv, crossval
from .supervised.logistic import SignificanceTable, per_cluster_significance

UNITS_NOTE = "centroids in raw (pre-normalization) units; models fitted on max-normalized numerics"


@dataclass
class Prepared:
    raw: Dataset
    normalized: Dataset
    report: PreprocessReport


@dataclass
class ReportBundle:
    preprocess: PreprocessReport
    k: int
    trace: IndexTrace | None
    model: ClusterModel
    centroids: CentroidTable
    hotelling: PairwiseMatrix
    significance: SignificanceTable
    comparison: dict[str, EvalResult] | None
    dataset: Dataset  # normalized data the model was fitted on
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "preprocess": self.preprocess.to_json(),
            "k": self.k,
            "trace": self.trace.to_json() if self.trace is not None else None,
            "model": self.model.to_json(self.dataset),
            "centroids": {"columns": list(self.centroids.columns), "rows": self.centroids.to_rows()},
            "hotelling": self.hotelling.to_json(),
            "significance": self.significance.to_json(),
            "comparison": (
                {kind: r.to_json() for kind, r in self.comparison.items()} if self.comparison else None
            ),
            "provenance": self.provenance,
        }


# ---------------------------------------------------------------- stages

def prepare(cfg: RunConfig) -> Prepared:
    raw, report = load_csv(cfg.csv_path, cfg.profile, cfg.ignore_extra)
    normalized, divisors = normalize_numeric(raw)
    report.normalization_divisors = divisors
    report.zero_columns = [name for name in divisors if raw[name].size and not raw[name].any()]
    return Prepared(raw, normalized, report)


def choose_k(cfg: RunConfig, ds: Dataset) -> tuple[int, IndexTrace | None]:
    if cfg.fixed_k is not None:
        if cfg.fixed_k > ds.n_rows:
            raise KTooLarge(f"fixed_k={cfg.fixed_k} exceeds the {ds.n_rows} rows")
        return cfg.fixed_k, None
    return select_k(ds, cfg.selection, cfg.kproto)


def cluster(cfg: RunConfig, ds: Dataset, k: int) -> ClusterModel:
    return fit(ds, k, cfg.kproto)


def raw_centroids(cfg: RunConfig, prep: Prepared, assignment, k: int) -> CentroidTable:
    return centroid_table(prep.raw, assignment, k, cfg.reference_levels)


def compare(cfg: RunConfig, ds: Dataset, report: PreprocessReport | None = None) -> dict[str, EvalResult]:
    balanced = undersample(ds, cfg.seed)
    if report is not None:
        report.rows_removed_undersampling = ds.n_rows - balanced.n_rows
        report.final_class_counts = balanced.class_counts()
    return {s.kind: crossval(balanced, s, cfg.n_reps, cfg.seed, cfg.reference_levels) for s in cfg.specs}


def load_model(cfg: RunConfig, ds: Dataset) -> ClusterModel:
    path = cfg.output_dir / "model.json"
    if not path.is_file():
        raise DataFileNotFound(f"no saved model at {path}; run `cluster` first")
    with open(path, encoding="utf-8") as fh:
        model = ClusterModel.from_json(json.load(fh), ds)
    model.assignment = assign(ds, model)
    return model


class _Runner:
    def __init__(self):
        self.completed: list[str] = []

    def __call__(self, stage, fn, *args):
        try:
            out = fn(*args)
        except SubgroupsError as exc:
            raise StageError(stage, exc, self.completed) from exc
        self.completed.append(stage)
        return out


def run_pipeline(cfg: RunConfig, write: bool = True) -> ReportBundle:
    """Run every stage in order and (optionally) write the requested output formats.

    Clustering and the per-cluster regressions use all cleaned rows; only the
    classifier comparison sees the undersampled data.
    """
    started = _now()
    run = _Runner()
    prep = run("load", prepare, cfg)
    ds = prep.normalized
    k, trace = run("select_k", choose_k, cfg, ds)
    model = run("fit", cluster, cfg, ds, k)
    cents = run("centroids", raw_centroids, cfg, prep, model.assignment, k)
    hot = run("hotelling", pairwise_matrix, ds, model.assignment, k)
    sig = run("significance", per_cluster_significance, ds, model.assignment, k, cfg.reference_levels)
    comp = None
    if cfg.comparison_enabled:
        comp = run("compare", compare, cfg, ds, prep.report)
    bundle = ReportBundle(prep.report, k, trace, model, cents, hot, sig, comp, ds)
    bundle.provenance = {
        "config": cfg.raw,
        "seed": cfg.seed,
        "version": __version__,
        "units": UNITS_NOTE,
        "stages": list(run.completed),
        "timestamps": {"started": started, "finished": _now()},
    }
    if write:
        write_bundle(bundle, cfg.output_dir, cfg.formats)
    return bundle


# ---------------------------------------------------------------- output

def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def centroids_csv(table: CentroidTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cluster", "size"] + list(table.columns))
    for row in table.to_rows():
        w.writerow([row["cluster"], row["size"]] + [repr(row[c]) for c in table.columns])
    return buf.getvalue()


def _write(out_dir: Path, name: str, text: str) -> str:
    path = out_dir / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return os.fspath(path)


def write_outputs(out_dir, files: dict[str, str]) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [_write(out_dir, name, text) for name, text in files.items()]


def bundle_files(bundle: ReportBundle, formats) -> dict[str, str]:
    files = {}
    if "json" in formats:
        files["report.json"] = dumps(bundle.to_json())
        files["model.json"] = dumps(bundle.model.to_json(bundle.dataset))
    if "csv" in formats:
        if bundle.trace is not None:
            files["trace.csv"] = bundle.trace.to_csv()
        files["centroids.csv"] = centroids_csv(bundle.centroids)
        files["hotelling.csv"] = bundle.hotelling.to_csv()
        if bundle.comparison:
            files["comparison.csv"] = comparison_csv({"data": bundle.comparison})
    if "markdown" in formats:
        files["significance.md"] = bundle.significance.to_markdown()
    return files


def write_bundle(bundle: ReportBundle, out_dir, formats) -> list[str]:
    return write_outputs(out_dir, bundle_files(bundle, formats))
