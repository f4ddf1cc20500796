"""CSV loading against declared schemas, built-in state profiles and a synthetic generator."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .data import (
    Column,
    Dataset,
    Kind,
    PreprocessReport,
    Schema,
    binary,
    categorical,
    drop_missing,
    numeric,
    one_hot,
    resolve_reference_levels,
)
from .errors import (
    DataFileNotFound,
    HeaderMismatch,
    InvalidSpec,
    ParseError,
    SchemaError,
    UnknownCategoryLevel,
    UnknownProfile,
)


@dataclass(frozen=True)
class SchemaProfile:
    name: str
    schema: Schema
    encoding_notes: dict[str, str] = field(default_factory=dict)
    reference_levels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        resolve_reference_levels(self.schema, self.reference_levels)

    def to_json(self) -> dict:
        out = {"name": self.name, **self.schema.to_json()}
        if self.reference_levels:
            out["reference_levels"] = dict(self.reference_levels)
        if self.encoding_notes:
            out["encoding_notes"] = dict(self.encoding_notes)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SchemaProfile":
        allowed = {"name", "columns", "response", "reference_levels", "encoding_notes"}
        extra = set(obj) - allowed
        if extra:
            raise SchemaError(f"unknown profile keys: {sorted(extra)}")
        try:
            cols = tuple(
                Column(c["name"], Kind(c["kind"]), tuple(c.get("levels", ()))) for c in obj["columns"]
            )
            schema = Schema(cols, obj["response"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed profile: {exc}") from exc
        return cls(
            obj.get("name", "custom"),
            schema,
            dict(obj.get("encoding_notes", {})),
            dict(obj.get("reference_levels", {})),
        )


def load_profile(path) -> SchemaProfile:
    with open(path, encoding="utf-8") as fh:
        return SchemaProfile.from_json(json.load(fh))


def save_profile(profile: SchemaProfile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile.to_json(), fh, indent=2)
        fh.write("\n")


_NO_YES = "0=no, 1=yes"


def _florida() -> SchemaProfile:
    cols = (
        numeric("age"),
        numeric("juv_fel_count"),
        numeric("juv_misd_count"),
        numeric("priors_count"),
        binary("sex", ("Female", "Male")),
        binary("c_charge_degree", ("M", "F")),
        binary("two_year_recid"),
    )
    notes = {
        "age": "years",
        "juv_fel_count": "juvenile major (felony) offenses",
        "juv_misd_count": "juvenile minor (misdemeanor) offenses",
        "priors_count": "adult prior offenses",
        "sex": "female=0, male=1 (raw 'Female'/'Male' accepted)",
        "c_charge_degree": "misdemeanor=0, felony=1 (raw 'M'/'F' accepted)",
        "two_year_recid": "recidivated within two years",
    }
    return SchemaProfile("florida", Schema(cols, "two_year_recid"), notes)


def _north_carolina() -> SchemaProfile:
    cols = (
        binary("recidivism"),
        numeric("priors"),
        numeric("schooling"),
        numeric("prison_violations"),
        numeric("age"),
        numeric("prison_time"),
        binary("alcohol"),
        binary("hard_drugs"),
        binary("parole"),
        binary("married"),
        binary("felony"),
        binary("male"),
        categorical("crime_type", ("other", "property", "personal")),
    )
    notes = {
        "priors": "prior convictions",
        "schooling": "years of schooling",
        "age": "years",
        "prison_time": "years",
        "alcohol": _NO_YES,
        "hard_drugs": _NO_YES,
        "parole": "unsupervised release=0, supervised parole=1",
        "married": _NO_YES,
        "felony": "misdemeanor=0, felony=1",
        "male": "female=0, male=1",
        "crime_type": "other (reference), property, personal",
    }
    return SchemaProfile("north_carolina", Schema(cols, "recidivism"), notes, {"crime_type": "other"})


def _california() -> SchemaProfile:
    cols = (
        binary("recidivism"),
        numeric("age"),
        numeric("priors"),
        numeric("aliases"),
        numeric("prison_time"),
        binary("original_commitment"),
        binary("economic_gain"),
        binary("arrest_free_5yr"),
        binary("opiate_use"),
        binary("theft"),
        categorical("crime_type", ("other", "nuisance", "personal", "property")),
    )
    notes = {
        "age": "years",
        "prison_time": "years",
        "original_commitment": "crime category: violator=0, original commitment=1",
        "economic_gain": "0 if the convicted crime did not involve economic gain, else 1",
        "arrest_free_5yr": "1 if a five-year arrest-free period was reached",
        "opiate_use": _NO_YES,
        "theft": "0 if the convicted crime did not involve theft, else 1",
        "crime_type": "other (reference), nuisance, personal, property",
    }
    return SchemaProfile("california", Schema(cols, "recidivism"), notes, {"crime_type": "other"})


def _michigan() -> SchemaProfile:
    cols = (
        binary("recidivism"),
        numeric("arrests"),
        numeric("probations"),
        numeric("jailings"),
        numeric("juvenile_priors"),
        numeric("adult_priors"),
        binary("male"),
        binary("married"),
        binary("drug_use"),
        binary("escape_attempt"),
        binary("prison_misconduct"),
    )
    notes = {
        "male": "female=0, male=1",
        "married": _NO_YES,
        "drug_use": _NO_YES,
        "escape_attempt": "1 if an escape attempt was recorded while incarcerated",
        "prison_misconduct": "1 if misconduct was recorded while incarcerated",
    }
    return SchemaProfile("michigan", Schema(cols, "recidivism"), notes)


BUILTIN_PROFILES = {
    "florida": _florida,
    "north_carolina": _north_carolina,
    "california": _california,
    "michigan": _michigan,
}


def builtin_profile(name: str) -> SchemaProfile:
    try:
        return BUILTIN_PROFILES[name]()
    except KeyError:
        raise UnknownProfile(f"unknown profile {name!r}; choose from {sorted(BUILTIN_PROFILES)}") from None


def _parse_cell(col: Column, token: str, row: int):
    token = token.strip()
    if col.kind is Kind.NUMERIC:
        try:
            value = float(token)
        except ValueError:
            raise ParseError(row, col.name, token, "not a number") from None
        if not math.isfinite(value):
            raise ParseError(row, col.name, token, "not finite")
        return value
    if col.kind is Kind.BINARY:
        if token in ("0", "1"):
            return int(token)
        if token in col.levels:
            return col.levels.index(token)
        raise ParseError(row, col.name, token, "binary cells must be 0/1 or a declared level")
    if token in col.levels:
        return col.levels.index(token)
    raise UnknownCategoryLevel(row, col.name, token, f"levels are {list(col.levels)}")


def load_csv(path, profile: SchemaProfile, ignore_extra: bool = False) -> tuple[Dataset, PreprocessReport]:
    """Read a headered CSV into a :class:`Dataset`.

    Rows with a missing marker ("" or "NA") in any profile column are
    dropped and counted. Columns not in the profile raise
    :class:`HeaderMismatch` unless ``ignore_extra`` is set.
    """
    path = Path(path)
    if not path.is_file():
        raise DataFileNotFound(f"no such file: {path}")
    schema = profile.schema
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise HeaderMismatch(schema.names, [])
        header = [h.strip() for h in header]
        missing = set(schema.names) - set(header)
        extra = set(header) - set(schema.names)
        duplicated = len(set(header)) != len(header)
        if missing or (extra and not ignore_extra) or (duplicated and not ignore_extra):
            raise HeaderMismatch(missing, extra if not ignore_extra else ())
        # first occurrence wins when a (tolerated) header repeats a name
        position = {}
        for i, h in enumerate(header):
            position.setdefault(h, i)
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(lineno, "*", ",".join(row), f"expected {len(header)} fields, got {len(row)}")
            rec = {name: row[position[name]] for name in schema.names}
            rec["__line__"] = lineno
            records.append(rec)

    kept, dropped = drop_missing(records, schema.names)
    data = {c.name: [_parse_cell(c, rec[c.name], rec["__line__"]) for rec in kept] for c in schema.columns}
    ds = Dataset(schema, data)
    report = PreprocessReport(rows_dropped_missing=dropped, final_class_counts=ds.class_counts())
    return ds, report


def _format_cell(col: Column, value) -> str:
    if col.kind is Kind.NUMERIC:
        return repr(float(value))
    if col.kind is Kind.BINARY:
        return str(int(value))
    return col.levels[int(value)]


def write_csv(ds: Dataset, path) -> None:
    """Write a dataset so that :func:`load_csv` with the same profile reproduces it exactly."""
    cols = ds.schema.columns
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([c.name for c in cols])
        arrays = [ds[c.name] for c in cols]
        for i in range(ds.n_rows):
            writer.writerow([_format_cell(c, a[i]) for c, a in zip(cols, arrays)])


COMPAS_COLUMNS = (
    "age",
    "juv_fel_count",
    "juv_misd_count",
    "priors_count",
    "sex",
    "c_charge_degree",
    "two_year_recid",
)


def prepare_compas(src, dst) -> int:
    """Project ProPublica's ``compas-scores-two-years.csv`` onto the florida profile.

    The public file (github.com/propublica/compas-analysis) carries ~50
    columns; only ``COMPAS_COLUMNS`` are kept. ``sex`` and ``c_charge_degree``
    are re-encoded to 0/1. Returns the number of rows written.
    """
    profile = builtin_profile("florida")
    ds, _ = load_csv(src, profile, ignore_extra=True)
    write_csv(ds, dst)
    return ds.n_rows


class SyntheticData(NamedTuple):
    dataset: Dataset
    labels: np.ndarray
    coefficients: np.ndarray  # (k_true, d) slopes over design_columns
    intercepts: np.ndarray  # (k_true,) on the cluster-centred numeric scale
    design_columns: tuple[str, ...]


@dataclass(frozen=True)
class SyntheticSpec:
    """Mixed-type data with planted clusters and per-cluster logistic responses.

    Numeric features are unit-variance Gaussians around cluster centres whose
    pairwise distance is ``separation`` (exactly, when ``n_numeric >= k_true``;
    as the minimum pairwise distance otherwise). Each categorical column gives
    every cluster its own modal level; a cell is replaced by a uniformly drawn
    other level with probability ``flip_prob``. Two-level columns are declared
    binary.
    """

    k_true: int
    rows_per_cluster: int
    n_numeric: int = 5
    n_categorical: int = 2
    levels_per_categorical: int | None = None
    separation: float = 6.0
    flip_prob: float = 0.05
    seed: int = 0
    coef_size: float = 2.0

    def __post_init__(self):
        if self.levels_per_categorical is None:
            object.__setattr__(self, "levels_per_categorical", max(2, self.k_true))
        if self.k_true < 1 or self.rows_per_cluster < 1:
            raise InvalidSpec("k_true and rows_per_cluster must be >= 1")
        if self.n_numeric < 0 or self.n_categorical < 0 or self.n_numeric + self.n_categorical == 0:
            raise InvalidSpec("need at least one feature column")
        if self.levels_per_categorical < max(2, self.k_true) and self.n_categorical:
            raise InvalidSpec("levels_per_categorical must be >= max(2, k_true) for distinct modal levels")
        if not self.separation >= 0:
            raise InvalidSpec("separation must be >= 0")
        if not 0 <= self.flip_prob <= 0.5:
            raise InvalidSpec("flip_prob must lie in [0, 0.5]")

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticSpec":
        try:
            return cls(**obj)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def profile(self) -> SchemaProfile:
        cols = [binary("y")]
        cols += [numeric(f"num_{j}") for j in range(self.n_numeric)]
        levels = tuple(f"L{i}" for i in range(self.levels_per_categorical))
        for m in range(self.n_categorical):
            if len(levels) == 2:
                cols.append(binary(f"cat_{m}"))
            else:
                cols.append(categorical(f"cat_{m}", levels))
        return SchemaProfile("custom", Schema(tuple(cols), "y"))


def _centres(spec: SyntheticSpec, rng) -> np.ndarray:
    k, p, sep = spec.k_true, spec.n_numeric, spec.separation
    if k == 1 or p == 0:
        return np.zeros((k, p))
    if p >= k:
        return np.eye(k, p) * (sep / math.sqrt(2.0))
    raw = rng.normal(size=(k, p))
    gaps = np.sqrt(((raw[:, None, :] - raw[None, :, :]) ** 2).sum(-1))
    closest = gaps[np.triu_indices(k, 1)].min()
    return raw * (sep / closest) if closest > 0 else raw * 0


def planted_slopes(spec: SyntheticSpec) -> np.ndarray:
    """Numeric slopes per cluster: +-coef_size unless (j + c) is a multiple of 3."""
    out = np.zeros((spec.k_true, spec.n_numeric))
    for c in range(spec.k_true):
        for j in range(spec.n_numeric):
            if (j + c) % 3:
                out[c, j] = spec.coef_size * (1 if (j + c) % 2 == 0 else -1)
    return out


def gen_synthetic(spec: SyntheticSpec) -> SyntheticData:
    rng = np.random.default_rng(spec.seed)
    k, n0 = spec.k_true, spec.rows_per_cluster
    labels = np.repeat(np.arange(k), n0)
    n = labels.size
    profile = spec.profile()

    centres = _centres(spec, rng)
    noise = rng.normal(size=(n, spec.n_numeric))
    X = centres[labels] + noise
    if n:
        X = X - X.min(axis=0)

    L = spec.levels_per_categorical
    cats = np.zeros((n, spec.n_categorical), dtype=np.int64)
    for m in range(spec.n_categorical):
        modes = rng.permutation(L)[:k]
        col = modes[labels]
        flip = rng.random(n) < spec.flip_prob
        shift = rng.integers(1, L, size=n)
        cats[:, m] = np.where(flip, (col + shift) % L, col)

    slopes = planted_slopes(spec)
    intercepts = np.array([0.5 * ((c % 3) - 1) for c in range(k)])
    logit = intercepts[labels] + np.einsum("ij,ij->i", slopes[labels], noise)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(np.int64)

    data = {"y": y}
    for j in range(spec.n_numeric):
        data[f"num_{j}"] = X[:, j]
    for m in range(spec.n_categorical):
        data[f"cat_{m}"] = cats[:, m]
    ds = Dataset(profile.schema, data)

    design = one_hot(ds).column_names
    coefs = np.zeros((k, len(design)))
    for j in range(spec.n_numeric):
        coefs[:, design.index(f"num_{j}")] = slopes[:, j]
    return SyntheticData(ds, labels, coefs, intercepts, design)


def write_synthetic(spec: SyntheticSpec, out_csv) -> dict[str, str]:
    """Write data CSV plus ``.labels.csv`` and ``.profile.json`` sidecars; return their paths."""
    syn = gen_synthetic(spec)
    out_csv = Path(out_csv)
    stem = os.fspath(out_csv.with_suffix(""))
    labels_path, profile_path = stem + ".labels.csv", stem + ".profile.json"
    write_csv(syn.dataset, out_csv)
    with open(labels_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "cluster"])
        w.writerows(enumerate(syn.labels.tolist()))
    save_profile(spec.profile(), profile_path)
    return {"data": os.fspath(out_csv), "labels": labels_path, "profile": profile_path}
