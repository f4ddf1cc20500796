"""Repeated random-split evaluation of classifier specs (accuracy and AUC)."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset, one_hot
from ..errors import InputError, SubgroupsError
from .forest import RandomForest
from .linear import LDA, LinearSVM, LogisticClassifier, Majority
from .metrics import accuracy, auc_roc

KINDS = ("LR", "RF", "SVM", "LDA", "MAJORITY")
DEFAULT_KINDS = ("LR", "RF", "SVM", "LDA")
EXCISE_FRACTION = 0.10
TRAIN_FRACTION = 0.80


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    n_trees: int = 100
    mtry: int | None = None  # None -> round(sqrt(d))
    min_split: int = 2
    max_depth: int | None = None
    C: float = 1.0
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        for name in ("n_trees", "min_split", "epochs"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be positive")
        if self.mtry is not None and self.mtry < 1:
            raise InputError("mtry must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise InputError("max_depth must be positive")
        if not self.C > 0:
            raise InputError("C must be positive")

    def build(self, seed: int):
        if self.kind == "LR":
            return LogisticClassifier()
        if self.kind == "LDA":
            return LDA()
        if self.kind == "RF":
            return RandomForest(self.n_trees, self.mtry, self.min_split, self.max_depth, seed=seed)
        if self.kind == "SVM":
            return LinearSVM(C=self.C, epochs=self.epochs, seed=seed)
        return Majority()


@dataclass
class RepResult:
    accuracy: float | None
    auc: float | None
    excluded: str | None = None


@dataclass
class EvalResult:
    kind: str
    per_rep: list[RepResult] = field(default_factory=list)
    mean_accuracy: float = math.nan
    mean_auc: float = math.nan
    n_reps: int = 0
    n_excluded: int = 0

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "per_rep": [{"accuracy": r.accuracy, "auc": r.auc, "excluded": r.excluded} for r in self.per_rep],
            "mean_accuracy": None if math.isnan(self.mean_accuracy) else self.mean_accuracy,
            "mean_auc": None if math.isnan(self.mean_auc) else self.mean_auc,
            "n_reps": self.n_reps,
            "n_excluded": self.n_excluded,
        }


def _drop_constant(Xtr, Xte):
    keep = ~np.all(Xtr == Xtr[:1], axis=0) if Xtr.shape[0] else np.ones(Xtr.shape[1], bool)
    return Xtr[:, keep], Xte[:, keep]


def split_indices(n: int, seed: int, rep: int):
    """Excise 10% of rows at random, then split the rest 80/20 into train/test."""
    perm = np.random.default_rng([seed, rep]).permutation(n)
    n_excise = int(round(EXCISE_FRACTION * n))
    rest = perm[n_excise:]
    n_train = int(round(TRAIN_FRACTION * rest.size))
    return rest[:n_train], rest[n_train:]


def crossval(ds: Dataset, spec: ClassifierSpec, n_reps: int = 5, seed: int = 0,
             reference_levels=None) -> EvalResult:
    """Average test accuracy and AUC of ``spec`` over ``n_reps`` random splits.

    Class balancing is the caller's job (undersample once before calling).
    Repetitions whose train or test split lacks a class, or whose model
    cannot be fitted, are excluded from the means and counted.
    """
    dm = one_hot(ds, reference_levels)
    result = EvalResult(spec.kind)
    for rep in range(n_reps):
        tr, te = split_indices(dm.n, seed, rep)
        ytr, yte = dm.y[tr], dm.y[te]
        if np.unique(yte).size < 2 or np.unique(ytr).size < 2:
            result.per_rep.append(RepResult(None, None, "TooFewRows: a split lacks one class"))
            continue
        Xtr, Xte = _drop_constant(dm.X[tr], dm.X[te])
        model = spec.build(int(np.random.SeedSequence([spec.seed, seed, rep]).generate_state(1)[0]))
        try:
            model.fit(Xtr, ytr)
        except SubgroupsError as exc:
            result.per_rep.append(RepResult(None, None, f"{exc.code}: {exc}"))
            continue
        result.per_rep.append(
            RepResult(accuracy(model.predict(Xte), yte), auc_roc(model.decision_function(Xte), yte))
        )
    done = [r for r in result.per_rep if r.excluded is None]
    result.n_reps = len(done)
    result.n_excluded = len(result.per_rep) - len(done)
    if done:
        result.mean_accuracy = float(np.mean([r.accuracy for r in done]))
        result.mean_auc = float(np.mean([r.auc for r in done]))
    return result


def comparison_csv(results: dict[str, dict[str, EvalResult]]) -> str:
    """Accuracy and AUC tables, one row per classifier, one column per dataset.

    ``results`` maps dataset name -> classifier kind -> EvalResult.
    """
    datasets = list(results)
    kinds = []
    for per in results.values():
        for kind in per:
            if kind not in kinds:
                kinds.append(kind)
    kinds.sort(key=lambda k: KINDS.index(k))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "model"] + datasets)
    for metric in ("accuracy", "auc"):
        for kind in kinds:
            row = [metric, kind]
            for name in datasets:
                r = results[name].get(kind)
                row.append("" if r is None else repr(getattr(r, f"mean_{metric}")))
            w.writerow(row)
    return buf.getvalue()
