"""K-Prototypes clustering for tables mixing numeric and categorical columns.

Dissimilarity between a record and a prototype is the squared Euclidean
distance over numeric columns plus ``gamma`` times the number of mismatched
categorical (including binary) columns. Prototypes hold numeric means and
categorical modes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset, Kind, one_hot
from .errors import EmptyDataset, InputError, KTooLarge, SchemaMismatch


class UnnormalizedWarning(UserWarning):
    """Numeric inputs fall outside [0, 1]; gamma=auto assumes max-normalized data."""


@dataclass(frozen=True)
class Prototype:
    numeric_means: np.ndarray
    categorical_modes: np.ndarray


@dataclass(frozen=True)
class KProtoParams:
    gamma: float | str = "auto"
    max_iter: int = 100
    n_restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1 or self.n_restarts < 1:
            raise InputError("max_iter and n_restarts must be >= 1")
        if isinstance(self.gamma, str):
            if self.gamma != "auto":
                raise InputError(f"gamma must be a number >= 0 or 'auto', got {self.gamma!r}")
        elif not self.gamma >= 0:
            raise InputError("gamma must be >= 0")


@dataclass
class ClusterModel:
    k: int
    means: np.ndarray  # (k, n_numeric)
    modes: np.ndarray  # (k, n_categorical) level codes
    assignment: np.ndarray | None
    total_cost: float
    gamma_used: float
    iterations: int
    converged: bool
    numeric_columns: tuple[str, ...]
    categorical_columns: tuple[str, ...]
    cost_history: list[float] = field(default_factory=list)

    @property
    def prototypes(self) -> list[Prototype]:
        return [Prototype(self.means[c], self.modes[c]) for c in range(self.k)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def to_json(self, ds: Dataset | None = None) -> dict:
        """Serialize; categorical modes are written as level names when ``ds`` supplies the schema."""
        protos = []
        for c in range(self.k):
            modes = {}
            for name, code in zip(self.categorical_columns, self.modes[c].tolist()):
                col = ds.schema.column(name) if ds is not None else None
                if col is not None and col.kind is Kind.CATEGORICAL:
                    modes[name] = col.levels[code]
                else:
                    modes[name] = code
            protos.append(
                {
                    "numeric_means": dict(zip(self.numeric_columns, self.means[c].tolist())),
                    "categorical_modes": modes,
                }
            )
        return {
            "k": self.k,
            "gamma": self.gamma_used,
            "prototypes": protos,
            "total_cost": self.total_cost,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_json(cls, obj: dict, ds: Dataset) -> "ClusterModel":
        """Rebuild a model against ``ds``'s schema; the assignment is left for :func:`assign`."""
        num = tuple(c.name for c in ds.schema.numeric_predictors)
        cat = tuple(c.name for c in ds.schema.categorical_predictors)
        k = int(obj["k"])
        means = np.zeros((k, len(num)))
        modes = np.zeros((k, len(cat)), dtype=np.int64)
        try:
            for c, proto in enumerate(obj["prototypes"]):
                if set(proto["numeric_means"]) != set(num) or set(proto["categorical_modes"]) != set(cat):
                    raise SchemaMismatch("model columns do not match dataset schema")
                means[c] = [proto["numeric_means"][n] for n in num]
                for j, name in enumerate(cat):
                    value = proto["categorical_modes"][name]
                    col = ds.schema.column(name)
                    modes[c, j] = col.levels.index(value) if isinstance(value, str) else int(value)
        except (KeyError, ValueError, IndexError) as exc:
            raise SchemaMismatch(f"malformed model: {exc}") from exc
        return cls(
            k, means, modes, None, float(obj["total_cost"]), float(obj["gamma"]),
            int(obj["iterations"]), bool(obj.get("converged", True)), num, cat,
        )


def _as_record(row):
    if isinstance(row, Prototype):
        return np.asarray(row.numeric_means, float), np.asarray(row.categorical_modes)
    x_num, x_cat = row
    return np.asarray(x_num, float), np.asarray(x_cat)


def dissimilarity(row, proto: Prototype, gamma: float) -> float:
    """Mixed dissimilarity of ``row = (numeric values, categorical codes)`` to ``proto``."""
    x_num, x_cat = _as_record(row)
    p_num, p_cat = _as_record(proto)
    if x_num.shape != p_num.shape or x_cat.shape != p_cat.shape:
        raise SchemaMismatch("record and prototype have different column counts")
    return float(((x_num - p_num) ** 2).sum() + gamma * np.count_nonzero(x_cat != p_cat))


def cost_matrix(Xn, Xc, means, modes, gamma) -> np.ndarray:
    """Dissimilarity of every row to every prototype; leading batch axes on ``means``/``modes`` broadcast."""
    shape = means.shape[:-2] + (Xn.shape[0], means.shape[-2])
    num = np.zeros(shape)
    for j in range(Xn.shape[1]):
        num += (Xn[:, j, None] - means[..., None, :, j]) ** 2
    mis = np.zeros(shape)
    for j in range(Xc.shape[1]):
        mis += Xc[:, j, None] != modes[..., None, :, j]
    return num + gamma * mis


def row_costs(Xn, Xc, means, modes, assignment, gamma) -> np.ndarray:
    num = ((Xn - means[assignment]) ** 2).sum(-1)
    mis = (Xc != modes[assignment]).sum(-1)
    return num + gamma * mis


def auto_gamma(Xn: np.ndarray) -> float:
    """Half the average variance of the numeric columns (1.0 when that is zero or undefined)."""
    if Xn.shape[1] == 0 or Xn.shape[0] == 0:
        return 1.0
    g = 0.5 * float(np.var(Xn, axis=0).mean())
    return g if g > 0 else 1.0


def _level_counts(Xc: np.ndarray) -> np.ndarray:
    return Xc.max(axis=0) + 1 if Xc.size else np.zeros(Xc.shape[1], dtype=np.int64)


def _update(Xn, Xc, assign, k, n_levels):
    """Means and modes for a batch of assignments ``assign`` of shape (R, n)."""
    R, n = assign.shape
    flat = (np.arange(R)[:, None] * k + assign).ravel()
    counts = np.bincount(flat, minlength=R * k).astype(float)
    means = np.empty((R * k, Xn.shape[1]))
    for j in range(Xn.shape[1]):
        means[:, j] = np.bincount(flat, weights=np.tile(Xn[:, j], R), minlength=R * k)
    with np.errstate(invalid="ignore", divide="ignore"):
        means /= counts[:, None]
    modes = np.empty((R * k, Xc.shape[1]), dtype=np.int64)
    for j in range(Xc.shape[1]):
        L = int(n_levels[j])
        tally = np.bincount(flat * L + np.tile(Xc[:, j], R), minlength=R * k * L)
        modes[:, j] = tally.reshape(R * k, L).argmax(1)
    return means.reshape(R, k, -1), modes.reshape(R, k, -1)


def _repair_empty(assign, Xn, Xc, means, modes, k, gamma):
    """Move the worst-fitting row into each empty cluster (in place); row must leave a cluster of size > 1."""
    counts = np.bincount(assign, minlength=k)
    empties = np.flatnonzero(counts == 0)
    if empties.size == 0:
        return
    cost = row_costs(Xn, Xc, means, modes, assign, gamma)
    for e in empties:
        movable = counts[assign] > 1
        candidates = np.where(movable, cost, -np.inf)
        i = int(np.argmax(candidates))
        counts[assign[i]] -= 1
        counts[e] += 1
        assign[i] = e
        cost[i] = 0.0


def lloyd(Xn, Xc, init_means, init_modes, gamma, max_iter):
    """Run K-Prototypes alternation for a batch of initialisations.

    ``init_means`` is (R, k, p) and ``init_modes`` (R, k, q). Returns per-restart
    assignments, prototypes, final costs, iteration counts, convergence flags
    and cost histories (cost after every prototype update).
    """
    R, k = init_means.shape[:2]
    n_levels = _level_counts(Xc)
    if init_modes.size:
        n_levels = np.maximum(n_levels, init_modes.reshape(-1, Xc.shape[1]).max(axis=0) + 1)
    means = np.array(init_means, dtype=float)
    modes = np.array(init_modes, dtype=np.int64)
    assign = cost_matrix(Xn, Xc, means, modes, gamma).argmin(-1)
    iterations = np.zeros(R, dtype=int)
    converged = np.zeros(R, dtype=bool)
    history = [[] for _ in range(R)]
    active = np.arange(R)
    for _ in range(max_iter):
        for r in active:
            _repair_empty(assign[r], Xn, Xc, means[r], modes[r], k, gamma)
        m, md = _update(Xn, Xc, assign[active], k, n_levels)
        means[active], modes[active] = m, md
        iterations[active] += 1
        cm = cost_matrix(Xn, Xc, means[active], modes[active], gamma)
        held = np.take_along_axis(cm, assign[active][..., None], -1)[..., 0].sum(-1)
        for r, c in zip(active, held):
            history[r].append(float(c))
        new = cm.argmin(-1)
        same = np.all(new == assign[active], axis=1)
        converged[active[same]] = True
        assign[active[~same]] = new[~same]
        active = active[~same]
        if active.size == 0:
            break
    else:
        # max_iter hit: bring prototypes in line with the last assignment
        for r in active:
            _repair_empty(assign[r], Xn, Xc, means[r], modes[r], k, gamma)
        m, md = _update(Xn, Xc, assign[active], k, n_levels)
        means[active], modes[active] = m, md
    costs = np.array(
        [row_costs(Xn, Xc, means[r], modes[r], assign[r], gamma).sum() for r in range(R)]
    )
    return assign, means, modes, costs, iterations, converged, history


def _blocks(ds: Dataset):
    return ds.numeric_block(), ds.categorical_block()


def fit(ds: Dataset, k: int, params: KProtoParams = KProtoParams()) -> ClusterModel:
    """Best-of-``n_restarts`` K-Prototypes fit.

    Restart ``r`` draws ``k`` distinct rows as initial prototypes from the
    stream ``(seed, r)``. The lowest-cost restart wins, ties to the lower
    restart index.
    """
    n = ds.n_rows
    if n == 0:
        raise EmptyDataset("cannot cluster an empty dataset")
    if k < 1:
        raise InputError("k must be >= 1")
    if k > n:
        raise KTooLarge(f"k={k} exceeds the number of rows ({n})")
    Xn, Xc = _blocks(ds)
    if Xn.size and (Xn.min() < 0 or Xn.max() > 1):
        warnings.warn("numeric columns are not normalized to [0, 1]", UnnormalizedWarning, stacklevel=2)
    gamma = auto_gamma(Xn) if params.gamma == "auto" else float(params.gamma)

    R = params.n_restarts
    init = np.stack(
        [np.random.default_rng([params.seed, r]).choice(n, size=k, replace=False) for r in range(R)]
    )
    assign, means, modes, costs, iters, conv, hist = lloyd(
        Xn, Xc, Xn[init], Xc[init], gamma, params.max_iter
    )
    best = int(np.argmin(costs))
    return ClusterModel(
        k=k,
        means=means[best],
        modes=modes[best],
        assignment=assign[best].copy(),
        total_cost=float(costs[best]),
        gamma_used=gamma,
        iterations=int(iters[best]),
        converged=bool(conv[best]),
        numeric_columns=tuple(c.name for c in ds.schema.numeric_predictors),
        categorical_columns=tuple(c.name for c in ds.schema.categorical_predictors),
        cost_history=hist[best],
    )


def _check_schema(ds: Dataset, model: ClusterModel):
    num = tuple(c.name for c in ds.schema.numeric_predictors)
    cat = tuple(c.name for c in ds.schema.categorical_predictors)
    if num != model.numeric_columns or cat != model.categorical_columns:
        raise SchemaMismatch("dataset columns differ from the model's")


def assign(ds: Dataset, model: ClusterModel) -> np.ndarray:
    """Nearest-prototype index per row; ties go to the lowest cluster index."""
    _check_schema(ds, model)
    Xn, Xc = _blocks(ds)
    return cost_matrix(Xn, Xc, model.means, model.modes, model.gamma_used).argmin(-1)


def recompute_cost(ds: Dataset, model: ClusterModel, assignment=None) -> float:
    _check_schema(ds, model)
    a = model.assignment if assignment is None else np.asarray(assignment)
    Xn, Xc = _blocks(ds)
    return float(row_costs(Xn, Xc, model.means, model.modes, a, model.gamma_used).sum())


@dataclass
class CentroidTable:
    columns: tuple[str, ...]
    values: np.ndarray  # (k, len(columns))
    sizes: np.ndarray

    def to_rows(self) -> list[dict]:
        rows = []
        for c in range(self.values.shape[0]):
            row = {"cluster": c + 1, "size": int(self.sizes[c])}
            row.update(zip(self.columns, self.values[c].tolist()))
            rows.append(row)
        return rows


def centroid_table(ds: Dataset, assignment: Sequence[int], k: int | None = None,
                   reference_levels=None) -> CentroidTable:
    """Per-cluster profile in the units of ``ds``.

    The response mean comes first, then one column per design feature:
    numeric means, binary proportions of 1, and the proportion of each
    non-reference level of multi-class columns.
    """
    a = np.asarray(assignment, dtype=np.int64)
    if a.shape != (ds.n_rows,):
        raise SchemaMismatch("assignment length differs from row count")
    k = int(a.max()) + 1 if k is None else k
    dm = one_hot(ds, reference_levels)
    M = np.column_stack([dm.y.astype(float), dm.X])
    sizes = np.bincount(a, minlength=k)
    sums = np.zeros((k, M.shape[1]))
    np.add.at(sums, a, M)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = sums / sizes[:, None]
    return CentroidTable((ds.schema.response,) + dm.column_names, values, sizes)
