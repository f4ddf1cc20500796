"""Hotelling's two-sample T^2 test between clusters."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import betainc

from .data import Dataset, Kind
from .errors import SingularCovariance, SubgroupsError, TooFewRows, TooManyFeatures

ALPHA = 0.10
MAX_CONDITION = 1e12


@dataclass
class HotellingResult:
    t2: float
    f_stat: float
    df1: int
    df2: int
    p_value: float
    reject_at_90: bool
    dropped_features: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "t2": self.t2,
            "f": self.f_stat,
            "df1": self.df1,
            "df2": self.df2,
            "p_value": self.p_value,
            "reject_at_90": self.reject_at_90,
            "dropped_features": list(self.dropped_features),
        }


def f_upper_tail(f: float, df1: int, df2: int) -> float:
    """P(F(df1, df2) > f) via the regularized incomplete beta function."""
    if f <= 0:
        return 1.0
    return float(betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)))


def hotelling(group_i, group_j, names: Sequence[str] | None = None) -> HotellingResult:
    """Two-sample Hotelling T^2 with pooled covariance and its exact F conversion.

    Features whose pooled variance is zero are dropped (and reported) before
    inverting the covariance.
    """
    A = np.asarray(group_i, dtype=float)
    B = np.asarray(group_j, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if A.shape[1] != B.shape[1]:
        raise SubgroupsError("groups have different feature counts")
    names = list(names) if names is not None else [f"x{j}" for j in range(A.shape[1])]
    ni, nj = A.shape[0], B.shape[0]
    if ni < 2 or nj < 2:
        raise TooFewRows(f"need at least 2 rows per group, got {ni} and {nj}")

    mi, mj = A.mean(axis=0), B.mean(axis=0)
    Di, Dj = A - mi, B - mj
    pooled = (Di.T @ Di + Dj.T @ Dj) / (ni + nj - 2)
    scale = np.maximum(1.0, np.concatenate([A, B]).max(axis=0) ** 2)
    keep = np.diag(pooled) > 1e-14 * scale
    dropped = [n for n, k in zip(names, keep) if not k]
    p = int(keep.sum())
    if p == 0:
        raise SingularCovariance("no feature has nonzero pooled variance")
    df2 = ni + nj - p - 1
    if df2 < 1:
        raise TooManyFeatures(f"{p} features need more than {ni + nj} rows")

    S = pooled[np.ix_(keep, keep)]
    diff = (mi - mj)[keep]
    if np.linalg.cond(S) > MAX_CONDITION:
        raise SingularCovariance("pooled covariance is not invertible")
    t2 = float(ni * nj / (ni + nj) * diff @ np.linalg.solve(S, diff))
    t2 = max(t2, 0.0)
    f = df2 / (p * (ni + nj - 2)) * t2
    pv = f_upper_tail(f, p, df2)
    return HotellingResult(t2, f, p, df2, pv, pv < ALPHA, dropped)


@dataclass
class PairCell:
    i: int
    j: int
    result: HotellingResult | None = None
    error: str | None = None
    message: str = ""


@dataclass
class PairwiseMatrix:
    k: int
    features: list[str]
    cells: dict[tuple[int, int], PairCell]

    def __getitem__(self, key) -> PairCell:
        i, j = key
        return self.cells[(min(i, j), max(i, j))]

    def all_reject(self) -> bool:
        return all(c.result is not None and c.result.reject_at_90 for c in self.cells.values())

    def to_json(self) -> dict:
        out = []
        for (i, j), cell in sorted(self.cells.items()):
            row = {"i": i + 1, "j": j + 1}
            if cell.result is not None:
                row.update(cell.result.to_json())
            else:
                row.update({"error": cell.error, "message": cell.message})
            out.append(row)
        return {"k": self.k, "features": list(self.features), "pairs": out}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "t2", "f", "df1", "df2", "p", "reject", "dropped", "error"])
        for (i, j), cell in sorted(self.cells.items()):
            r = cell.result
            if r is None:
                w.writerow([i + 1, j + 1, "", "", "", "", "", "", "", cell.error])
            else:
                w.writerow([i + 1, j + 1, repr(r.t2), repr(r.f_stat), r.df1, r.df2, repr(r.p_value),
                            int(r.reject_at_90), ";".join(r.dropped_features), ""])
        return buf.getvalue()


def hotelling_features(ds: Dataset) -> list[str]:
    """Numeric and binary predictors; multi-class columns have no meaningful mean."""
    return [c.name for c in ds.schema.predictors if c.kind is not Kind.CATEGORICAL]


def pairwise_matrix(ds: Dataset, assignment, k: int | None = None) -> PairwiseMatrix:
    """Test every unordered cluster pair; untestable pairs carry the blocking error."""
    a = np.asarray(assignment, dtype=np.int64)
    k = int(a.max()) + 1 if k is None else k
    names = hotelling_features(ds)
    X = np.column_stack([ds[n].astype(float) for n in names]) if names else np.zeros((ds.n_rows, 0))
    cells = {}
    for i in range(k):
        for j in range(i + 1, k):
            cell = PairCell(i, j)
            try:
                cell.result = hotelling(X[a == i], X[a == j], names)
            except SubgroupsError as exc:
                cell.error, cell.message = exc.code, str(exc)
            cells[(i, j)] = cell
    return PairwiseMatrix(k, names, cells)
