"""Maximum-likelihood logistic regression with Wald significance stars."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, expit

from ..data import Dataset, DesignMatrix, one_hot
from ..errors import OutOfRange, RankDeficient, SingleClass, SubgroupsError, TooFewRows

INTERCEPT = "(Intercept)"
MAX_ITER = 50
TOL = 1e-8
SEPARATION_EPS = 1e-10
NULL_EIG = 1e-12
NULL_LOADING = 1e-6
LEGEND = "Significance: *** p < 0.001, ** p < 0.05, * p < 0.1"


def stars(p: float) -> str:
    if not 0.0 <= p <= 1.0:
        raise OutOfRange(f"p-value {p!r} outside [0, 1]")
    if p < 0.001:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def _with_intercept(X):
    X = np.asarray(X, dtype=float)
    return np.column_stack([np.ones(X.shape[0]), X])


def log_likelihood(beta, X, y) -> float:
    """Bernoulli log-likelihood; ``beta[0]`` is the intercept, ``X`` excludes it."""
    eta = _with_intercept(X) @ np.asarray(beta, float)
    y = np.asarray(y, float)
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score(beta, X, y) -> np.ndarray:
    """Gradient of :func:`log_likelihood` with respect to ``beta``."""
    A = _with_intercept(X)
    return A.T @ (np.asarray(y, float) - expit(A @ np.asarray(beta, float)))


@dataclass
class LogisticFit:
    column_names: tuple[str, ...]  # intercept first
    coefficients: np.ndarray
    std_errors: np.ndarray
    z_values: np.ndarray
    p_values: np.ndarray
    stars: list[str]
    converged: bool
    iterations: int
    log_likelihood: float
    separation: bool = False

    def predict_proba(self, X) -> np.ndarray:
        return expit(_with_intercept(X) @ self.coefficients)

    def to_json(self) -> dict:
        return {
            "columns": list(self.column_names),
            "coefficients": _finite(self.coefficients),
            "std_errors": _finite(self.std_errors),
            "z_values": _finite(self.z_values),
            "p_values": _finite(self.p_values),
            "stars": list(self.stars),
            "converged": self.converged,
            "separation": self.separation,
            "iterations": self.iterations,
            "log_likelihood": self.log_likelihood,
        }


def _finite(values) -> list:
    # strict JSON has no infinity; unidentified estimates are written as null
    return [float(v) if math.isfinite(v) else None for v in np.asarray(values, float)]


def _std_errors(H) -> np.ndarray:
    """Square roots of the inverse-information diagonal.

    Coefficients loading on a (numerically) null direction of ``H`` are not
    identified, typically because they diverged under separation; they get
    an infinite standard error instead of poisoning every other entry.
    """
    vals, vecs = np.linalg.eigh(H)
    top = vals.max() if vals.size else 0.0
    good = vals > NULL_EIG * top
    var = (vecs[:, good] ** 2) @ (1.0 / vals[good])
    lost = np.any(np.abs(vecs[:, ~good]) > NULL_LOADING, axis=1)
    return np.where(lost, np.inf, np.sqrt(var))


def fit_logistic(X: DesignMatrix) -> LogisticFit:
    """Newton/IRLS fit with intercept.

    Iterates until the largest coefficient step is below 1e-8 (at most 50
    steps). Standard errors come from the inverse information matrix at the
    final estimate; p-values are two-sided normal tails. Perfect or
    quasi-perfect separation does not raise: the fit comes back with
    ``converged=False`` and ``separation=True``.
    """
    A = _with_intercept(X.X)
    y = np.asarray(X.y, float)
    n, d1 = A.shape
    if n <= d1:
        raise TooFewRows(f"{n} rows cannot support {d1} parameters")
    if y.min() == y.max():
        raise SingleClass("response has a single class")
    if np.linalg.matrix_rank(A) < d1:
        raise RankDeficient("design matrix (with intercept) is rank deficient")

    beta = np.zeros(d1)
    ll = log_likelihood(beta, X.X, y)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        p = expit(A @ beta)
        w = p * (1 - p)
        H = A.T @ (A * w[:, None])
        try:
            step = np.linalg.solve(H, A.T @ (y - p))
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        # step halving keeps the likelihood from dropping on wild Newton steps
        t = 1.0
        for _ in range(30):
            cand = beta + t * step
            ll_new = log_likelihood(cand, X.X, y)
            if ll_new >= ll - 1e-12 * abs(ll):
                break
            t /= 2
        else:
            break
        beta, ll = cand, ll_new
        if np.max(np.abs(t * step)) < TOL:
            converged = True
            break

    p = expit(A @ beta)
    saturated = (p < SEPARATION_EPS) | (p > 1 - SEPARATION_EPS)
    separation = bool(
        np.all(np.abs(p[y == 1] - 1) < SEPARATION_EPS) or np.all(p[y == 0] < SEPARATION_EPS)
        or (not converged and saturated.any())
    )
    if separation:
        converged = False
    w = p * (1 - p)
    se = _std_errors(A.T @ (A * w[:, None]))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, 0.0)
    z = np.nan_to_num(z, nan=0.0)
    pv = np.clip(erfc(np.abs(z) / math.sqrt(2.0)), 0.0, 1.0)
    return LogisticFit(
        column_names=(INTERCEPT,) + tuple(X.column_names),
        coefficients=beta,
        std_errors=se,
        z_values=z,
        p_values=pv,
        stars=[stars(float(v)) for v in pv],
        converged=converged,
        iterations=it,
        log_likelihood=ll,
        separation=separation,
    )


NA = "n/a"


@dataclass
class SignificanceTable:
    columns: tuple[str, ...]  # intercept first
    cells: list[list[str]]
    fits: list[LogisticFit | None]
    notes: list[str] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), len(self.columns)

    def to_json(self) -> dict:
        return {
            "columns": list(self.columns),
            "rows": [
                {
                    "cluster": c + 1,
                    "size": self.sizes[c] if self.sizes else None,
                    "stars": dict(zip(self.columns, self.cells[c])),
                    "note": self.notes[c],
                    "fit": self.fits[c].to_json() if self.fits[c] is not None else None,
                }
                for c in range(len(self.cells))
            ],
            "legend": LEGEND,
        }

    def to_markdown(self) -> str:
        header = ["Cluster"] + ["Intercept" if c == INTERCEPT else c for c in self.columns]
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for c, row in enumerate(self.cells):
            lines.append("| " + " | ".join([f"k{c + 1}"] + [s if s else " " for s in row]) + " |")
        lines.append("")
        lines.append(LEGEND)
        notes = [f"- k{c + 1}: {n}" for c, n in enumerate(self.notes) if n]
        if notes:
            lines.append("")
            lines.extend(notes)
        return "\n".join(lines) + "\n"


def fit_cluster(dm: DesignMatrix) -> tuple[list[str], LogisticFit | None, str]:
    """Fit one cluster, leaving constant columns out; returns (cells, fit, note)."""
    const = set(dm.constant_columns())
    keep = [j for j in range(dm.d) if j not in const]
    sub = DesignMatrix(
        tuple(dm.column_names[j] for j in keep), dm.X[:, keep], dm.y, tuple(dm.sources[j] for j in keep)
    )
    try:
        fit = fit_logistic(sub)
    except SubgroupsError as exc:
        return [NA] * (dm.d + 1), None, f"{exc.code}: {exc}"
    cells = [fit.stars[0]] + [NA] * dm.d
    for pos, j in enumerate(keep):
        cells[j + 1] = fit.stars[pos + 1]
    notes = []
    if const:
        names = ", ".join(dm.column_names[j] for j in sorted(const))
        notes.append(f"RankDeficient: constant within cluster ({names})")
    if fit.separation:
        notes.append("Separation: fitted probabilities saturate; fit did not converge")
    elif not fit.converged:
        notes.append("did not converge")
    return cells, fit, "; ".join(notes)


def per_cluster_significance(ds: Dataset, assignment, k: int | None = None,
                             reference_levels=None) -> SignificanceTable:
    """One logistic fit per cluster on that cluster's rows; stars laid out clusters x (intercept + features)."""
    a = np.asarray(assignment, dtype=np.int64)
    k = int(a.max()) + 1 if k is None else k
    dm = one_hot(ds, reference_levels)
    table = SignificanceTable((INTERCEPT,) + dm.column_names, [], [])
    for c in range(k):
        rows = np.flatnonzero(a == c)
        cells, fit, note = fit_cluster(dm.take(rows))
        table.cells.append(cells)
        table.fits.append(fit)
        table.notes.append(note)
        table.sizes.append(int(rows.size))
    return table
