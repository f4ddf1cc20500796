"""McClain-Rao index and the subsample-median procedure for choosing the number of clusters."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .errors import InputError, InsufficientRows, NoWithinPairs, SingleCluster
from .kproto import KProtoParams, auto_gamma, fit


@dataclass(frozen=True)
class SelectionParams:
    k_min: int = 2
    k_max: int = 10
    n_samples: int = 7
    sample_size: int | None = None  # None -> min(n_rows, 1000)
    epsilon: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.k_min <= self.k_max:
            raise InputError("need 2 <= k_min <= k_max")
        if not 5 <= self.n_samples <= 10:
            raise InputError("n_samples must lie in [5, 10]")
        if not self.epsilon > 0:
            raise InputError("epsilon must be > 0")
        if self.sample_size is not None and self.sample_size < 1:
            raise InputError("sample_size must be positive")


@dataclass
class TraceEntry:
    k: int
    samples: list[float]
    median: float
    delta: float | None


@dataclass
class IndexTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    chosen_k: int | None = None
    stop_k: int | None = None

    def to_json(self) -> dict:
        return {
            "entries": [
                {"k": e.k, "samples": list(e.samples), "median": e.median, "delta": e.delta}
                for e in self.entries
            ],
            "chosen_k": self.chosen_k,
            "stop_k": self.stop_k,
        }

    def to_csv(self) -> str:
        width = max((len(e.samples) for e in self.entries), default=0)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "median", "delta"] + [f"sample_{i}" for i in range(width)])
        for e in self.entries:
            w.writerow([e.k, repr(e.median), "" if e.delta is None else repr(e.delta)]
                       + [repr(v) for v in e.samples])
        return buf.getvalue()


def _pair_count(m):
    return m * (m - 1) // 2


def pair_sums(ds: Dataset, assignment, gamma: float):
    """Sums and counts of pairwise dissimilarities split into same-cluster and cross-cluster pairs.

    Uses per-cluster moments: for one cluster the sum of squared distances
    over its pairs is ``n_c * SS_c``; across two clusters it is
    ``n_l SS_c + n_c SS_l + n_c n_l |m_c - m_l|^2``. Mismatch counts come from
    per-level tallies. Returns ``(sum_within, n_within, sum_between, n_between)``.
    """
    a = np.asarray(assignment, dtype=np.int64)
    Xn, Xc = ds.numeric_block(), ds.categorical_block()
    labels, a = np.unique(a, return_inverse=True)
    k = labels.size
    sizes = np.bincount(a, minlength=k)
    means = np.zeros((k, Xn.shape[1]))
    ss = np.zeros(k)
    for c in range(k):
        block = Xn[a == c]
        means[c] = block.mean(axis=0) if block.size else 0.0
        ss[c] = ((block - means[c]) ** 2).sum()

    tallies = []
    for j in range(Xc.shape[1]):
        L = int(Xc[:, j].max()) + 1
        tallies.append(np.bincount(a * L + Xc[:, j], minlength=k * L).reshape(k, L))

    within = float((sizes * ss).sum())
    mis_w = 0
    for t in tallies:
        mis_w += int(sum(_pair_count(int(sizes[c])) - sum(_pair_count(int(v)) for v in t[c]) for c in range(k)))
    n_w = sum(_pair_count(int(m)) for m in sizes)

    between = 0.0
    mis_b = 0
    n_b = 0
    for c in range(k):
        for l in range(c + 1, k):
            nc, nl = int(sizes[c]), int(sizes[l])
            between += nl * ss[c] + nc * ss[l] + nc * nl * float(((means[c] - means[l]) ** 2).sum())
            for t in tallies:
                mis_b += nc * nl - int(np.dot(t[c], t[l]))
            n_b += nc * nl
    return within + gamma * mis_w, n_w, between + gamma * mis_b, n_b


def mcclain_rao(ds: Dataset, assignment, gamma: float) -> float:
    """Mean within-cluster pair dissimilarity over mean between-cluster pair dissimilarity.

    Lower is better. Returns 1.0 when every pair has zero dissimilarity.
    """
    a = np.asarray(assignment)
    if np.unique(a).size < 2:
        raise SingleCluster("McClain-Rao needs at least two clusters")
    sw, nw, sb, nb = pair_sums(ds, a, gamma)
    if nw == 0:
        raise NoWithinPairs("every cluster is a singleton")
    mean_w, mean_b = sw / nw, sb / nb
    if mean_b == 0.0:
        return 1.0
    return float(mean_w / mean_b)


def derived_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


def select_k(ds: Dataset, sel: SelectionParams = SelectionParams(),
             kp: KProtoParams = KProtoParams()) -> tuple[int, IndexTrace]:
    """Pick the cluster count with the sharpest drop in the median McClain-Rao index.

    For each k from ``k_min`` upward, ``n_samples`` subsamples of
    ``sample_size`` rows are clustered and scored; the median score is
    compared with the previous k. The scan stops at the first k whose change
    is smaller than ``epsilon`` in magnitude. The chosen k is the one with the
    most negative change among those evaluated (ties to the smaller k).
    ``gamma='auto'`` is resolved once on the full data so every subsample uses
    the same weight.
    """
    n = ds.n_rows
    size = sel.sample_size if sel.sample_size is not None else min(n, 1000)
    if size > n:
        raise InsufficientRows(f"sample_size {size} exceeds the {n} available rows")
    if size < sel.k_max + 1:
        raise InsufficientRows(f"sample_size {size} must be at least k_max + 1 = {sel.k_max + 1}")
    gamma = auto_gamma(ds.numeric_block()) if kp.gamma == "auto" else float(kp.gamma)

    trace = IndexTrace()
    prev = None
    for k in range(sel.k_min, sel.k_max + 1):
        scores = []
        for s in range(sel.n_samples):
            rng = np.random.default_rng([sel.seed, k, s])
            sub = ds.take(np.sort(rng.choice(n, size=size, replace=False)))
            model = fit(sub, k, replace(kp, gamma=gamma, seed=derived_seed(kp.seed, k, s)))
            scores.append(float(mcclain_rao(sub, model.assignment, gamma)))
        med = float(statistics.median(scores))
        delta = None if prev is None else med - prev
        trace.entries.append(TraceEntry(k, scores, med, delta))
        prev = med
        if delta is not None and abs(delta) < sel.epsilon:
            trace.stop_k = k
            break

    scored = [e for e in trace.entries if e.delta is not None]
    trace.chosen_k = min(scored, key=lambda e: (e.delta, e.k)).k if scored else sel.k_min
    return trace.chosen_k, trace
