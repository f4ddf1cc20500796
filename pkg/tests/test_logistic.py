import math

import numpy as np
import pytest
from scipy.special import expit

from oracles import fd_gradient, loglik
from subgroups.data import DesignMatrix, normalize_numeric
from subgroups.errors import OutOfRange, RankDeficient, SingleClass, TooFewRows
from subgroups.ingest import SyntheticSpec, gen_synthetic
from subgroups.supervised.logistic import (
    INTERCEPT,
    LEGEND,
    NA,
    fit_logistic,
    log_likelihood,
    per_cluster_significance,
    score,
    stars,
)


def design(X, y, names=None):
    X = np.asarray(X, float)
    if X.ndim == 1:
        X = X[:, None]
    names = tuple(names or (f"x{j}" for j in range(X.shape[1])))
    return DesignMatrix(names, X, np.asarray(y, np.int64), names)


def table_2x2(a, b, c, d):
    """x=1 row: (y=1: a, y=0: b); x=0 row: (y=1: c, y=0: d)."""
    x = [1] * (a + b) + [0] * (c + d)
    y = [1] * a + [0] * b + [1] * c + [0] * d
    return design(x, y)


# --- stars


@pytest.mark.parametrize("p, s", [(0.0005, "***"), (0.03, "**"), (0.07, "*"), (0.5, ""), (0.0, "***"), (1.0, "")])
def test_stars(p, s):
    assert stars(p) == s


def test_stars_boundaries_are_strict():
    assert stars(0.001) == "**"
    assert stars(0.05) == "*"
    assert stars(0.1) == ""


def test_stars_out_of_range():
    with pytest.raises(OutOfRange):
        stars(1.5)
    with pytest.raises(OutOfRange):
        stars(-0.01)
    with pytest.raises(OutOfRange):
        stars(float("nan"))


def test_legend_text():
    assert LEGEND == "Significance: *** p < 0.001, ** p < 0.05, * p < 0.1"


# --- fit_logistic


def test_two_by_two_log_odds_ratio():
    fit = fit_logistic(table_2x2(30, 10, 20, 40))
    assert fit.converged
    assert fit.coefficients[1] == pytest.approx(math.log(6.0), abs=1e-6)
    assert fit.coefficients[0] == pytest.approx(math.log(20 / 40), abs=1e-6)
    # Wald SE of a log odds ratio: sqrt(1/a + 1/b + 1/c + 1/d)
    assert fit.std_errors[1] == pytest.approx(math.sqrt(1 / 30 + 1 / 10 + 1 / 20 + 1 / 40), rel=1e-6)


def test_independent_symmetric_predictor_exact():
    x = np.tile([1.0, -1.0], 5000)
    y = np.tile([1, 1, 0, 0], 2500)
    fit = fit_logistic(design(x, y))
    assert abs(fit.coefficients[1]) < 1e-10
    assert abs(fit.coefficients[0]) < 1e-10


def test_independent_symmetric_predictor_random():
    rng = np.random.default_rng(0)
    x = rng.choice([-1.0, 1.0], 10000)
    y = np.zeros(10000, int)
    y[rng.permutation(10000)[:5000]] = 1
    fit = fit_logistic(design(x, y))
    assert abs(fit.coefficients[1]) < 0.05
    assert abs(fit.coefficients[0]) < 0.05


def test_separation_flagged():
    fit = fit_logistic(design([0.1, 0.2, 0.3, 0.7, 0.8, 0.9], [0, 0, 0, 1, 1, 1]))
    assert fit.separation
    assert not fit.converged


def test_quasi_separation_confined_to_one_coefficient():
    rng = np.random.default_rng(1)
    x = rng.normal(size=400)
    rare = np.zeros(400)
    rare[:8] = 1
    y = (rng.random(400) < expit(1.5 * x)).astype(int)
    y[:8] = 0
    fit = fit_logistic(design(np.column_stack([x, rare]), y))
    assert fit.separation
    assert math.isinf(fit.std_errors[2])
    assert fit.p_values[2] == 1.0
    assert fit.stars[1] == "***"


def test_preconditions():
    with pytest.raises(TooFewRows):
        fit_logistic(design([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]], [0, 1, 0]))
    with pytest.raises(SingleClass):
        fit_logistic(design([0.0, 1.0, 2.0, 3.0], [1, 1, 1, 1]))
    with pytest.raises(RankDeficient):
        fit_logistic(design(np.column_stack([[0.0, 1, 2, 3, 4], [0.0, 2, 4, 6, 8]]), [0, 1, 0, 1, 1]))


def test_score_at_optimum_and_finite_differences():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(500, 3))
    y = (rng.random(500) < expit(X @ [1.0, -0.5, 0.25] + 0.3)).astype(int)
    fit = fit_logistic(design(X, y))
    assert fit.converged
    assert np.abs(score(fit.coefficients, X, y)).max() < 1e-6
    for _ in range(5):
        beta = rng.normal(size=4)
        fd = fd_gradient(lambda b: loglik(b, X, y), beta)
        an = score(beta, X, y)
        assert np.abs(an - fd).max() / np.abs(fd).max() < 1e-5
        assert log_likelihood(beta, X, y) == pytest.approx(loglik(beta, X, y), rel=1e-12)


def test_p_values_two_sided_and_consistent():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(300, 2))
    y = (rng.random(300) < expit(X[:, 0] * 0.8)).astype(int)
    fit = fit_logistic(design(X, y))
    for z, p, s in zip(fit.z_values, fit.p_values, fit.stars):
        assert p == pytest.approx(math.erfc(abs(z) / math.sqrt(2)), rel=1e-12)
        assert s == stars(p)
    flipped = fit_logistic(design(-X, y))
    assert np.allclose(flipped.p_values, fit.p_values, rtol=1e-8)


def test_fit_json_is_strict():
    import json

    fit = fit_logistic(design([0.1, 0.2, 0.3, 0.7, 0.8, 0.9], [0, 0, 0, 1, 1, 1]))
    obj = fit.to_json()
    json.dumps(obj, allow_nan=False)
    assert {"coefficients", "std_errors", "p_values", "stars", "converged"} <= set(obj)


# --- per-cluster significance


def synthetic_for_stars(seed, rows=2000):
    spec = SyntheticSpec(k_true=3, rows_per_cluster=rows, n_numeric=6, n_categorical=1, seed=seed)
    return spec, gen_synthetic(spec)


def test_single_cluster_equals_pooled_fit():
    _, syn = synthetic_for_stars(0, rows=200)
    ds = syn.dataset
    table = per_cluster_significance(ds, np.zeros(ds.n_rows, int))
    from subgroups.data import one_hot

    pooled = fit_logistic(one_hot(ds))
    assert table.shape == (1, 1 + one_hot(ds).d)
    assert table.cells[0] == pooled.stars
    assert table.columns[0] == INTERCEPT


def test_constant_feature_cell_is_na():
    _, syn = synthetic_for_stars(1, rows=300)
    ds = syn.dataset
    labels = syn.labels
    # with flip_prob 0 the categorical is constant within each cluster
    spec = SyntheticSpec(k_true=3, rows_per_cluster=300, n_numeric=3, n_categorical=1, flip_prob=0.0, seed=1)
    syn = gen_synthetic(spec)
    table = per_cluster_significance(syn.dataset, syn.labels)
    for c in range(3):
        cat_cells = [table.cells[c][j] for j, n in enumerate(table.columns) if n.startswith("cat_")]
        assert cat_cells == [NA, NA]
        assert "RankDeficient" in table.notes[c]
        assert all(table.cells[c][j] != NA for j, n in enumerate(table.columns) if n.startswith("num_"))
    assert ds.n_rows == labels.size


def test_planted_star_recovery():
    # pooled over five generator seeds: 3 clusters x (6 numeric + 2 indicator) cells each
    correct = total = 0
    nulls_blank = nulls = 0
    for seed in range(5):
        spec, syn = synthetic_for_stars(seed)
        ds = normalize_numeric(syn.dataset)[0]
        table = per_cluster_significance(ds, syn.labels)
        assert table.columns[1:] == syn.design_columns
        for c in range(3):
            for j, name in enumerate(syn.design_columns):
                cell = table.cells[c][j + 1]
                truth = syn.coefficients[c, j]
                if truth == 0:
                    ok = cell == ""
                    nulls += 1
                    nulls_blank += ok
                else:
                    ok = cell == "***"
                correct += ok
                total += 1
    assert correct / total >= 0.90
    assert nulls_blank / nulls >= 0.85


def test_markdown_layout():
    _, syn = synthetic_for_stars(2, rows=300)
    table = per_cluster_significance(syn.dataset, syn.labels)
    md = table.to_markdown().splitlines()
    assert md[0].startswith("| Cluster | Intercept | num_0")
    assert md[2].startswith("| k1 |")
    assert LEGEND in md
    body = [cell.strip() for line in md[2:5] for cell in line.strip("|").split("|")[1:]]
    assert set(body) <= {"***", "**", "*", "", NA}
