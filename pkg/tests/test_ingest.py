import json

import numpy as np
import pytest

from subgroups.data import Dataset, Kind, one_hot
from subgroups.errors import (
    DataFileNotFound,
    HeaderMismatch,
    InvalidSpec,
    ParseError,
    SchemaError,
    UnknownCategoryLevel,
    UnknownProfile,
)
from subgroups.ingest import (
    SchemaProfile,
    SyntheticSpec,
    builtin_profile,
    gen_synthetic,
    load_csv,
    load_profile,
    planted_slopes,
    prepare_compas,
    save_profile,
    write_csv,
    write_synthetic,
)

NC_HEADER = ("recidivism,priors,schooling,prison_violations,age,prison_time,"
             "alcohol,hard_drugs,parole,married,felony,male,crime_type")
# rows A, B, C of the published sample view (one-hot crime type folded back)
NC_ROWS = (
    "0,0,7,2,36.8,2.5,1,0,1,1,0,1,other",
    "1,8,9,0,24.3,0.6,0,0,0,1,0,1,property",
    "0,1,12,0,23.1,1.1,0,0,1,0,0,1,other",
)


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def counts(profile):
    kinds = [c.kind for c in profile.schema.predictors]
    multi = [len(c.levels) for c in profile.schema.predictors if c.kind is Kind.CATEGORICAL]
    return kinds.count(Kind.NUMERIC), kinds.count(Kind.BINARY), multi


# --- built-in profiles


def test_north_carolina_profile():
    p = builtin_profile("north_carolina")
    assert p.schema.response == "recidivism"
    assert counts(p) == (5, 6, [3])
    assert p.schema.column("crime_type").levels == ("other", "property", "personal")
    assert p.reference_levels == {"crime_type": "other"}


def test_florida_profile():
    p = builtin_profile("florida")
    assert len(p.schema.predictors) == 6
    assert counts(p) == (4, 2, [])


@pytest.mark.parametrize("name, width", [("florida", 6), ("north_carolina", 13), ("california", 12), ("michigan", 10)])
def test_field_count_matches_summary_table(name, width):
    # the summary table's column counts are design widths: multi-class columns
    # contribute one indicator per non-reference level
    p = builtin_profile(name)
    empty = Dataset(p.schema, {c: [] for c in p.schema.names})
    assert one_hot(empty, p.reference_levels).d == width


def test_california_profile():
    p = builtin_profile("california")
    assert counts(p) == (4, 5, [4])
    assert p.schema.column("crime_type").levels == ("other", "nuisance", "personal", "property")


def test_michigan_profile():
    assert counts(builtin_profile("michigan")) == (5, 5, [])


def test_unknown_profile():
    with pytest.raises(UnknownProfile):
        builtin_profile("texas")


def test_profile_json_round_trip(tmp_path):
    p = builtin_profile("north_carolina")
    save_profile(p, tmp_path / "nc.json")
    assert load_profile(tmp_path / "nc.json") == p


def test_profile_rejects_unknown_keys():
    with pytest.raises(SchemaError):
        SchemaProfile.from_json({"columns": [], "response": "y", "bogus": 1})


# --- load_csv


def test_nc_sample_rows(tmp_path):
    path = write(tmp_path, NC_HEADER + "\n" + "\n".join(NC_ROWS) + "\n")
    ds, report = load_csv(path, builtin_profile("north_carolina"))
    assert ds.n_rows == 3
    assert ds["priors"][1] == 8
    assert ds["age"][1] == 24.3
    assert ds["recidivism"][1] == 1
    assert ds["crime_type"].tolist() == [0, 1, 0]
    assert report.rows_dropped_missing == 0
    assert report.final_class_counts == (2, 1)


def test_header_order_insensitive(tmp_path):
    cols = NC_HEADER.split(",")
    rows = [r.split(",") for r in NC_ROWS]
    order = list(reversed(range(len(cols))))
    text = ",".join(cols[i] for i in order) + "\n"
    text += "\n".join(",".join(r[i] for i in order) for r in rows) + "\n"
    ds, _ = load_csv(write(tmp_path, text), builtin_profile("north_carolina"))
    assert ds["age"].tolist() == [36.8, 24.3, 23.1]


def test_empty_file_after_header(tmp_path):
    ds, report = load_csv(write(tmp_path, NC_HEADER + "\n"), builtin_profile("north_carolina"))
    assert ds.n_rows == 0


def test_na_row_dropped(tmp_path):
    rows = list(NC_ROWS)
    rows[2] = rows[2].replace("23.1", "NA")
    ds, report = load_csv(write(tmp_path, NC_HEADER + "\n" + "\n".join(rows) + "\n"),
                          builtin_profile("north_carolina"))
    assert ds.n_rows == 2
    assert report.rows_dropped_missing == 1


def test_missing_file(tmp_path):
    with pytest.raises(DataFileNotFound):
        load_csv(tmp_path / "nope.csv", builtin_profile("florida"))


def test_header_mismatch_lists_columns(tmp_path):
    text = NC_HEADER.replace("schooling", "school") + "\n"
    with pytest.raises(HeaderMismatch) as info:
        load_csv(write(tmp_path, text), builtin_profile("north_carolina"))
    assert info.value.missing == ["schooling"]
    assert info.value.extra == ["school"]


def test_parse_error_reports_location(tmp_path):
    rows = list(NC_ROWS)
    rows[1] = rows[1].replace("24.3", "abc")
    with pytest.raises(ParseError) as info:
        load_csv(write(tmp_path, NC_HEADER + "\n" + "\n".join(rows) + "\n"), builtin_profile("north_carolina"))
    assert (info.value.row, info.value.column, info.value.token) == (3, "age", "abc")


def test_unknown_category_level(tmp_path):
    rows = list(NC_ROWS)
    rows[0] = rows[0].replace("other", "arson")
    with pytest.raises(UnknownCategoryLevel):
        load_csv(write(tmp_path, NC_HEADER + "\n" + "\n".join(rows) + "\n"), builtin_profile("north_carolina"))


def test_binary_must_be_zero_one(tmp_path):
    rows = list(NC_ROWS)
    rows[0] = "2" + rows[0][1:]
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, NC_HEADER + "\n" + "\n".join(rows) + "\n"), builtin_profile("north_carolina"))


def test_whitespace_trimmed_case_sensitive(tmp_path):
    rows = list(NC_ROWS)
    rows[0] = rows[0].replace("other", " other ")
    ds, _ = load_csv(write(tmp_path, NC_HEADER + "\n" + "\n".join(rows) + "\n"), builtin_profile("north_carolina"))
    assert ds["crime_type"][0] == 0
    rows[0] = rows[0].replace(" other ", "Other")
    with pytest.raises(UnknownCategoryLevel):
        load_csv(write(tmp_path, NC_HEADER + "\n" + "\n".join(rows) + "\n"), builtin_profile("north_carolina"))


def test_quoted_fields(tmp_path):
    text = NC_HEADER + "\n" + '"0","0","7","2","36.8","2.5","1","0","1","1","0","1","personal"\n'
    ds, _ = load_csv(write(tmp_path, text), builtin_profile("north_carolina"))
    assert ds["crime_type"].tolist() == [2]


def test_csv_round_trip(tmp_path):
    syn = gen_synthetic(SyntheticSpec(k_true=3, rows_per_cluster=20, seed=4))
    profile = SyntheticSpec(k_true=3, rows_per_cluster=20, seed=4).profile()
    write_csv(syn.dataset, tmp_path / "rt.csv")
    back, _ = load_csv(tmp_path / "rt.csv", profile)
    assert back == syn.dataset


def test_prepare_compas_projects_and_encodes(tmp_path):
    header = "id,name,sex,age,juv_fel_count,decile_score,juv_misd_count,priors_count,c_charge_degree,priors_count,two_year_recid"
    rows = ["1,a,Male,25,0,3,1,2,F,2,1", "2,b,Female,41,0,1,0,0,M,0,0", "3,c,Male,30,,4,0,1,F,1,0"]
    src = write(tmp_path, header + "\n" + "\n".join(rows) + "\n", "compas.csv")
    n = prepare_compas(src, tmp_path / "florida.csv")
    assert n == 2
    ds, _ = load_csv(tmp_path / "florida.csv", builtin_profile("florida"))
    assert ds["sex"].tolist() == [1, 0]
    assert ds["c_charge_degree"].tolist() == [1, 0]
    assert ds["two_year_recid"].tolist() == [1, 0]


# --- synthetic generator


def test_synthetic_deterministic():
    spec = SyntheticSpec(k_true=3, rows_per_cluster=50, seed=11)
    a, b = gen_synthetic(spec), gen_synthetic(spec)
    assert a.dataset == b.dataset
    assert np.array_equal(a.labels, b.labels)


def test_synthetic_cluster_sizes_and_ranges():
    spec = SyntheticSpec(k_true=4, rows_per_cluster=30, n_numeric=3, n_categorical=2, seed=2)
    syn = gen_synthetic(spec)
    assert np.bincount(syn.labels).tolist() == [30] * 4
    assert syn.dataset.n_rows == 120
    for j in range(3):
        assert syn.dataset[f"num_{j}"].min() == 0.0
    for m in range(2):
        assert syn.dataset[f"cat_{m}"].max() < 4


def test_synthetic_centres_are_separated():
    spec = SyntheticSpec(k_true=3, rows_per_cluster=4000, separation=6.0, seed=0)
    syn = gen_synthetic(spec)
    X = syn.dataset.numeric_block()
    means = np.array([X[syn.labels == c].mean(0) for c in range(3)])
    gaps = [np.linalg.norm(means[i] - means[j]) for i in range(3) for j in range(i + 1, 3)]
    assert np.allclose(gaps, 6.0, atol=0.15)


def test_synthetic_modal_levels_distinct():
    spec = SyntheticSpec(k_true=3, rows_per_cluster=500, flip_prob=0.05, seed=5)
    syn = gen_synthetic(spec)
    for m in range(2):
        col = syn.dataset[f"cat_{m}"]
        modes = [np.bincount(col[syn.labels == c], minlength=3).argmax() for c in range(3)]
        assert len(set(modes)) == 3
        share = np.mean([np.mean(col[syn.labels == c] == modes[c]) for c in range(3)])
        assert abs(share - 0.95) < 0.03


def mutual_information(a, b):
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1)
    joint /= joint.sum()
    pa, pb = joint.sum(1, keepdims=True), joint.sum(0, keepdims=True)
    nz = joint > 0
    return float((joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])).sum())


def test_synthetic_noise_only_case():
    spec = SyntheticSpec(k_true=3, rows_per_cluster=3000, separation=0.0, flip_prob=0.5, seed=1,
                         levels_per_categorical=3)
    syn = gen_synthetic(spec)
    # with 3 levels and flip 0.5, the modal level keeps 1/2 and the others 1/4 each: weak but nonzero
    # signal; the numeric block carries none at all
    X = syn.dataset.numeric_block()
    means = np.array([X[syn.labels == c].mean(0) for c in range(3)])
    assert np.abs(means - means.mean(0)).max() < 0.1
    spec2 = SyntheticSpec(k_true=2, rows_per_cluster=5000, separation=0.0, flip_prob=0.5, seed=1)
    syn2 = gen_synthetic(spec2)
    for m in range(2):
        assert mutual_information(syn2.labels, syn2.dataset[f"cat_{m}"]) < 1e-3


def test_planted_slopes_pattern():
    spec = SyntheticSpec(k_true=3, rows_per_cluster=10, n_numeric=4, coef_size=2.0)
    s = planted_slopes(spec)
    for c in range(3):
        for j in range(4):
            if (j + c) % 3 == 0:
                assert s[c, j] == 0
            else:
                assert abs(s[c, j]) == 2.0


def test_coefficients_align_with_design_columns():
    syn = gen_synthetic(SyntheticSpec(k_true=3, rows_per_cluster=10, seed=0))
    assert syn.coefficients.shape == (3, len(syn.design_columns))
    cat_cols = [j for j, n in enumerate(syn.design_columns) if n.startswith("cat_")]
    assert not syn.coefficients[:, cat_cols].any()


@pytest.mark.parametrize(
    "kwargs",
    [
        {"k_true": 0, "rows_per_cluster": 5},
        {"k_true": 2, "rows_per_cluster": 5, "separation": -1},
        {"k_true": 2, "rows_per_cluster": 5, "flip_prob": 0.6},
        {"k_true": 4, "rows_per_cluster": 5, "levels_per_categorical": 3},
    ],
)
def test_invalid_spec(kwargs):
    with pytest.raises(InvalidSpec):
        SyntheticSpec(**kwargs)


def test_spec_from_json_unknown_key():
    with pytest.raises(InvalidSpec):
        SyntheticSpec.from_json({"k_true": 2, "rows_per_cluster": 3, "colour": "red"})


def test_write_synthetic_sidecars(tmp_path):
    spec = SyntheticSpec(k_true=2, rows_per_cluster=5, seed=0)
    paths = write_synthetic(spec, tmp_path / "syn.csv")
    ds, _ = load_csv(paths["data"], load_profile(paths["profile"]))
    assert ds == gen_synthetic(spec).dataset
    lines = open(paths["labels"]).read().splitlines()
    assert lines[0] == "row,cluster" and len(lines) == 11
    assert json.load(open(paths["profile"]))["response"] == "y"
