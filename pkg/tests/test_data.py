import json

import numpy as np
import pytest

from hyperchoice import data
from hyperchoice.errors import CsvParseError, SchemaError
from hyperchoice.numerics import sigmoid


def make_schema(n=3, kinds=None):
    names = tuple(f"f{i}" for i in range(n))
    kinds = kinds or ("continuous",) * n
    return data.FeatureSchema(names, kinds)


# ---------------------------------------------------------------- schema

def test_schema_rejects_duplicate_names():
    with pytest.raises(SchemaError):
        data.FeatureSchema(("a", "a"), ("continuous", "continuous"))


def test_schema_rejects_label_as_feature():
    with pytest.raises(SchemaError):
        data.FeatureSchema(("a", "label"), ("continuous", "continuous"))


def test_schema_rejects_unknown_kind():
    with pytest.raises(SchemaError):
        data.FeatureSchema(("a",), ("fancy",))


def test_schema_json_round_trip(tmp_path):
    schema = make_schema(4, ("continuous", "binary", "onehot", "continuous"))
    path = tmp_path / "schema.json"
    data.save_schema(schema, path)
    assert data.load_schema(path) == schema
    assert data.load_schema(path).fingerprint() == schema.fingerprint()


def test_fingerprint_changes_with_schema():
    a = make_schema(3)
    b = make_schema(4)
    assert a.fingerprint() != b.fingerprint()


# ---------------------------------------------------------------- load_csv

RIDE_HEADER = "Rate,Pickup,Surge,Cong,Tip,Fare,Workhr,Age,EarnInc,ExpInc,label"
RIDE_ROW = "4,15,0,30,0,8,35,40,450,250,1"


def ride_schema():
    names = tuple(RIDE_HEADER.split(",")[:-1])
    return data.FeatureSchema(names, ("continuous",) * len(names))


def test_load_csv_single_row(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(f"{RIDE_HEADER}\n{RIDE_ROW}\n")
    raw = data.load_csv(path, ride_schema())
    assert raw.n_rows == 1
    np.testing.assert_array_equal(raw.X[0], [4, 15, 0, 30, 0, 8, 35, 40, 450, 250])
    assert raw.y[0] == 1


def test_load_csv_header_only(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(f"{RIDE_HEADER}\n")
    with pytest.raises(CsvParseError, match="no rows"):
        data.load_csv(path, ride_schema())


def test_load_csv_missing_label_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(RIDE_HEADER.replace(",label", ",other") + f"\n{RIDE_ROW}\n")
    with pytest.raises(SchemaError):
        data.load_csv(path, ride_schema())


def test_load_csv_non_numeric_cell_names_row(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(f"{RIDE_HEADER}\n{RIDE_ROW}\n" + RIDE_ROW.replace("450", "oops") + "\n")
    with pytest.raises(CsvParseError, match="row 1"):
        data.load_csv(path, ride_schema())


def test_load_csv_column_order_free(tmp_path):
    schema = make_schema(2)
    path = tmp_path / "t.csv"
    path.write_text("label,f1,f0\n1,20,10\n")
    raw = data.load_csv(path, schema)
    np.testing.assert_array_equal(raw.X[0], [10, 20])


def test_save_csv_round_trips_exactly(tmp_path):
    schema = make_schema(2)
    X = np.array([[0.1, -3.7], [1 / 3, 2.5e-8]])
    raw = data.RawTable(X, np.array([0, 1]), schema)
    path = tmp_path / "t.csv"
    data.save_csv(raw, path)
    back = data.load_csv(path, schema)
    np.testing.assert_array_equal(back.X, X)
    np.testing.assert_array_equal(back.y, raw.y)


# ---------------------------------------------------------------- standardize

def test_standardize_hand_oracle():
    # column [1,2,3]: mean 2, population std sqrt(2/3)
    schema = make_schema(1)
    raw = data.RawTable(np.array([[1.0], [2.0], [3.0]]), np.array([0, 1, 0]), schema)
    ds, stats = data.standardize(raw)
    assert stats.means["f0"] == pytest.approx(2.0)
    assert stats.stds["f0"] == pytest.approx(0.816496580927726, abs=1e-12)
    np.testing.assert_allclose(ds.X[:, 0], [-1.224744871391589, 0.0, 1.224744871391589],
                               atol=1e-12)


def test_standardize_binary_passthrough():
    schema = make_schema(2, ("continuous", "binary"))
    raw = data.RawTable(np.array([[1.0, 5.0], [2.0, 5.0]]), np.array([0, 1]), schema)
    ds, _ = data.standardize(raw)
    np.testing.assert_array_equal(ds.X[:, 1], [5.0, 5.0])


def test_standardize_with_given_stats():
    schema = make_schema(1)
    raw = data.RawTable(np.array([[2.0]]), np.array([1]), schema)
    stats = data.NormStats({"f0": 2.0}, {"f0": 1.0})
    ds, used = data.standardize(raw, stats)
    assert ds.X[0, 0] == 0.0
    assert used is stats


def test_standardize_zero_variance_names_column():
    schema = make_schema(2)
    raw = data.RawTable(np.array([[1.0, 7.0], [2.0, 7.0]]), np.array([0, 1]), schema)
    with pytest.raises(SchemaError, match="f1"):
        data.standardize(raw)


def test_standardize_train_invariant():
    rng = np.random.default_rng(0)
    schema = make_schema(5)
    raw = data.RawTable(rng.normal(3.0, 2.5, size=(200, 5)),
                        rng.integers(0, 2, size=200), schema)
    ds, _ = data.standardize(raw)
    assert np.abs(ds.X.mean(axis=0)).max() < 1e-9
    assert np.abs(ds.X.std(axis=0) - 1.0).max() < 1e-9


def test_joint_stats_differ_from_split_stats():
    # Re-standardizing train+test jointly is not the same as the two-path API.
    rng = np.random.default_rng(1)
    schema = make_schema(2)
    raw = data.RawTable(rng.normal(size=(50, 2)), rng.integers(0, 2, size=50), schema)
    train_raw, test_raw = data.split_raw(raw, seed=0, test_fraction=0.3)
    _, train_stats = data.standardize(train_raw)
    test_with_train_stats, _ = data.standardize(test_raw, train_stats)
    joint, _ = data.standardize(raw)
    _, test_idx = data.split_indices(raw.n_rows, 0, 0.3)
    assert not np.allclose(joint.X[test_idx], test_with_train_stats.X)


# ---------------------------------------------------------------- split

def make_dataset(n=10, f=2, seed=0):
    rng = np.random.default_rng(seed)
    schema = make_schema(f)
    raw = data.RawTable(rng.normal(size=(n, f)), rng.integers(0, 2, size=n), schema)
    ds, _ = data.standardize(raw)
    return ds


def test_split_sizes_and_disjoint():
    ds = make_dataset(10)
    train, test = data.split(ds, seed=7, test_fraction=0.2)
    assert train.n_rows == 8 and test.n_rows == 2
    joined = np.vstack([train.X, test.X])
    # every original row appears exactly once
    assert sorted(map(tuple, joined)) == sorted(map(tuple, ds.X))


def test_split_deterministic():
    ds = make_dataset(30)
    a = data.split(ds, seed=3, test_fraction=0.25)
    b = data.split(ds, seed=3, test_fraction=0.25)
    np.testing.assert_array_equal(a[0].X, b[0].X)
    np.testing.assert_array_equal(a[1].X, b[1].X)


def test_split_five_seeds_distinct():
    ds = make_dataset(60)
    tests = [frozenset(map(tuple, data.split(ds, s, 0.3)[1].X)) for s in range(5)]
    assert len(set(tests)) == 5


def test_split_fraction_out_of_range():
    ds = make_dataset(10)
    for frac in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            data.split(ds, 0, frac)


# ---------------------------------------------------------------- bootstrap

def test_bootstrap_single_row():
    ds = make_dataset(2)
    one = ds.take([0])
    boot = data.bootstrap_sample(one, seed=5)
    np.testing.assert_array_equal(boot.X, one.X)


def test_bootstrap_unique_fraction_matches_theory():
    # Monte-Carlo oracle: expected unique fraction 1 - (1 - 1/N)^N ~ 1 - 1/e
    ds = make_dataset(1000, f=1)
    fracs = []
    for seed in range(40):
        boot = data.bootstrap_sample(ds, seed)
        fracs.append(len(np.unique(boot.X[:, 0])) / 1000)
    assert abs(np.mean(fracs) - (1 - 1 / np.e)) < 0.03


def test_bootstrap_seeds_differ():
    ds = make_dataset(200)
    a = data.bootstrap_sample(ds, 0)
    b = data.bootstrap_sample(ds, 1)
    assert not np.array_equal(a.X, b.X)


def test_bootstrap_deterministic():
    ds = make_dataset(50)
    np.testing.assert_array_equal(data.bootstrap_sample(ds, 9).X,
                                  data.bootstrap_sample(ds, 9).X)


# ---------------------------------------------------------------- synthetic

def test_gen_synthetic_zero_weights_gives_half_probs():
    k, f = 2, 4
    cfg = data.SynthConfig(n_rows=50, n_features=f, n_archetypes=k, noise=0.0,
                           seed=1, bias=0.0,
                           base_weights=tuple(map(tuple, np.zeros((k, f)))),
                           interaction_coeffs=(0.0, 0.0))
    _, truth = data.gen_synthetic(cfg)
    np.testing.assert_array_equal(truth.true_probs, 0.5)


def test_gen_synthetic_deterministic():
    cfg = data.SynthConfig(n_rows=100, n_features=5, n_archetypes=2, seed=11)
    a_ds, a_gt = data.gen_synthetic(cfg)
    b_ds, b_gt = data.gen_synthetic(cfg)
    np.testing.assert_array_equal(a_ds.X, b_ds.X)
    np.testing.assert_array_equal(a_ds.y, b_ds.y)
    np.testing.assert_array_equal(a_gt.true_probs, b_gt.true_probs)


def test_gen_synthetic_truth_recomputes():
    cfg = data.SynthConfig(n_rows=300, n_features=6, n_archetypes=3, seed=4)
    ds, truth = data.gen_synthetic(cfg)
    recomputed = sigmoid(
        np.einsum("nf,nf->n", truth.row_weights(ds.X), ds.X) + truth.bias)
    np.testing.assert_allclose(recomputed, truth.true_probs, atol=1e-12)
    assert ((truth.true_probs > 0) & (truth.true_probs < 1)).all()


def test_gen_synthetic_config_validation():
    with pytest.raises(ValueError):
        data.SynthConfig(n_rows=2, n_features=4, n_archetypes=3)
    with pytest.raises(ValueError):
        data.SynthConfig(n_rows=10, n_features=3, n_archetypes=2)
    with pytest.raises(ValueError):
        data.SynthConfig(n_rows=10, n_features=4, n_archetypes=1)


def test_ground_truth_json_round_trip():
    cfg = data.SynthConfig(n_rows=40, n_features=4, n_archetypes=2, seed=8)
    _, truth = data.gen_synthetic(cfg)
    back = data.SynthGroundTruth.from_json_dict(
        json.loads(json.dumps(truth.to_json_dict())))
    np.testing.assert_array_equal(back.true_probs, truth.true_probs)
    np.testing.assert_array_equal(back.base_weights, truth.base_weights)
