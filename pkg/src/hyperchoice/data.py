"""Tabular ingestion, Z-score standardization, splits, and the synthetic generator.

Labels follow the convention y=1 means the driver rejects the request, so a
positive utility weight pushes toward rejection.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CsvParseError, SchemaError
from .numerics import sigmoid

FEATURE_KINDS = ("continuous", "binary", "onehot")

# Positional roles in the synthetic generator: feature 0 is the monetary
# incentive (fare analogue), feature 1 the driver-profile scaler that
# modulates how much that incentive matters.
FARE_FEATURE = 0
PROFILE_FEATURE = 1

_SYNTH_FEATURE_NAMES = [
    "fare", "expected_income", "tip", "surge", "pickup_time", "congestion",
    "driver_age", "work_hours", "rider_rating", "earned_income",
    "trip_distance", "idle_time",
]


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names and kinds plus the label column."""

    feature_names: tuple[str, ...]
    feature_kinds: tuple[str, ...]
    label_column: str = "label"
    label_positive_meaning: str = "reject"

    def __post_init__(self):
        names = self.feature_names
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if self.label_column in names:
            raise SchemaError(f"label column {self.label_column!r} also listed as a feature")
        if len(self.feature_kinds) != len(names):
            raise SchemaError("feature_kinds must cover every feature")
        for name, kind in zip(names, self.feature_kinds):
            if kind not in FEATURE_KINDS:
                raise SchemaError(f"unknown kind {kind!r} for feature {name!r}")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def continuous_indices(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.feature_kinds) if k == "continuous"],
                        dtype=int)

    def index_of(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(
                f"unknown feature {name!r}; valid names: {', '.join(self.feature_names)}"
            ) from None

    def to_json_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "feature_kinds": list(self.feature_kinds),
            "label_column": self.label_column,
            "label_positive_meaning": self.label_positive_meaning,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FeatureSchema":
        try:
            return cls(
                feature_names=tuple(d["feature_names"]),
                feature_kinds=tuple(d["feature_kinds"]),
                label_column=d.get("label_column", "label"),
                label_positive_meaning=d.get("label_positive_meaning", "reject"),
            )
        except KeyError as exc:
            raise SchemaError(f"schema JSON missing field {exc}") from None

    def fingerprint(self) -> str:
        import hashlib

        blob = json.dumps(self.to_json_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_schema(path) -> FeatureSchema:
    with open(path, encoding="utf-8") as fh:
        return FeatureSchema.from_json_dict(json.load(fh))


def save_schema(schema: FeatureSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_json_dict(), fh, indent=2)
        fh.write("\n")


@dataclass
class RawTable:
    """Unstandardized numeric rows, column order fixed by the schema."""

    X: np.ndarray  # (N, F) raw feature values
    y: np.ndarray  # (N,) binary labels
    schema: FeatureSchema

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y)
        if self.X.ndim != 2 or self.X.shape[1] != self.schema.n_features:
            raise SchemaError("raw matrix width does not match schema")
        if self.y.shape != (self.X.shape[0],):
            raise SchemaError("label vector length does not match rows")
        if not np.isin(self.y, (0, 1)).all():
            raise SchemaError("labels must be 0 or 1")
        self.y = self.y.astype(np.int64)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def take(self, indices) -> "RawTable":
        return RawTable(self.X[indices], self.y[indices], self.schema)


@dataclass
class NormStats:
    """Per-continuous-feature training mean and population std."""

    means: dict[str, float]
    stds: dict[str, float]

    def __post_init__(self):
        if set(self.means) != set(self.stds):
            raise SchemaError("means and stds must cover the same features")
        for name, s in self.stds.items():
            if not (s > 0):
                raise SchemaError(f"non-positive std for feature {name!r}")

    def standardize_value(self, name: str, raw):
        if name in self.means:
            return (np.asarray(raw, dtype=np.float64) - self.means[name]) / self.stds[name]
        return np.asarray(raw, dtype=np.float64)

    def unstandardize_value(self, name: str, std_val):
        if name in self.means:
            return np.asarray(std_val, dtype=np.float64) * self.stds[name] + self.means[name]
        return np.asarray(std_val, dtype=np.float64)

    def to_json_dict(self) -> dict:
        return {"means": dict(self.means), "stds": dict(self.stds)}

    @classmethod
    def from_json_dict(cls, d: dict) -> "NormStats":
        return cls(means=dict(d["means"]), stds=dict(d["stds"]))


@dataclass
class Dataset:
    """Standardized feature matrix with labels, schema and the stats used."""

    X: np.ndarray  # (N, F) standardized
    y: np.ndarray  # (N,)
    schema: FeatureSchema
    norm_stats: NormStats

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        n, f = self.X.shape if self.X.ndim == 2 else (0, 0)
        if n < 1 or f < 1:
            raise ValueError("dataset needs at least one row and one feature")
        if f != self.schema.n_features:
            raise SchemaError("matrix width does not match schema")
        if self.y.shape != (n,):
            raise ValueError("label vector length does not match rows")
        if not np.isfinite(self.X).all():
            raise ValueError("dataset contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, indices) -> "Dataset":
        return Dataset(self.X[indices], self.y[indices], self.schema, self.norm_stats)


def load_csv(path, schema: FeatureSchema) -> RawTable:
    """Parse a strict numeric CSV whose header covers exactly the schema columns.

    Any non-numeric or missing cell aborts with the offending row index.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        expected = set(schema.feature_names) | {schema.label_column}
        missing = expected - set(header)
        if missing:
            raise SchemaError(f"{path}: missing column(s): {', '.join(sorted(missing))}")
        extra = set(header) - expected
        if extra:
            raise SchemaError(f"{path}: unexpected column(s): {', '.join(sorted(extra))}")
        col_of = {name: header.index(name) for name in header}
        feat_cols = [col_of[n] for n in schema.feature_names]
        label_col = col_of[schema.label_column]

        rows, labels = [], []
        for i, row in enumerate(reader):
            if len(row) != len(header):
                raise CsvParseError(f"{path}: row {i}: expected {len(header)} cells, got {len(row)}")
            try:
                values = [float(row[c]) for c in feat_cols]
                lab = float(row[label_col])
            except ValueError:
                raise CsvParseError(f"{path}: row {i}: non-numeric cell") from None
            if not all(np.isfinite(values)) or not np.isfinite(lab):
                raise CsvParseError(f"{path}: row {i}: non-finite value")
            if lab not in (0.0, 1.0):
                raise CsvParseError(f"{path}: row {i}: label must be 0 or 1, got {lab}")
            rows.append(values)
            labels.append(int(lab))
    if not rows:
        raise CsvParseError(f"{path}: no rows")
    return RawTable(np.array(rows), np.array(labels), schema)


def save_csv(raw: RawTable, path) -> None:
    """Write a RawTable back to CSV with full-precision (repr) floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(raw.schema.feature_names) + [raw.schema.label_column])
        for xi, yi in zip(raw.X, raw.y):
            writer.writerow([repr(float(v)) for v in xi] + [int(yi)])


def standardize(raw: RawTable, stats: NormStats | None = None) -> tuple[Dataset, NormStats]:
    """Z-score continuous columns; binary/one-hot columns pass through.

    With ``stats=None`` (training path) the mean and population std are
    computed from ``raw``; passing training stats is the leak-free test path.
    """
    schema = raw.schema
    cont = schema.continuous_indices()
    if stats is None:
        means, stds = {}, {}
        for i in cont:
            name = schema.feature_names[i]
            col = raw.X[:, i]
            s = col.std()
            if s == 0.0:
                raise SchemaError(f"continuous column {name!r} has zero variance")
            means[name] = float(col.mean())
            stds[name] = float(s)
        stats = NormStats(means, stds)
    else:
        covered = set(stats.means)
        needed = {schema.feature_names[i] for i in cont}
        if not needed <= covered:
            raise SchemaError(f"stats missing feature(s): {', '.join(sorted(needed - covered))}")

    X = raw.X.copy()
    for i in cont:
        name = schema.feature_names[i]
        X[:, i] = (X[:, i] - stats.means[name]) / stats.stds[name]
    return Dataset(X, raw.y, schema, stats), stats


def split_indices(n: int, seed: int, test_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled train/test index sets; test size round(n * fraction).

    The rounded size is clamped to [1, n-1] so neither side is empty.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    n_test = min(max(int(round(n * test_fraction)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return perm[n_test:], perm[:n_test]


def split(ds: Dataset, seed: int, test_fraction: float) -> tuple[Dataset, Dataset]:
    """Split a standardized dataset into disjoint train/test subsets."""
    train_idx, test_idx = split_indices(ds.n_rows, seed, test_fraction)
    return ds.take(train_idx), ds.take(test_idx)


def split_raw(raw: RawTable, seed: int, test_fraction: float) -> tuple[RawTable, RawTable]:
    """Row-level split of unstandardized data (standardize each side afterwards)."""
    train_idx, test_idx = split_indices(raw.n_rows, seed, test_fraction)
    return raw.take(train_idx), raw.take(test_idx)


def bootstrap_sample(ds: Dataset, seed: int) -> Dataset:
    """Resample N rows with replacement, deterministic by seed."""
    idx = np.random.default_rng(seed).integers(0, ds.n_rows, size=ds.n_rows)
    return ds.take(idx)


@dataclass(frozen=True)
class SynthConfig:
    """Configuration of the clustered synthetic generator.

    Records are drawn from ``n_archetypes`` Gaussian clusters; the true
    per-row utility weights are the archetype's base weights plus an
    interaction term through which the profile feature (index 1) scales the
    weight of the fare feature (index 0). Rejection labels are Bernoulli
    draws from sigmoid(w*(x) . x + bias) on the standardized features.
    """

    n_rows: int = 5000
    n_features: int = 12
    n_archetypes: int = 3
    noise: float = 1.0          # within-cluster feature dispersion
    seed: int = 0
    cluster_spread: float = 1.0  # dispersion of cluster centers
    fare_weight_low: float = -2.5
    fare_weight_high: float = -1.0
    base_weight_scale: float = 1.25
    interaction_strength: float = 0.5
    bias: float = 0.0
    base_weights: tuple | None = None        # (K, F) override
    interaction_coeffs: tuple | None = None  # (K,) override

    def __post_init__(self):
        if self.n_archetypes < 2:
            raise ValueError("need at least 2 archetypes")
        if self.n_rows < self.n_archetypes:
            raise ValueError("need at least as many rows as archetypes")
        if self.n_features < 4:
            raise ValueError("need at least 4 features")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")

    def to_json_dict(self) -> dict:
        d = {
            "n_rows": self.n_rows, "n_features": self.n_features,
            "n_archetypes": self.n_archetypes, "noise": self.noise,
            "seed": self.seed, "cluster_spread": self.cluster_spread,
            "fare_weight_low": self.fare_weight_low,
            "fare_weight_high": self.fare_weight_high,
            "base_weight_scale": self.base_weight_scale,
            "interaction_strength": self.interaction_strength,
            "bias": self.bias,
        }
        if self.base_weights is not None:
            d["base_weights"] = np.asarray(self.base_weights).tolist()
        if self.interaction_coeffs is not None:
            d["interaction_coeffs"] = np.asarray(self.interaction_coeffs).tolist()
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "SynthConfig":
        kwargs = dict(d)
        if "base_weights" in kwargs:
            kwargs["base_weights"] = tuple(map(tuple, kwargs["base_weights"]))
        if "interaction_coeffs" in kwargs:
            kwargs["interaction_coeffs"] = tuple(kwargs["interaction_coeffs"])
        return cls(**kwargs)


@dataclass
class SynthGroundTruth:
    """The generating utility function and the per-row truth it implies."""

    archetypes: np.ndarray         # (N,) cluster assignment
    base_weights: np.ndarray       # (K, F)
    interaction_coeffs: np.ndarray  # (K,) profile -> fare coupling
    fare_feature: int
    profile_feature: int
    bias: float
    true_probs: np.ndarray         # (N,) Bernoulli parameter per row

    def row_weights(self, X: np.ndarray) -> np.ndarray:
        """True per-row weight vectors w*(x) on standardized features."""
        W = self.base_weights[self.archetypes].copy()
        W[:, self.fare_feature] += (
            self.interaction_coeffs[self.archetypes] * X[:, self.profile_feature]
        )
        return W

    def row_logits(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("nf,nf->n", self.row_weights(X), X) + self.bias

    def to_json_dict(self) -> dict:
        return {
            "archetypes": self.archetypes.tolist(),
            "base_weights": self.base_weights.tolist(),
            "interaction_coeffs": self.interaction_coeffs.tolist(),
            "fare_feature": self.fare_feature,
            "profile_feature": self.profile_feature,
            "bias": self.bias,
            "true_probs": self.true_probs.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SynthGroundTruth":
        return cls(
            archetypes=np.asarray(d["archetypes"], dtype=int),
            base_weights=np.asarray(d["base_weights"], dtype=np.float64),
            interaction_coeffs=np.asarray(d["interaction_coeffs"], dtype=np.float64),
            fare_feature=int(d["fare_feature"]),
            profile_feature=int(d["profile_feature"]),
            bias=float(d["bias"]),
            true_probs=np.asarray(d["true_probs"], dtype=np.float64),
        )


def synth_schema(n_features: int) -> FeatureSchema:
    names = list(_SYNTH_FEATURE_NAMES[:n_features])
    names += [f"feat_{i}" for i in range(len(names), n_features)]
    return FeatureSchema(tuple(names), ("continuous",) * n_features)


def gen_synthetic(config: SynthConfig) -> tuple[Dataset, SynthGroundTruth]:
    """Generate a clustered dataset with a known context-dependent utility."""
    ds, truth, _ = gen_synthetic_with_raw(config)
    return ds, truth


def gen_synthetic_with_raw(config: SynthConfig) -> tuple[Dataset, SynthGroundTruth, RawTable]:
    """As gen_synthetic, but also return the raw table for CSV export."""
    rng = np.random.default_rng(config.seed)
    n, f, k = config.n_rows, config.n_features, config.n_archetypes
    schema = synth_schema(f)

    centers = rng.normal(0.0, config.cluster_spread, size=(k, f))
    archetypes = rng.integers(0, k, size=n)
    R = centers[archetypes] + config.noise * rng.normal(0.0, 1.0, size=(n, f))

    if config.base_weights is not None:
        base = np.asarray(config.base_weights, dtype=np.float64)
        if base.shape != (k, f):
            raise ValueError(f"base_weights must have shape ({k}, {f})")
    else:
        base = rng.normal(0.0, config.base_weight_scale, size=(k, f))
        base[:, FARE_FEATURE] = rng.uniform(config.fare_weight_low,
                                            config.fare_weight_high, size=k)
        base[:, PROFILE_FEATURE] = rng.normal(0.0, 0.3, size=k)

    if config.interaction_coeffs is not None:
        coeffs = np.asarray(config.interaction_coeffs, dtype=np.float64)
        if coeffs.shape != (k,):
            raise ValueError(f"interaction_coeffs must have shape ({k},)")
    else:
        coeffs = config.interaction_strength * rng.uniform(0.5, 1.5, size=k)

    raw = RawTable(R, np.zeros(n, dtype=np.int64), schema)
    ds, stats = standardize(raw)

    truth = SynthGroundTruth(
        archetypes=archetypes, base_weights=base, interaction_coeffs=coeffs,
        fare_feature=FARE_FEATURE, profile_feature=PROFILE_FEATURE,
        bias=config.bias, true_probs=np.empty(n),
    )
    probs = sigmoid(truth.row_logits(ds.X))
    truth.true_probs = probs
    y = (rng.random(n) < probs).astype(np.int64)

    raw = RawTable(R, y, schema)
    ds = Dataset(ds.X, y, schema, stats)
    return ds, truth, raw
