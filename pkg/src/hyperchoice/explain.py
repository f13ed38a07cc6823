"""Explanation products built on the ensemble's generated weights.

Three views: dataset-level importance of each feature, contribution curves
phi_i(v) = mean_n[ v * avg_weight_i(x_n with feature i set to v) ] swept over
the observed range, and per-record contribution / counterfactual analyses.
The sign convention follows the label: positive contributions push toward
rejection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ensemble as ens_mod
from .data import Dataset, NormStats
from .ensemble import EnsembleModel
from .numerics import canonical_mean, canonical_std


@dataclass
class ImportanceTable:
    """Dataset-mean and -std of the member-averaged weight, per feature."""

    feature_names: list[str]
    mean_weight: np.ndarray  # (F,) mean over rows of averaged weight
    std_weight: np.ndarray   # (F,) std over rows
    sign_note: str = "positive weight pushes toward rejection"

    def rows(self):
        order = np.argsort(-np.abs(self.mean_weight))
        for i in order:
            yield self.feature_names[i], float(self.mean_weight[i]), float(self.std_weight[i])


@dataclass
class ContributionCurve:
    """Mean contribution of one feature over a grid of standardized values.

    ``phi_std`` is the across-member dispersion of the dataset-averaged
    contribution; ``phi_std_rows`` the across-row dispersion, emitted for
    transparency.
    """

    feature: int
    grid: np.ndarray          # (G,) ascending, standardized units
    phi: np.ndarray           # (G,)
    phi_std: np.ndarray       # (G,) across members
    phi_std_rows: np.ndarray  # (G,) across rows
    units: str = "standardized"


@dataclass
class CounterfactualResult:
    """One record swept along one feature in raw units."""

    base_record: np.ndarray       # (F,) standardized
    feature: int
    grid_raw: np.ndarray          # (G,) raw units, ascending
    grid_std: np.ndarray          # (G,) standardized
    contribution: np.ndarray      # (G,) v_std * averaged weight
    contribution_std: np.ndarray  # (G,) across members
    prob: np.ndarray              # (G,) averaged rejection probability
    prob_std: np.ndarray          # (G,) across members
    base_prob: float
    flip_point: float | None     # first raw grid value whose class differs from base


def global_importance(ens: EnsembleModel, ds: Dataset) -> ImportanceTable:
    """Average the member-averaged weights over every record of ``ds``."""
    W_bar, _ = ens_mod.average_utilities(ens, ds.X)
    return ImportanceTable(
        feature_names=list(ds.schema.feature_names),
        mean_weight=W_bar.mean(axis=0),
        std_weight=W_bar.std(axis=0),
    )


def contribution_sweep(ens: EnsembleModel, ds: Dataset, feature: int,
                       n_grid: int = 25) -> ContributionCurve:
    """Intervention sweep: set feature ``i`` to each grid value in every row.

    The grid spans the observed standardized range of the feature with
    ``n_grid`` equally spaced points.
    """
    f = ds.n_features
    if not 0 <= feature < f:
        raise IndexError(f"feature index {feature} out of range for {f} features")
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    col = ds.X[:, feature]
    grid = np.linspace(col.min(), col.max(), n_grid)

    phi = np.empty(n_grid)
    phi_std = np.empty(n_grid)
    phi_std_rows = np.empty(n_grid)
    X_mod = ds.X.copy()
    for gi, v in enumerate(grid):
        X_mod[:, feature] = v
        Ws, _ = ens_mod.member_utilities(ens, X_mod)   # (M, B, F)
        contrib = v * Ws[:, :, feature]                # (M, B)
        per_member = contrib.mean(axis=1)              # dataset average per member
        phi[gi] = canonical_mean(per_member)
        phi_std[gi] = canonical_std(per_member)
        phi_std_rows[gi] = canonical_mean(contrib, axis=0).std()
    return ContributionCurve(feature=feature, grid=grid, phi=phi,
                             phi_std=phi_std, phi_std_rows=phi_std_rows)


def instance_contributions(ens: EnsembleModel, x: np.ndarray):
    """Per-feature (name, x_i * avg_weight_i, member std) for one record.

    The contributions plus the averaged intercept reproduce the
    averaged-weight logit exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ens.n_features,):
        raise ValueError(f"expected record of length {ens.n_features}, got {x.shape}")
    Ws, _ = ens_mod.member_utilities(ens, x[None, :])  # (M, 1, F)
    mean_c = canonical_mean(Ws[:, 0, :], axis=0) * x   # value times averaged weight
    std_c = canonical_std(Ws[:, 0, :] * x, axis=0)
    names = ens.schema.feature_names
    return [(names[i], float(mean_c[i]), float(std_c[i])) for i in range(x.size)]


def counterfactual_sweep(ens: EnsembleModel, x: np.ndarray, feature: int,
                         raw_grid: np.ndarray, norm_stats: NormStats) -> CounterfactualResult:
    """Sweep a single record's feature over a raw-unit grid.

    Reports the contribution and rejection-probability curves and the first
    grid value at which the predicted class flips relative to the base
    record.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ens.n_features,):
        raise ValueError(f"expected record of length {ens.n_features}, got {x.shape}")
    if not 0 <= feature < ens.n_features:
        raise IndexError(f"feature index {feature} out of range")
    raw_grid = np.asarray(raw_grid, dtype=np.float64)
    if raw_grid.ndim != 1 or raw_grid.size < 1:
        raise ValueError("raw grid must be a non-empty vector")
    if not np.isfinite(raw_grid).all():
        raise ValueError("raw grid contains non-finite values")
    if raw_grid.size > 1 and not (np.diff(raw_grid) > 0).all():
        raise ValueError("raw grid must be strictly ascending")

    name = ens.schema.feature_names[feature]
    grid_std = np.asarray(norm_stats.standardize_value(name, raw_grid))

    X_mod = np.repeat(x[None, :], raw_grid.size, axis=0)
    X_mod[:, feature] = grid_std
    Ws, _ = ens_mod.member_utilities(ens, X_mod)       # (M, G, F)
    contrib_members = Ws[:, :, feature] * grid_std     # (M, G)
    probs_members = ens_mod.member_probs(ens, X_mod)   # (M, G)

    base_prob = ens_mod.predict(ens, x)
    prob = canonical_mean(probs_members, axis=0)
    base_class = base_prob >= 0.5
    flipped = (prob >= 0.5) != base_class
    flip_point = float(raw_grid[np.argmax(flipped)]) if flipped.any() else None

    return CounterfactualResult(
        base_record=x, feature=feature, grid_raw=raw_grid, grid_std=grid_std,
        contribution=canonical_mean(contrib_members, axis=0),
        contribution_std=canonical_std(contrib_members, axis=0),
        prob=prob, prob_std=canonical_std(probs_members, axis=0),
        base_prob=base_prob, flip_point=flip_point,
    )
