"""Bagged ensemble of hypernetworks with the two reductions kept distinct.

Explanations use the member-averaged weights; predictions average the member
probabilities (which is not the sigmoid of the averaged logit). Member
disagreement in probability space is the uncertainty estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hypernet
from .data import Dataset, NormStats, FeatureSchema, bootstrap_sample
from .hypernet import HyperMemberParams, InstanceUtility, TrainConfig
from .numerics import canonical_mean, canonical_std


@dataclass
class EnsembleModel:
    """Trained members plus the schema and stats they were fitted under."""

    members: list[HyperMemberParams]
    member_seeds: list[int]
    train_config: TrainConfig
    schema: FeatureSchema
    norm_stats: NormStats

    def __post_init__(self):
        if len(self.members) < 1:
            raise ValueError("ensemble needs at least one member")
        if len(set(self.member_seeds)) != len(self.member_seeds):
            raise ValueError("member seeds must be unique")
        f = self.members[0].n_features
        for m in self.members:
            if m.n_features != f or m.arch != self.members[0].arch:
                raise ValueError("members must share one architecture")

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def n_features(self) -> int:
        return self.members[0].n_features

    @property
    def schema_fingerprint(self) -> str:
        return self.schema.fingerprint()


def train_ensemble(train: Dataset, n_members: int, base_seed: int,
                   cfg: TrainConfig, callback=None) -> EnsembleModel:
    """Train members on bootstrap resamples, member m seeded with base_seed + m.

    ``callback(member_index, EpochStats)`` is forwarded to each member's
    trainer when given. Members are aggregated in index order, so results
    are bit-reproducible.
    """
    if n_members < 1:
        raise ValueError("n_members must be >= 1")
    members, seeds = [], []
    for m in range(n_members):
        seed = base_seed + m
        segment = bootstrap_sample(train, seed)
        member_cb = None if callback is None else (lambda st, _m=m: callback(_m, st))
        try:
            members.append(hypernet.train_member(segment, cfg, seed=seed,
                                                 callback=member_cb))
        except Exception as exc:
            try:
                wrapped = type(exc)(f"member {m}: {exc}")
            except Exception:
                wrapped = RuntimeError(f"member {m}: {exc}")
            raise wrapped from exc
        seeds.append(seed)
    return EnsembleModel(members=members, member_seeds=seeds, train_config=cfg,
                         schema=train.schema, norm_stats=train.norm_stats)


def member_utilities(ens: EnsembleModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stacked per-member generated weights (M, B, F) and intercepts (M, B)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Ws, bs = [], []
    for m in ens.members:
        W, b = hypernet.generate_utilities(m, X)
        Ws.append(W)
        bs.append(b)
    return np.stack(Ws), np.stack(bs)


def average_utilities(ens: EnsembleModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Member-averaged weights (B, F) and intercepts (B,).

    The member axis is reduced canonically, so the average is exactly
    permutation invariant and exactly reproduces a consensus value.
    """
    Ws, bs = member_utilities(ens, X)
    return canonical_mean(Ws, axis=0), canonical_mean(bs, axis=0)


def avg_weights(ens: EnsembleModel, x: np.ndarray) -> InstanceUtility:
    """Member-averaged personalized utility for one record."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ens.n_features,):
        raise ValueError(f"expected record of length {ens.n_features}, got {x.shape}")
    W, b = average_utilities(ens, x[None, :])
    return InstanceUtility(weights=W[0], bias=float(b[0]))


def member_probs(ens: EnsembleModel, X: np.ndarray) -> np.ndarray:
    """Per-member rejection probabilities, shape (M, B)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.stack([hypernet.rejection_probs(m, X) for m in ens.members])


def predict_batch(ens: EnsembleModel, X: np.ndarray) -> np.ndarray:
    """Averaged member probabilities for a batch of records."""
    return canonical_mean(member_probs(ens, X), axis=0)


def predict(ens: EnsembleModel, x: np.ndarray) -> float:
    """Averaged rejection probability for one record."""
    return float(predict_batch(ens, np.asarray(x)[None, :])[0])


def predict_uncertainty(ens: EnsembleModel, x: np.ndarray) -> tuple[float, float]:
    """(mean, population std) of member probabilities for one record."""
    probs = member_probs(ens, np.asarray(x)[None, :])[:, 0]
    return float(canonical_mean(probs)), float(canonical_std(probs))
