"""End-to-end protocols shared by the CLI, the demos and the acceptance tests.

The split protocol is leak-free: rows are split before standardization and
the test side reuses the training statistics.
"""

from __future__ import annotations

import numpy as np

from . import baseline, ensemble, metrics
from .baseline import LinearModel
from .data import Dataset, RawTable, split_raw, standardize
from .ensemble import EnsembleModel
from .hypernet import TrainConfig


def prepare_split(raw: RawTable, seed: int, test_fraction: float) -> tuple[Dataset, Dataset]:
    """Split raw rows, standardize the training side, reuse its stats on test."""
    train_raw, test_raw = split_raw(raw, seed, test_fraction)
    train_ds, stats = standardize(train_raw)
    test_ds, _ = standardize(test_raw, stats)
    return train_ds, test_ds


def predictor(model):
    """Batch probability function for any supported model."""
    if isinstance(model, EnsembleModel):
        return lambda X: ensemble.predict_batch(model, X)
    if isinstance(model, LinearModel):
        return lambda X: baseline.predict_logreg_batch(model, X)
    raise TypeError(f"no predictor for {type(model).__name__}")


def train_model(train_ds: Dataset, kind: str, cfg: TrainConfig,
                n_members: int = 5, base_seed: int = 0, l2: float = 1e-4):
    if kind == "ensemble":
        return ensemble.train_ensemble(train_ds, n_members, base_seed, cfg)
    if kind == "linear":
        return baseline.fit_logreg(train_ds, l2=l2)
    raise ValueError(f"unknown model kind {kind!r}")


def multi_seed_evaluation(raw: RawTable, seeds, test_fraction: float, kind: str,
                          cfg: TrainConfig, n_members: int = 5,
                          l2: float = 1e-4) -> list[metrics.EvalReport]:
    """Train and evaluate one model per split seed; returns per-split reports."""
    reports = []
    for seed in seeds:
        train_ds, test_ds = prepare_split(raw, seed, test_fraction)
        model = train_model(train_ds, kind, cfg, n_members=n_members,
                            base_seed=seed, l2=l2)
        reports.append(metrics.evaluate(predictor(model), test_ds))
    return reports


def aggregate_reports(reports) -> dict[str, tuple[float, float]]:
    """Per-metric (mean, population std) across split reports."""
    out = {}
    for name in metrics.EvalReport.METRIC_NAMES:
        vals = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        out[name] = (float(vals.mean()), float(vals.std()))
    return out


def format_aggregate_table(agg: dict[str, tuple[float, float]]) -> str:
    """Aligned ``metric: mean +/- std`` lines."""
    width = max(len(k) for k in agg)
    lines = [f"{name:<{width}} : {mean:.4f} ± {std:.4f}"
             for name, (mean, std) in agg.items()]
    return "\n".join(lines)


def format_report_table(report: metrics.EvalReport) -> str:
    width = max(len(k) for k in metrics.EvalReport.METRIC_NAMES)
    lines = [f"{name:<{width}} : {getattr(report, name):.4f}"
             for name in metrics.EvalReport.METRIC_NAMES]
    lines.append(f"n_test{'':{max(width - 6, 0)}} : {report.n_test}")
    return "\n".join(lines)
