"""Command-line entry point.

Commands: gen-synth, train, eval, explain, counterfactual, predict.
Each run takes an optional JSON config file; command-line flags override
config values. All outputs are written atomically (temp file + rename) and
any already-written outputs are removed if a later step fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import baseline, ensemble, explain, metrics, workflows
from .data import (SynthConfig, gen_synthetic_with_raw, load_csv, load_schema,
                   save_schema, standardize)
from .ensemble import EnsembleModel
from .hypernet import TrainConfig
from .serialize import load_model, save_model, model_to_dict


class _Outputs:
    """Buffers output files and commits them atomically at the end of a command."""

    def __init__(self):
        self._pending = []  # (path, text)
        self._committed = []

    def add(self, path, text: str):
        self._pending.append((str(path), text))

    def commit(self):
        try:
            for path, text in self._pending:
                tmp = f"{path}.tmp-{os.getpid()}"
                with open(tmp, "w", encoding="utf-8") as fh:
                    fh.write(text)
                os.replace(tmp, path)
                self._committed.append(path)
        except BaseException:
            self.rollback()
            raise

    def rollback(self):
        for path in self._committed:
            try:
                os.remove(path)
            except OSError:
                pass
        self._committed.clear()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _load_settings(args, defaults: dict) -> dict:
    """defaults <- config file <- explicit flags."""
    settings = dict(defaults)
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"config file not found: {args.config}")
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        settings.update(loaded)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


def _require_file(path, what: str):
    if path is None:
        raise ValueError(f"missing required {what}")
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _train_config(settings) -> TrainConfig:
    return TrainConfig(
        l1_ratio=settings["lambda"], penalty_scale=settings["alpha"],
        epochs=settings["epochs"], batch_size=settings["batch_size"],
        learning_rate=settings["learning_rate"], patience=settings["patience"],
        validation_fraction=settings["validation_fraction"], seed=settings["seed"],
    )


def _load_data(settings):
    schema = load_schema(_require_file(settings["schema"], "schema file"))
    raw = load_csv(_require_file(settings["data"], "data file"), schema)
    return schema, raw


def _check_fingerprint(model, schema):
    mf, sf = model.schema.fingerprint(), schema.fingerprint()
    if mf != sf:
        raise ValueError(
            f"schema fingerprint mismatch: model was trained under {mf}, "
            f"data schema is {sf}")


TRAIN_DEFAULTS = {
    "data": None, "schema": None, "out": ".", "baseline": False,
    "m": 5, "seed": 0, "lambda": 0.5, "alpha": 1e-3, "epochs": 200,
    "batch_size": 64, "learning_rate": 1e-3, "patience": 20,
    "validation_fraction": 0.1, "l2": 1e-4,
}


def cmd_gen_synth(args) -> int:
    defaults = {
        "out": ".", "stem": "synthetic", "n_rows": 5000, "n_features": 12,
        "n_archetypes": 3, "noise": 1.0, "seed": 0, "cluster_spread": 1.0,
        "fare_weight_low": -2.5, "fare_weight_high": -1.0,
        "base_weight_scale": 1.25, "interaction_strength": 0.5, "bias": 0.0,
    }
    s = _load_settings(args, defaults)
    cfg = SynthConfig(**{k: s[k] for k in defaults if k not in ("out", "stem")})
    ds, truth, raw = gen_synthetic_with_raw(cfg)

    out = s["out"]
    os.makedirs(out, exist_ok=True)
    stem = os.path.join(out, s["stem"])
    outputs = _Outputs()
    header = list(raw.schema.feature_names) + [raw.schema.label_column]
    rows = [[repr(float(v)) for v in xi] + [str(int(yi))] for xi, yi in zip(raw.X, raw.y)]
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    outputs.add(f"{stem}.csv", buf.getvalue())
    outputs.add(f"{stem}.truth.json", _json_text(truth.to_json_dict()))
    outputs.add(f"{stem}.schema.json", _json_text(raw.schema.to_json_dict()))
    outputs.commit()
    print(f"wrote {stem}.csv: {raw.n_rows} rows, {raw.schema.n_features} features "
          f"(+ label), reject rate {raw.y.mean():.3f}")
    return 0


def cmd_train(args) -> int:
    s = _load_settings(args, TRAIN_DEFAULTS)
    schema, raw = _load_data(s)
    train_ds, _ = standardize(raw)
    out = s["out"]
    os.makedirs(out, exist_ok=True)
    model_path = os.path.join(out, "model.json")

    if s["baseline"]:
        model = baseline.fit_logreg(train_ds, l2=s["l2"])
        print(f"fitted linear baseline on {train_ds.n_rows} rows")
    else:
        cfg = _train_config(s)
        histories = {}
        def track(m, st):
            histories.setdefault(m, []).append(st)
        model = ensemble.train_ensemble(train_ds, s["m"], s["seed"], cfg,
                                        callback=track)
        for m in sorted(histories):
            h = histories[m]
            best = min(h, key=lambda st: st.val_nll)
            print(f"member {m}: {len(h)} epochs, val NLL {h[0].val_nll:.4f} -> "
                  f"{best.val_nll:.4f} (best at epoch {best.epoch})")
    outputs = _Outputs()
    outputs.add(model_path, _json_text(model_to_dict(model)))
    outputs.commit()
    print(f"wrote {model_path}")
    return 0


def cmd_eval(args) -> int:
    defaults = dict(TRAIN_DEFAULTS)
    defaults.update({"model": None, "seeds": None, "test_fraction": 0.3,
                     "n_bins": 15, "threshold": 0.5})
    s = _load_settings(args, defaults)
    schema, raw = _load_data(s)
    model = load_model(_require_file(s["model"], "model file"))
    _check_fingerprint(model, schema)
    out = s["out"]
    os.makedirs(out, exist_ok=True)
    outputs = _Outputs()

    if s["seeds"]:
        seeds = [int(x) for x in str(s["seeds"]).split(",")]
        if len(set(seeds)) != len(seeds):
            raise ValueError("split seeds must be unique")
        kind = "ensemble" if isinstance(model, EnsembleModel) else "linear"
        cfg = model.train_config if kind == "ensemble" else _train_config(s)
        n_members = model.n_members if kind == "ensemble" else 1
        reports = workflows.multi_seed_evaluation(
            raw, seeds, s["test_fraction"], kind, cfg,
            n_members=n_members, l2=s["l2"])
        agg = workflows.aggregate_reports(reports)
        table = workflows.format_aggregate_table(agg)
        doc = {
            "mode": "multi_seed", "kind": kind, "seeds": seeds,
            "test_fraction": s["test_fraction"],
            "metrics": {k: {"mean": v[0], "std": v[1]} for k, v in agg.items()},
            "per_split": [r.to_json_dict() for r in reports],
        }
    else:
        ds, _ = standardize(raw, model.norm_stats)
        report = metrics.evaluate(workflows.predictor(model), ds,
                                  threshold=s["threshold"], n_bins=s["n_bins"])
        table = workflows.format_report_table(report)
        doc = {"mode": "single", "metrics": report.to_json_dict()}

    outputs.add(os.path.join(out, "eval_report.json"), _json_text(doc))
    outputs.add(os.path.join(out, "eval_report.txt"), table + "\n")
    outputs.commit()
    print(table)
    return 0


def cmd_explain(args) -> int:
    defaults = {"data": None, "schema": None, "model": None, "out": ".",
                "n_grid": 25, "features": None, "row": None}
    s = _load_settings(args, defaults)
    schema, raw = _load_data(s)
    model = load_model(_require_file(s["model"], "model file"))
    if not isinstance(model, EnsembleModel):
        raise ValueError("explain requires an ensemble model")
    _check_fingerprint(model, schema)
    ds, _ = standardize(raw, model.norm_stats)

    if s["features"] is None:
        feature_names = list(schema.feature_names)
    else:
        feature_names = [f.strip() for f in str(s["features"]).split(",")]
        for f in feature_names:
            schema.index_of(f)  # raises listing valid names

    out = s["out"]
    os.makedirs(out, exist_ok=True)
    outputs = _Outputs()

    table = explain.global_importance(model, ds)
    rows = list(table.rows())
    outputs.add(os.path.join(out, "importance.csv"),
                _csv_text(["feature", "mean_weight", "std_weight"], rows))
    outputs.add(os.path.join(out, "importance.json"), _json_text({
        "sign_note": table.sign_note,
        "features": [{"name": n, "mean_weight": m, "std_weight": sd}
                     for n, m, sd in rows],
    }))

    for name in feature_names:
        i = schema.index_of(name)
        curve = explain.contribution_sweep(model, ds, i, n_grid=s["n_grid"])
        grid_raw = model.norm_stats.unstandardize_value(name, curve.grid)
        outputs.add(os.path.join(out, f"sweep_{name}.csv"), _csv_text(
            ["grid_raw", "grid_std", "phi_mean", "phi_std_members", "phi_std_rows"],
            zip(grid_raw.tolist(), curve.grid.tolist(), curve.phi.tolist(),
                curve.phi_std.tolist(), curve.phi_std_rows.tolist())))

    if s["row"] is not None:
        idx = int(s["row"])
        if not 0 <= idx < ds.n_rows:
            raise IndexError(f"row {idx} out of range for {ds.n_rows} rows")
        contribs = explain.instance_contributions(model, ds.X[idx])
        outputs.add(os.path.join(out, f"contributions_row{idx}.csv"),
                    _csv_text(["feature", "contribution", "std_members"], contribs))

    outputs.commit()
    print(f"wrote importance table and {len(feature_names)} sweep file(s) to {out}")
    return 0


def cmd_counterfactual(args) -> int:
    defaults = {"data": None, "schema": None, "model": None, "out": ".",
                "row": None, "feature": None, "grid": None,
                "grid_min": None, "grid_max": None, "grid_points": 10}
    s = _load_settings(args, defaults)
    schema, raw = _load_data(s)
    model = load_model(_require_file(s["model"], "model file"))
    if not isinstance(model, EnsembleModel):
        raise ValueError("counterfactual requires an ensemble model")
    _check_fingerprint(model, schema)
    ds, _ = standardize(raw, model.norm_stats)

    if s["row"] is None or s["feature"] is None:
        raise ValueError("counterfactual needs --row and --feature")
    idx = int(s["row"])
    if not 0 <= idx < ds.n_rows:
        raise IndexError(f"row {idx} out of range for {ds.n_rows} rows")
    fname = str(s["feature"])
    fi = schema.index_of(fname)

    if s["grid"] is not None:
        grid = np.array([float(v) for v in str(s["grid"]).split(",")])
    elif s["grid_min"] is not None and s["grid_max"] is not None:
        grid = np.linspace(float(s["grid_min"]), float(s["grid_max"]),
                           int(s["grid_points"]))
    else:
        raise ValueError("provide --grid or --grid-min/--grid-max")

    result = explain.counterfactual_sweep(model, ds.X[idx], fi, grid,
                                          model.norm_stats)
    out = s["out"]
    os.makedirs(out, exist_ok=True)
    stem = os.path.join(out, f"counterfactual_row{idx}_{fname}")
    outputs = _Outputs()
    outputs.add(f"{stem}.csv", _csv_text(
        ["grid_raw", "grid_std", "phi_mean", "phi_std_members", "prob_mean", "prob_std"],
        zip(result.grid_raw.tolist(), result.grid_std.tolist(),
            result.contribution.tolist(), result.contribution_std.tolist(),
            result.prob.tolist(), result.prob_std.tolist())))
    outputs.add(f"{stem}.json", _json_text({
        "row": idx, "feature": fname, "base_prob": result.base_prob,
        "flip_point": result.flip_point,
        "grid_raw": result.grid_raw.tolist(), "prob": result.prob.tolist(),
    }))
    outputs.commit()
    flip = "none" if result.flip_point is None else f"{result.flip_point:g}"
    print(f"base rejection prob {result.base_prob:.4f}; flip point: {flip}")
    print(f"wrote {stem}.csv")
    return 0


def cmd_predict(args) -> int:
    defaults = {"data": None, "schema": None, "model": None, "out": "."}
    s = _load_settings(args, defaults)
    schema, raw = _load_data(s)
    model = load_model(_require_file(s["model"], "model file"))
    _check_fingerprint(model, schema)
    ds, _ = standardize(raw, model.norm_stats)

    p = workflows.predictor(model)(ds.X)
    if isinstance(model, EnsembleModel):
        stds = ensemble.member_probs(model, ds.X).std(axis=0)
    else:
        stds = np.zeros_like(p)
    out = s["out"]
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "predictions.csv")
    outputs = _Outputs()
    outputs.add(path, _csv_text(["row", "reject_prob", "member_std"],
                                zip(range(len(p)), p.tolist(), stds.tolist())))
    outputs.commit()
    print(f"wrote {path} ({len(p)} rows, mean reject prob {p.mean():.4f})")
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperchoice",
        description="Personalized utility functions for accept/reject choices "
                    "via ensembles of hypernetworks.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-synth", help="generate a synthetic dataset with known ground truth")
    _add_common(p)
    p.add_argument("--stem", help="output file stem (default: synthetic)")
    for flag, typ in [("--n-rows", int), ("--n-features", int), ("--n-archetypes", int),
                      ("--noise", float), ("--seed", int), ("--cluster-spread", float),
                      ("--interaction-strength", float), ("--bias", float)]:
        p.add_argument(flag, type=typ, dest=flag[2:].replace("-", "_"))

    for name, fn in [("train", cmd_train), ("eval", cmd_eval)]:
        p = subs.add_parser(name, help=f"{name} a model")
        _add_common(p)
        p.add_argument("--data", help="CSV data file")
        p.add_argument("--schema", help="schema JSON file")
        p.add_argument("--baseline", action="store_const", const=True,
                       help="use the global linear baseline instead of the ensemble")
        p.add_argument("--m", type=int, help="number of ensemble members")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--lambda", type=float, dest="lambda",
                       help="L1/L2 mix of the weight penalty, in [0, 1]")
        p.add_argument("--alpha", type=float, help="overall weight-penalty scale")
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", type=int, dest="batch_size")
        p.add_argument("--learning-rate", type=float, dest="learning_rate")
        p.add_argument("--patience", type=int)
        p.add_argument("--validation-fraction", type=float, dest="validation_fraction")
        p.add_argument("--l2", type=float, help="L2 strength for the linear baseline")
        if name == "eval":
            p.add_argument("--model", help="model JSON file")
            p.add_argument("--seeds", help="comma list: retrain/evaluate per split seed")
            p.add_argument("--test-fraction", type=float, dest="test_fraction")
            p.add_argument("--n-bins", type=int, dest="n_bins")
            p.add_argument("--threshold", type=float)
        p.set_defaults(func=fn)

    p = subs.add_parser("explain", help="global importance and contribution sweeps")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--schema")
    p.add_argument("--model")
    p.add_argument("--n-grid", type=int, dest="n_grid")
    p.add_argument("--features", help="comma list of features to sweep (default all)")
    p.add_argument("--row", type=int, help="also emit per-feature contributions of this row")
    p.set_defaults(func=cmd_explain)

    p = subs.add_parser("counterfactual", help="sweep one record's feature over a raw grid")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--schema")
    p.add_argument("--model")
    p.add_argument("--row", type=int)
    p.add_argument("--feature")
    p.add_argument("--grid", help="comma list of raw-unit grid values (ascending)")
    p.add_argument("--grid-min", type=float, dest="grid_min")
    p.add_argument("--grid-max", type=float, dest="grid_max")
    p.add_argument("--grid-points", type=int, dest="grid_points")
    p.set_defaults(func=cmd_counterfactual)

    p = subs.add_parser("predict", help="rejection probabilities for a CSV of records")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--schema")
    p.add_argument("--model")
    p.set_defaults(func=cmd_predict)

    gen = subs.choices["gen-synth"]
    gen.set_defaults(func=cmd_gen_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
