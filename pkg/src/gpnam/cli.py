"""Command-line interface.

Commands: train, predict, evaluate, shapes, kernel-check, synth. Outputs are
JSON (diagnostics, metrics) or CSV (predictions, shapes, synthetic data),
always written atomically; the resolved configuration is echoed into every
JSON output for provenance.

Exit codes: 0 success, 1 usage error, 2 data/model-file error,
3 solver did not converge (model still saved), 4 numeric breakdown.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import data as data_mod
from . import metrics as metrics_mod
from . import model as model_mod
from . import rff, solvers
from ._kernels import BACKEND
from .errors import DataError, ModelFileError, NumericBreakdownError, UndefinedMetricError
from .model import _atomic_write_text

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOT_CONVERGED = 3
EXIT_NUMERIC = 4

BANDWIDTH_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
KERNEL_CHECK_SIZES = (50, 100, 500, 2000)

_TASK_ALIASES = {"reg": data_mod.TASK_REGRESSION, "regression": data_mod.TASK_REGRESSION,
                 "clf": data_mod.TASK_CLASSIFICATION,
                 "binary_classification": data_mod.TASK_CLASSIFICATION}
_MODE_ALIASES = {"mc": rff.MODE_MONTE_CARLO, "monte_carlo": rff.MODE_MONTE_CARLO,
                 "grid": rff.MODE_GRID}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; usage errors are exit code 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


_DEFAULTS = {
    "data": None, "target": None, "task": None,
    "S": 100, "mode": "grid", "seed": 0,
    "bandwidth_scale": "1.0", "lam": 1.0,
    "split": "0.8,0.1,0.1",
    "model": None, "out": None,
    "grid_points": 256, "density_bins": 32,
    "interactions": None,
    "sgd_lr": 0.1, "sgd_batch": 256, "sgd_epochs": 100, "sgd_lr_decay": 0.99,
    "cg_tol": 1e-8,
    "n": 1000, "d": 3, "noise_sd": 0.1,
    "verbose": False,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="gpnam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("train", "fit a model on a CSV file and save it"),
            ("predict", "write predictions for a feature CSV"),
            ("evaluate", "compute metrics of a saved model on labeled data"),
            ("shapes", "export shape-function (and density) CSV files"),
            ("kernel-check", "run kernel-approximation diagnostics"),
            ("synth", "generate a synthetic additive dataset CSV")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--data", help="input CSV path")
        p.add_argument("--target", help="target column name")
        p.add_argument("--task", choices=sorted(_TASK_ALIASES), help="reg or clf")
        p.add_argument("--S", type=int, help="basis size (default 100)")
        p.add_argument("--mode", choices=sorted(_MODE_ALIASES), help="mc or grid")
        p.add_argument("--seed", type=int, help="random seed (default 0)")
        p.add_argument("--bandwidth-scale", dest="bandwidth_scale",
                       help="kernel width factor, or 'auto' for a validation grid search")
        p.add_argument("--lambda", dest="lam", type=float, help="L2 strength (default 1)")
        p.add_argument("--split", help="train,val,test fractions (default 0.8,0.1,0.1)")
        p.add_argument("--model", help="model file path")
        p.add_argument("--out", help="output file path")
        p.add_argument("--grid-points", dest="grid_points", type=int,
                       help="shape grid resolution (default 256)")
        p.add_argument("--density-bins", dest="density_bins", type=int,
                       help="histogram bins for shape densities (default 32)")
        p.add_argument("--interactions", help="pairwise terms as i:j,k:l feature indices")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--verbose", action="store_true", default=None)
        p.add_argument("--sgd-lr", dest="sgd_lr", type=float)
        p.add_argument("--sgd-batch", dest="sgd_batch", type=int)
        p.add_argument("--sgd-epochs", dest="sgd_epochs", type=int)
        p.add_argument("--sgd-lr-decay", dest="sgd_lr_decay", type=float)
        p.add_argument("--cg-tol", dest="cg_tol", type=float)
        p.add_argument("--n", type=int, help="synth: number of rows")
        p.add_argument("--d", type=int, help="synth: number of features")
        p.add_argument("--noise-sd", dest="noise_sd", type=float,
                       help="synth: noise standard deviation")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS)
    cfg["command"] = args.command
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        unknown = sorted(set(file_cfg) - set(_DEFAULTS))
        if unknown:
            raise UsageError(f"unknown config key(s) {unknown}")
        cfg.update(file_cfg)
    for key in _DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg["task"] is not None:
        if cfg["task"] not in _TASK_ALIASES:
            raise UsageError(f"task must be one of {sorted(_TASK_ALIASES)}")
        cfg["task"] = _TASK_ALIASES[cfg["task"]]
    if str(cfg["mode"]) not in _MODE_ALIASES:
        raise UsageError(f"mode must be one of {sorted(_MODE_ALIASES)}")
    cfg["mode"] = _MODE_ALIASES[str(cfg["mode"])]
    if cfg["S"] < 1:
        raise UsageError("--S must be >= 1")
    if cfg["grid_points"] < 2:
        raise UsageError("--grid-points must be >= 2")
    return cfg


def _parse_split(text):
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 3:
        raise UsageError("--split needs three comma-separated fractions")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise UsageError(f"bad split fractions {text!r}") from None


def _parse_interactions(text, d):
    if not text:
        return []
    pairs = []
    for item in str(text).split(","):
        try:
            i, j = (int(v) for v in item.split(":"))
        except ValueError:
            raise UsageError(f"bad interaction pair {item!r}; expected i:j") from None
        if not (0 <= i < d and 0 <= j < d) or i == j:
            raise UsageError(f"interaction pair {item!r} out of range for d={d}")
        pairs.append((min(i, j), max(i, j)))
    return sorted(set(pairs))


def _require(cfg, *keys):
    missing = [k for k in keys if not cfg.get(k)]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise UsageError(f"{cfg['command']} requires {flags}")


def _echo_config(cfg) -> dict:
    out = {k: cfg[k] for k in sorted(cfg)}
    out["backend"] = BACKEND
    return out


def _emit_json(doc, out_path=None):
    text = json.dumps(doc, indent=1, sort_keys=False) + "\n"
    if out_path:
        _atomic_write_text(out_path, text)
    else:
        sys.stdout.write(text)


def _fit_config(cfg):
    return solvers.FitConfig(lam=float(cfg["lam"]), cg_tol=float(cfg["cg_tol"]),
                             sgd_lr=float(cfg["sgd_lr"]), sgd_batch=int(cfg["sgd_batch"]),
                             sgd_epochs=int(cfg["sgd_epochs"]),
                             sgd_lr_decay=float(cfg["sgd_lr_decay"]),
                             seed=int(cfg["seed"]))


def _fit_once(basis, widths, train, val, task, cfg, pairs):
    feats = solvers.stack_features(basis, widths, train.X, pairs=pairs)
    fit_cfg = _fit_config(cfg)
    if task == data_mod.TASK_REGRESSION:
        w, report = solvers.solve_ridge_cg(feats, train.y, fit_cfg)
    else:
        val_feats = solvers.stack_features(basis, widths, val.X, pairs=pairs)
        w, report = solvers.fit_logistic_sgd(feats, train.y, fit_cfg,
                                             val_features=val_feats, val_y=val.y)
    return w, report, feats


def _assemble_model(basis, w, feats, widths, ds, train, factor, pairs):
    d, S = train.d, basis.S
    w0 = float(w[0])
    W = w[1:1 + d * S].reshape(d, S)
    interactions = []
    for k, (i, j) in enumerate(pairs):
        block = w[1 + d * S + k * S:1 + d * S + (k + 1) * S]
        interactions.append((i, j, np.array(block)))
    offsets = np.array([float(np.mean(feats.phi[:, feats.feature_block(i)] @ W[i]))
                        for i in range(d)])
    X_raw = data_mod.destandardize(train.X, ds.standardization)
    ranges = model_mod.training_ranges(X_raw)
    return model_mod.GPNAMModel(
        basis=basis, feature_names=ds.feature_names, task=ds.task, w0=w0, W=W,
        b=np.asarray(widths, dtype=np.float64), standardization=ds.standardization,
        centering_offsets=offsets, interactions=interactions, encodings=ds.encodings,
        feature_ranges=ranges, bandwidth_scale=factor)


def _val_metrics(mdl, ds, val, data_path, model_path):
    X_val = data_mod.destandardize(val.X, ds.standardization)
    preds = model_mod.predict(mdl, X_val)
    rows = []
    if ds.task == data_mod.TASK_REGRESSION:
        pairs = (("rmse", metrics_mod.rmse(preds, val.y)),
                 ("mse", metrics_mod.mse(preds, val.y)))
    else:
        pairs = (("auc", metrics_mod.auc(preds, val.y)),
                 ("error_rate", metrics_mod.error_rate(preds, val.y)))
    for name, value in pairs:
        rows.append({"metric": name, "value": value, "n": int(val.n),
                     "dataset": str(data_path), "model": str(model_path)})
    return rows


def cmd_train(cfg) -> int:
    _require(cfg, "data", "target", "task", "model")
    task = cfg["task"]
    ds = data_mod.load_csv(cfg["data"], cfg["target"], task)
    if cfg["verbose"]:
        print(json.dumps(ds.ingest_report), file=sys.stderr)
    ds = data_mod.standardize(ds)
    fractions = _parse_split(cfg["split"])
    train, val, test = data_mod.split(ds, fractions, seed=int(cfg["seed"]))
    pairs = _parse_interactions(cfg["interactions"], ds.d)
    basis = rff.build_basis(int(cfg["S"]), cfg["mode"], int(cfg["seed"]),
                            with_pairs=bool(pairs))

    bw = str(cfg["bandwidth_scale"]).strip().lower()
    searched = None
    if bw == "auto":
        searched = []
        best = None
        for factor in BANDWIDTH_GRID:
            widths = data_mod.kernel_widths(ds, factor)
            w_try, rep_try, feats_try = _fit_once(basis, widths, train, val, task, cfg, pairs)
            mdl_try = _assemble_model(basis, w_try, feats_try, widths, ds, train,
                                      factor, pairs)
            rows = _val_metrics(mdl_try, ds, val, cfg["data"], cfg["model"])
            score = rows[0]["value"]
            searched.append({"bandwidth_scale": factor, rows[0]["metric"]: score})
            better = (best is None or
                      (score < best[0] if task == data_mod.TASK_REGRESSION
                       else score > best[0]))
            if better:
                best = (score, factor)
        factor = best[1]
    else:
        try:
            factor = float(bw)
        except ValueError:
            raise UsageError(f"--bandwidth-scale must be a number or 'auto', got {bw!r}") from None
        if factor <= 0:
            raise UsageError("--bandwidth-scale must be positive")

    widths = data_mod.kernel_widths(ds, factor)
    w, report, feats = _fit_once(basis, widths, train, val, task, cfg, pairs)
    mdl = _assemble_model(basis, w, feats, widths, ds, train, factor, pairs)
    model_mod.save(mdl, cfg["model"])

    ok = report.converged or report.stopped_early
    doc = {
        "command": "train",
        "model": str(cfg["model"]),
        "task": task,
        "chosen_bandwidth_scale": factor,
        "bandwidth_search": searched,
        "split_sizes": {"train": int(train.n), "val": int(val.n), "test": int(test.n)},
        "solver": report.to_dict(),
        "validation": _val_metrics(mdl, ds, val, cfg["data"], cfg["model"]),
        "config": _echo_config(cfg),
    }
    _emit_json(doc, cfg.get("out"))
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _model_encodings(mdl):
    return mdl.encodings or [{"kind": "numeric"} for _ in range(mdl.d)]


def cmd_predict(cfg) -> int:
    _require(cfg, "data", "model")
    mdl = model_mod.load(cfg["model"])
    X, _, row_ids, report = data_mod.load_features(cfg["data"], mdl.feature_names,
                                                   _model_encodings(mdl))
    if cfg["verbose"]:
        if mdl.feature_ranges is not None:
            # extrapolation beyond the training range is allowed but flagged
            mins, maxs = mdl.feature_ranges
            outside = np.any((X < mins) | (X > maxs), axis=1)
            report["rows_outside_training_range"] = int(outside.sum())
        print(json.dumps(report), file=sys.stderr)
    preds = model_mod.predict(mdl, X)
    lines = ["row_id,prediction"]
    lines.extend(f"{rid},{float(p)!r}" for rid, p in zip(row_ids, preds))
    text = "\n".join(lines) + "\n"
    if cfg.get("out"):
        _atomic_write_text(cfg["out"], text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(cfg) -> int:
    _require(cfg, "data", "model", "target")
    mdl = model_mod.load(cfg["model"])
    X, y, _, report = data_mod.load_features(cfg["data"], mdl.feature_names,
                                             _model_encodings(mdl),
                                             target_column=cfg["target"], task=mdl.task)
    if cfg["verbose"]:
        print(json.dumps(report), file=sys.stderr)
    preds = model_mod.predict(mdl, X)
    rows = []
    if mdl.task == data_mod.TASK_REGRESSION:
        pairs = (("mse", metrics_mod.mse(preds, y)), ("rmse", metrics_mod.rmse(preds, y)))
    else:
        pairs = (("auc", metrics_mod.auc(preds, y)),
                 ("error_rate", metrics_mod.error_rate(preds, y)))
    for name, value in pairs:
        rows.append({"metric": name, "value": value, "n": int(y.shape[0]),
                     "dataset": str(cfg["data"]), "model": str(cfg["model"])})
    _emit_json({"command": "evaluate", "metrics": rows, "config": _echo_config(cfg)},
               cfg.get("out"))
    return EXIT_OK


def cmd_shapes(cfg) -> int:
    _require(cfg, "model", "out")
    mdl = model_mod.load(cfg["model"])
    points = int(cfg["grid_points"])
    X_data = None
    if cfg.get("data"):
        X_data, _, _, _ = data_mod.load_features(cfg["data"], mdl.feature_names,
                                                 _model_encodings(mdl))
    if mdl.feature_ranges is not None:
        mins, maxs = mdl.feature_ranges
    elif X_data is not None:
        mins, maxs = model_mod.training_ranges(X_data)
    else:
        raise UsageError("model stores no feature ranges; pass --data")

    tables = []
    for i in range(mdl.d):
        grid = np.linspace(mins[i], maxs[i], points)
        tables.append(model_mod.shape_function(mdl, i, grid, centered=True))
    model_mod.write_shape_csv(tables, cfg["out"])

    if X_data is not None:
        bins = int(cfg["density_bins"])
        lines = ["feature,bin_left,bin_right,count"]
        for i, name in enumerate(mdl.feature_names):
            counts, edges = np.histogram(X_data[:, i], bins=bins)
            for k in range(bins):
                lines.append(f"{name},{edges[k]:.9g},{edges[k + 1]:.9g},{int(counts[k])}")
        _atomic_write_text(_density_path(cfg["out"]), "\n".join(lines) + "\n")
    return EXIT_OK


def _density_path(out_path: str) -> str:
    stem, dot, ext = str(out_path).rpartition(".")
    return f"{stem}_density.{ext}" if dot else f"{out_path}_density"


def cmd_kernel_check(cfg) -> int:
    seed = int(cfg["seed"])
    rng = np.random.default_rng(seed)
    pairs = rng.uniform(-3.0, 3.0, (100, 2))
    b = 1.0
    approx_rows = []
    self_rows = []
    for S in KERNEL_CHECK_SIZES:
        for mode in (rff.MODE_GRID, rff.MODE_MONTE_CARLO):
            basis = rff.build_basis(S, mode, seed)
            errs = np.array([abs(rff.approx_kernel(basis, x, xp, b) - rff.rbf_kernel(x, xp, b))
                             for x, xp in pairs])
            approx_rows.append({"S": S, "mode": mode,
                                "max_abs_err": float(errs.max()),
                                "median_abs_err": float(np.median(errs))})
            if mode == rff.MODE_GRID:
                self_errs = np.array([abs(rff.approx_kernel(basis, x, x, b) - 1.0)
                                      for x, _ in pairs])
                self_rows.append({"S": S, "max_abs_err": float(self_errs.max())})
    ident_rows = []
    for x, xp in ((0.0, 0.0), (0.0, 1.0), (0.0, 2.0)):
        est = rff.mc_verify_integral_identity(b, x, xp, 200_000, seed)
        exact = rff.rbf_kernel(x, xp, b)
        ident_rows.append({"x": x, "x_prime": xp, "n_samples": 200_000,
                           "estimate": est, "exact": exact,
                           "abs_err": abs(est - exact)})
    doc = {
        "command": "kernel-check",
        "probes": {"n_pairs": 100, "low": -3.0, "high": 3.0, "b": b, "seed": seed},
        "approximation": approx_rows,
        "grid_self_consistency": self_rows,
        "integral_identity": ident_rows,
        "config": _echo_config(cfg),
    }
    _emit_json(doc, cfg.get("out"))
    return EXIT_OK


def cmd_synth(cfg) -> int:
    _require(cfg, "out")
    ds = data_mod.synth_additive(int(cfg["n"]), int(cfg["d"]),
                                 float(cfg["noise_sd"]), seed=int(cfg["seed"]))
    lines = [",".join(ds.feature_names + ["y"])]
    for i in range(ds.n):
        cells = [repr(float(v)) for v in ds.X[i]] + [repr(float(ds.y[i]))]
        lines.append(",".join(cells))
    _atomic_write_text(cfg["out"], "\n".join(lines) + "\n")
    if cfg["verbose"]:
        print(json.dumps({"n": ds.n, "d": ds.d, "shapes": ds.shape_names}),
              file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "shapes": cmd_shapes,
    "kernel-check": cmd_kernel_check,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
        return _COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        print(f"gpnam: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"gpnam: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericBreakdownError as exc:
        print(f"gpnam: numeric breakdown: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ModelFileError, UndefinedMetricError) as exc:
        print(f"gpnam: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"gpnam: i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
