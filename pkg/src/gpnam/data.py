"""Tabular data ingestion, standardization, kernel widths, splits.

CSV files are RFC-4180-style with a mandatory header row, UTF-8, ``.`` decimal
separator. Columns whose non-missing cells all parse as floats are numeric;
any other column is ordinal-encoded by first appearance. Rows with a missing
or unparseable cell are dropped and counted, never imputed.

Splits and synthetic data use ``numpy.random.default_rng`` (PCG64), so every
operation here is bit-reproducible from its seed.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyDataError, MissingColumnError, TargetClassError

TASK_REGRESSION = "regression"
TASK_CLASSIFICATION = "binary_classification"
TASKS = (TASK_REGRESSION, TASK_CLASSIFICATION)

# Cell values treated as missing (case-insensitive, after strip). Non-finite
# numerics count as missing so one stray "inf" drops a row instead of turning
# a numeric column ordinal.
MISSING_MARKERS = frozenset({"", "na", "n/a", "nan", "null", "?",
                             "inf", "+inf", "-inf", "infinity", "-infinity"})

#: Ground-truth shape functions cycled through by synth_additive.
SHAPE_FUNCTIONS = {
    "sin3": lambda t: np.sin(3.0 * t),
    "square": lambda t: np.square(t),
    "tanh2": lambda t: np.tanh(2.0 * t),
    "abs": np.abs,
    "identity": lambda t: np.asarray(t, dtype=np.float64),
}
SHAPE_CYCLE = ("sin3", "square", "tanh2", "abs", "identity")


@dataclass
class Dataset:
    """In-memory tabular dataset.

    ``X`` is an n x d float matrix, ``y`` the target (floats for regression,
    0/1 for classification). ``encodings`` records per-feature provenance:
    ``{"kind": "numeric"}`` or ``{"kind": "ordinal", "categories": [...]}``
    with categories in code order. ``standardization`` is ``(means, scales)``
    once ``standardize`` has run, else None.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    task: str
    encodings: list[dict]
    standardization: tuple[np.ndarray, np.ndarray] | None = None
    target_classes: list[str] | None = None
    ingest_report: dict | None = None
    shape_names: list[str] | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_MARKERS


def _parse_float(cell: str):
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    return header, rows


def _encode_columns(columns):
    """Encode feature columns (lists of non-missing string cells) to floats."""
    X = np.empty((len(columns[0]) if columns else 0, len(columns)))
    encodings = []
    for j, col in enumerate(columns):
        parsed = [_parse_float(cell) for cell in col]
        if all(v is not None for v in parsed):
            X[:, j] = parsed
            encodings.append({"kind": "numeric"})
        else:
            categories: list[str] = []
            codes = {}
            vals = np.empty(len(col))
            for i, cell in enumerate(col):
                key = cell.strip()
                if key not in codes:
                    codes[key] = len(categories)
                    categories.append(key)
                vals[i] = codes[key]
            X[:, j] = vals
            encodings.append({"kind": "ordinal", "categories": categories})
    return X, encodings


def _encode_target(cells, task):
    if task == TASK_REGRESSION:
        return np.array([_parse_float(c) for c in cells], dtype=np.float64), None
    distinct = sorted(set(c.strip() for c in cells), key=_class_sort_key)
    if len(distinct) != 2:
        raise TargetClassError(
            f"classification target must have exactly 2 distinct values, found {len(distinct)}")
    mapping = {distinct[0]: 0.0, distinct[1]: 1.0}
    return np.array([mapping[c.strip()] for c in cells]), distinct


def _class_sort_key(value: str):
    v = _parse_float(value)
    return (0, v, "") if v is not None else (1, 0.0, value)


def load_csv(path, target_column, task) -> Dataset:
    """Ingest a CSV file into a Dataset.

    Rows with any missing cell (or, for regression, an unparseable target)
    are dropped; the count lands in ``ingest_report``. The classification
    target must hold exactly two distinct values, mapped to {0, 1} in sorted
    order (numeric when both values parse, lexicographic otherwise).
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    header, rows = _read_rows(path)
    if target_column not in header:
        raise MissingColumnError(f"target column {target_column!r} not in header {header}")
    t_idx = header.index(target_column)
    feature_names = [h for h in header if h != target_column]
    f_idx = [i for i, h in enumerate(header) if h != target_column]

    rows_read = len(rows)
    kept = []
    for row in rows:
        if len(row) != len(header):
            continue
        if any(_is_missing(cell) for cell in row):
            continue
        if task == TASK_REGRESSION and _parse_float(row[t_idx]) is None:
            continue
        kept.append(row)
    if not kept:
        raise EmptyDataError(f"{path}: every row was dropped during ingestion")

    columns = [[row[i] for row in kept] for i in f_idx]
    X, encodings = _encode_columns(columns)
    y, target_classes = _encode_target([row[t_idx] for row in kept], task)

    report = {
        "rows_read": rows_read,
        "rows_dropped": rows_read - len(kept),
        "encodings": {name: enc["kind"] for name, enc in zip(feature_names, encodings)},
    }
    return Dataset(X=X, y=y, feature_names=feature_names, task=task,
                   encodings=encodings, target_classes=target_classes,
                   ingest_report=report)


def load_features(path, feature_names, encodings, target_column=None, task=None,
                  target_classes=None):
    """Read feature columns with a trained model's encodings.

    Returns ``(X, y, row_ids, report)`` where row_ids index the file's data
    rows (0-based) that survived; rows with missing cells, unparseable numeric
    cells, or categories unseen at training time are dropped. ``y`` is None
    unless ``target_column`` is given, in which case the target is parsed per
    ``task`` (classification labels must be among ``target_classes`` when
    those are known).
    """
    header, rows = _read_rows(path)
    missing = [nm for nm in feature_names if nm not in header]
    if missing:
        raise MissingColumnError(f"feature column(s) {missing} not in header {header}")
    idx = [header.index(nm) for nm in feature_names]
    t_idx = None
    if target_column is not None:
        if target_column not in header:
            raise MissingColumnError(f"target column {target_column!r} not in header {header}")
        t_idx = header.index(target_column)
    code_maps = []
    for enc in encodings:
        if enc["kind"] == "ordinal":
            code_maps.append({cat: float(k) for k, cat in enumerate(enc["categories"])})
        else:
            code_maps.append(None)

    X_rows, y_cells, row_ids = [], [], []
    for rid, row in enumerate(rows):
        if len(row) != len(header):
            continue
        if t_idx is not None and _is_missing(row[t_idx]):
            continue
        if t_idx is not None and task == TASK_REGRESSION and _parse_float(row[t_idx]) is None:
            continue
        vals = np.empty(len(idx))
        ok = True
        for j, (i, codes) in enumerate(zip(idx, code_maps)):
            cell = row[i]
            if _is_missing(cell):
                ok = False
                break
            if codes is None:
                v = _parse_float(cell)
                if v is None:
                    ok = False
                    break
                vals[j] = v
            else:
                key = cell.strip()
                if key not in codes:
                    ok = False
                    break
                vals[j] = codes[key]
        if ok:
            X_rows.append(vals)
            row_ids.append(rid)
            if t_idx is not None:
                y_cells.append(row[t_idx])
    if not X_rows:
        raise EmptyDataError(f"{path}: every row was dropped during ingestion")
    y = None
    if t_idx is not None:
        if task == TASK_REGRESSION:
            y = np.array([_parse_float(c) for c in y_cells], dtype=np.float64)
        elif target_classes is not None:
            mapping = {cls: float(k) for k, cls in enumerate(target_classes)}
            unseen = sorted(set(c.strip() for c in y_cells) - set(mapping))
            if unseen:
                raise TargetClassError(f"target value(s) {unseen} unseen at training time")
            y = np.array([mapping[c.strip()] for c in y_cells])
        else:
            y, _ = _encode_target(y_cells, task)
    report = {"rows_read": len(rows), "rows_dropped": len(rows) - len(X_rows)}
    return np.vstack(X_rows), y, np.array(row_ids, dtype=np.int64), report


def standardize(ds: Dataset) -> Dataset:
    """Center/scale each column to mean 0, population std 1.

    Constant columns keep scale 1 (with a warning). The (mean, scale) pairs
    are stored on the returned Dataset for exact inverse mapping.
    """
    if ds.standardization is not None:
        raise ValueError("dataset is already standardized")
    means = ds.X.mean(axis=0)
    scales = ds.X.std(axis=0)
    constant = scales == 0.0
    if np.any(constant):
        names = [ds.feature_names[i] for i in np.flatnonzero(constant)]
        warnings.warn(f"constant feature column(s) {names}: scale set to 1")
        scales = scales.copy()
        scales[constant] = 1.0
    X = (ds.X - means) / scales
    return replace(ds, X=X, standardization=(means, scales))


def destandardize(X_std, standardization):
    """Inverse of the affine standardization map."""
    means, scales = standardization
    return X_std * scales + means


def kernel_widths(ds: Dataset, scale_factor=1.0) -> np.ndarray:
    """Per-feature kernel widths b_i = scale_factor * std of the standardized
    column (so scale_factor itself for non-constant columns)."""
    if scale_factor <= 0:
        raise ValueError("scale_factor must be positive")
    if ds.standardization is None:
        raise ValueError("kernel widths require a standardized dataset")
    stds = ds.X.std(axis=0)
    b = scale_factor * stds
    b[stds == 0.0] = scale_factor
    return b


def split(ds: Dataset, fractions=(0.8, 0.1, 0.1), seed=0):
    """Deterministic train/val/test split.

    A seeded permutation is sliced contiguously. For classification the
    permutation is stratified: each class is shuffled separately and the
    classes are interleaved by within-class position, so any contiguous slice
    preserves class proportions to within one element per class.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("need three positive split fractions")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    n = ds.n
    rng = np.random.default_rng(int(seed))
    if ds.task == TASK_CLASSIFICATION:
        order = _stratified_order(ds.y, rng)
    else:
        order = rng.permutation(n)
    n_train = int(n * fractions[0])
    n_val = int(n * fractions[1])
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"split of {n} rows by {fractions} leaves an empty part")
    parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    return tuple(_take(ds, idx) for idx in parts)


def _stratified_order(y, rng):
    chunks, keys = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        chunks.append(idx)
        keys.append((np.arange(idx.size) + 0.5) / idx.size)
    order = np.concatenate(chunks)
    return order[np.argsort(np.concatenate(keys), kind="stable")]


def _take(ds: Dataset, idx) -> Dataset:
    return replace(ds, X=ds.X[idx], y=ds.y[idx], ingest_report=None)


def synth_additive(n, d, noise_sd, seed=0, shapes=None) -> Dataset:
    """Synthetic additive regression data with known ground truth.

    X ~ Uniform[-2, 2]^d and y = sum_i h_i(x_i) + N(0, noise_sd^2), where the
    h_i cycle through SHAPE_CYCLE by feature index (or take the given shape
    names). The shape names are stored for recovery experiments.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    if shapes is None:
        shapes = [SHAPE_CYCLE[i % len(SHAPE_CYCLE)] for i in range(d)]
    else:
        shapes = list(shapes)
        if len(shapes) != d:
            raise ValueError("need one shape name per feature")
        unknown = [s for s in shapes if s not in SHAPE_FUNCTIONS]
        if unknown:
            raise ValueError(f"unknown shape name(s) {unknown}")
    rng = np.random.default_rng(int(seed))
    X = rng.uniform(-2.0, 2.0, (int(n), int(d)))
    y = np.zeros(int(n))
    for i, name in enumerate(shapes):
        y += SHAPE_FUNCTIONS[name](X[:, i])
    y += rng.normal(0.0, noise_sd, int(n))
    names = [f"x{i + 1}" for i in range(d)]
    return Dataset(X=X, y=y, feature_names=names, task=TASK_REGRESSION,
                   encodings=[{"kind": "numeric"} for _ in range(d)],
                   shape_names=shapes)
