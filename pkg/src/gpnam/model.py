"""Trained additive model: prediction, shape functions, persistence.

The model file is versioned JSON with explicit field names; reals serialize
at full round-trip precision (Python repr), so save/load reproduces every
parameter bit-exactly. The RFF basis is not stored verbatim - it is rebuilt
from (S, mode, seed), which the basis construction guarantees to be
bit-reproducible.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import MalformedModelError, ModelInvariantError, SchemaVersionError
from .rff import MODES, FeatureBasis, build_basis, feature_map, pair_feature_map
from .solvers import sigmoid, stack_features

SCHEMA_VERSION = 1

TASK_REGRESSION = "regression"
TASK_CLASSIFICATION = "binary_classification"


@dataclass
class GPNAMModel:
    """Additive model g(x) = w0 + sum_i phi(x_i)^T W[i] over standardized
    inputs, with optional pairwise interaction terms.

    ``standardization`` is the (means, scales) pair applied to raw inputs
    before featurization. ``centering_offsets`` holds the training-set mean of
    each shape function; subtracting them (and adding their sum to the bias)
    leaves predictions unchanged and is how shape functions are exported.
    """

    basis: FeatureBasis
    feature_names: list[str]
    task: str
    w0: float
    W: np.ndarray
    b: np.ndarray
    standardization: tuple[np.ndarray, np.ndarray]
    centering_offsets: np.ndarray
    interactions: list[tuple[int, int, np.ndarray]] = field(default_factory=list)
    encodings: list[dict] | None = None
    feature_ranges: tuple[np.ndarray, np.ndarray] | None = None
    bandwidth_scale: float | None = None

    def __post_init__(self):
        d = len(self.feature_names)
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.centering_offsets = np.asarray(self.centering_offsets, dtype=np.float64)
        if self.W.shape != (d, self.basis.S):
            raise ModelInvariantError(f"W must be {d} x {self.basis.S}, got {self.W.shape}")
        if self.b.shape != (d,):
            raise ModelInvariantError("need one kernel width per feature")
        if np.any(self.b <= 0) or not np.all(np.isfinite(self.b)):
            raise ModelInvariantError("kernel widths must be positive and finite")
        if self.centering_offsets.shape != (d,):
            raise ModelInvariantError("need one centering offset per feature")
        if self.task not in (TASK_REGRESSION, TASK_CLASSIFICATION):
            raise ModelInvariantError(f"unknown task {self.task!r}")
        for (i, j, wij) in self.interactions:
            if not (0 <= i < d and 0 <= j < d) or i == j:
                raise ModelInvariantError(f"interaction pair ({i}, {j}) out of range")
            if np.asarray(wij).shape != (self.basis.S,):
                raise ModelInvariantError("interaction weights must have length S")

    @property
    def d(self) -> int:
        return len(self.feature_names)

    @property
    def S(self) -> int:
        return self.basis.S


@dataclass(frozen=True)
class ShapeTable:
    """Per-feature shape function sampled on a grid in original units."""

    feature_index: int
    feature_name: str
    grid: np.ndarray
    values: np.ndarray
    offset: float


def _standardize_rows(model: GPNAMModel, X):
    means, scales = model.standardization
    return (np.asarray(X, dtype=np.float64) - means) / scales


def weights_vector(model: GPNAMModel) -> np.ndarray:
    """Stacked weight vector [w0, W rows, interaction weights]."""
    parts = [np.array([model.w0]), model.W.ravel()]
    parts.extend(np.asarray(wij, dtype=np.float64) for (_, _, wij) in model.interactions)
    return np.concatenate(parts)


def predict_raw(model: GPNAMModel, x) -> float:
    """Additive score g(x) for one raw-unit input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d,):
        raise ValueError(f"expected a vector of length {model.d}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite entries")
    xs = _standardize_rows(model, x)
    g = model.w0
    for i in range(model.d):
        g += float(feature_map(model.basis, xs[i], model.b[i]) @ model.W[i])
    for (i, j, wij) in model.interactions:
        b_ij = math.sqrt(model.b[i] * model.b[j])
        g += float(pair_feature_map(model.basis, xs[i], xs[j], b_ij) @ wij)
    return float(g)


def predict(model: GPNAMModel, X) -> np.ndarray:
    """Batched prediction on an n x d raw-unit matrix.

    Regression returns g(x); classification returns sigmoid(g(x)).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ValueError(f"expected an n x {model.d} matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite entries")
    xs = _standardize_rows(model, X)
    pairs = [(i, j) for (i, j, _) in model.interactions]
    feats = stack_features(model.basis, model.b, xs, pairs=pairs)
    g = feats.phi @ weights_vector(model)
    return sigmoid(g) if model.task == TASK_CLASSIFICATION else g


def shape_function(model: GPNAMModel, i, grid, centered=True) -> ShapeTable:
    """Evaluate shape function f_i over a grid given in original units.

    With ``centered`` the stored training-mean offset is subtracted (and
    reported), so exported curves average to zero over the training data.
    """
    if not 0 <= i < model.d:
        raise ValueError(f"feature index {i} out of range for d={model.d}")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1:
        raise ValueError("grid must be one-dimensional")
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid contains non-finite entries")
    means, scales = model.standardization
    gs = (grid - means[i]) / scales[i]
    phi = _kernels.featurize(gs[:, None], model.basis.z, model.basis.c,
                             np.array([model.b[i]]))[:, 1:]
    values = phi @ model.W[i]
    offset = float(model.centering_offsets[i]) if centered else 0.0
    return ShapeTable(feature_index=int(i), feature_name=model.feature_names[i],
                      grid=grid.copy(), values=values - offset, offset=offset)


def param_count(model: GPNAMModel) -> int:
    """Trainable-parameter count: S*d + 1, plus S per interaction term."""
    return model.S * model.d + 1 + model.S * len(model.interactions)


def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save(model: GPNAMModel, path) -> None:
    """Serialize the model to versioned JSON (atomically)."""
    means, scales = model.standardization
    doc = {
        "schema_version": SCHEMA_VERSION,
        "task": model.task,
        "S": model.S,
        "mode": model.basis.mode,
        "seed": model.basis.seed,
        "d": model.d,
        "feature_names": list(model.feature_names),
        "standardization": {"means": means.tolist(), "scales": scales.tolist()},
        "b": model.b.tolist(),
        "w0": model.w0,
        "W": model.W.tolist(),
        "centering_offsets": model.centering_offsets.tolist(),
        "interactions": [{"i": i, "j": j, "w": np.asarray(w).tolist()}
                         for (i, j, w) in model.interactions] or None,
        "encodings": model.encodings,
        "feature_ranges": None if model.feature_ranges is None else {
            "mins": model.feature_ranges[0].tolist(),
            "maxs": model.feature_ranges[1].tolist(),
        },
        "bandwidth_scale": model.bandwidth_scale,
    }
    _atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


_REQUIRED_FIELDS = ("schema_version", "task", "S", "mode", "seed", "d",
                    "feature_names", "standardization", "b", "w0", "W",
                    "centering_offsets")


def load(path) -> GPNAMModel:
    """Load and validate a model file saved by :func:`save`."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedModelError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise MalformedModelError(f"{path}: expected a JSON object")
    missing = [k for k in _REQUIRED_FIELDS if k not in doc]
    if missing:
        raise MalformedModelError(f"{path}: missing field(s) {missing}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{path}: schema version {doc['schema_version']!r} unsupported "
            f"(expected {SCHEMA_VERSION})")
    if doc["mode"] not in MODES:
        raise ModelInvariantError(f"{path}: unknown basis mode {doc['mode']!r}")
    try:
        S = int(doc["S"])
        d = int(doc["d"])
        feature_names = [str(v) for v in doc["feature_names"]]
        means = np.asarray(doc["standardization"]["means"], dtype=np.float64)
        scales = np.asarray(doc["standardization"]["scales"], dtype=np.float64)
        b = np.asarray(doc["b"], dtype=np.float64)
        w0 = float(doc["w0"])
        W = np.asarray(doc["W"], dtype=np.float64)
        offsets = np.asarray(doc["centering_offsets"], dtype=np.float64)
        raw_inter = doc.get("interactions") or []
        interactions = [(int(e["i"]), int(e["j"]), np.asarray(e["w"], dtype=np.float64))
                        for e in raw_inter]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedModelError(f"{path}: malformed field ({exc})") from None
    if S < 1:
        raise ModelInvariantError(f"{path}: S must be >= 1")
    if len(feature_names) != d:
        raise ModelInvariantError(f"{path}: d={d} but {len(feature_names)} feature names")
    if means.shape != (d,) or scales.shape != (d,):
        raise ModelInvariantError(f"{path}: standardization arrays must have length d")
    if np.any(scales == 0) or not np.all(np.isfinite(scales)):
        raise ModelInvariantError(f"{path}: standardization scales must be finite and nonzero")
    if W.shape != (d, S):
        raise ModelInvariantError(f"{path}: W must be d x S")

    basis = build_basis(S, doc["mode"], int(doc["seed"]), with_pairs=bool(interactions))
    ranges = None
    if doc.get("feature_ranges"):
        ranges = (np.asarray(doc["feature_ranges"]["mins"], dtype=np.float64),
                  np.asarray(doc["feature_ranges"]["maxs"], dtype=np.float64))
    bw = doc.get("bandwidth_scale")
    return GPNAMModel(basis=basis, feature_names=feature_names, task=doc["task"],
                      w0=w0, W=W, b=b, standardization=(means, scales),
                      centering_offsets=offsets, interactions=interactions,
                      encodings=doc.get("encodings"), feature_ranges=ranges,
                      bandwidth_scale=None if bw is None else float(bw))


def default_shape_grid(model: GPNAMModel, i, points=256) -> np.ndarray:
    """Evenly spaced grid over feature i's observed training range."""
    if model.feature_ranges is None:
        raise ValueError("model stores no feature ranges; supply a grid or data")
    if points < 2:
        raise ValueError("need at least 2 grid points")
    mins, maxs = model.feature_ranges
    return np.linspace(mins[i], maxs[i], int(points))


def write_shape_csv(tables, path) -> None:
    """Concatenated shape-function export: header feature,x,f with reals at
    9 significant digits, UTF-8, LF line endings."""
    lines = ["feature,x,f"]
    for t in tables:
        for x, v in zip(t.grid, t.values):
            lines.append(f"{t.feature_name},{x:.9g},{v:.9g}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def training_ranges(X_raw) -> tuple[np.ndarray, np.ndarray]:
    """Per-column (min, max) of a raw-unit training matrix."""
    X_raw = np.asarray(X_raw, dtype=np.float64)
    return X_raw.min(axis=0), X_raw.max(axis=0)
