"""File formats and featurization for the command-line surface.

CSV files are plain comma-separated numerics with an optional single header
row (auto-detected).  Data files are row-per-sample and get transposed into
the internal column-per-sample layout.  Floats are written with their
shortest round-trip decimal form, so ingest(emit(M)) is bit-exact.  All
writers go through a temp-file-plus-rename so readers never see partial
output.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .core import DataMatrix, Labels, NetMeta, ShapeError, TwoLayerNet

MODEL_SCHEMA_VERSION = 1


class ParseError(ValueError):
    """A file failed to parse; carries the 1-based offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def format_float(x: float) -> str:
    return repr(float(x))


def atomic_write_text(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_rows(path: str) -> list[list[float]]:
    rows: list[list[float]] = []
    width = None
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    start = 0
    if lines:
        cells = [c.strip() for c in lines[0].split(",")]
        try:
            [float(c) for c in cells]
        except ValueError:
            start = 1  # single header row
    for lineno in range(start, len(lines)):
        raw = lines[lineno].strip()
        if raw == "":
            if lineno == len(lines) - 1:
                continue
            raise ParseError("blank line inside data", line=lineno + 1)
        cells = raw.split(",")
        try:
            values = [float(c.strip()) for c in cells]
        except ValueError as exc:
            raise ParseError(f"non-numeric cell ({exc})", line=lineno + 1) from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ParseError(f"expected {width} columns, found {len(values)}",
                             line=lineno + 1)
        rows.append(values)
    if not rows:
        raise ParseError("no data rows", line=1)
    return rows


def ingest_csv(path: str) -> DataMatrix:
    """Read a row-per-sample CSV into the internal d x n layout."""
    rows = _parse_rows(path)
    return DataMatrix(np.array(rows, dtype=float).T)


def read_labels_csv(path: str) -> Labels:
    rows = _parse_rows(path)
    arr = np.array(rows, dtype=float)
    if arr.shape[1] != 1:
        raise ParseError(f"labels file must have one column, found {arr.shape[1]}")
    return Labels(arr[:, 0])


def read_series_csv(path: str) -> np.ndarray:
    rows = _parse_rows(path)
    arr = np.array(rows, dtype=float)
    if arr.shape[1] != 1:
        raise ParseError(f"series file must have one column, found {arr.shape[1]}")
    return arr[:, 0]


def emit_csv(path: str, array: np.ndarray, header: list[str] | None = None):
    """Write a 1-D column or a row-per-sample 2-D array."""
    arr = np.asarray(array, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    lines = []
    if header is not None:
        lines.append(",".join(header))
    for row in arr:
        lines.append(",".join(format_float(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def emit_data_csv(path: str, X: DataMatrix):
    emit_csv(path, X.entries.T)


@dataclass(frozen=True)
class SeriesSpec:
    """A series file plus the lag order and chronological split fraction."""

    path: str
    lags: int
    split: float

    def __post_init__(self):
        if self.lags < 1:
            raise ValueError("need at least one lag")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split fraction must be in (0, 1)")

    def load(self) -> np.ndarray:
        return read_series_csv(self.path)

    def featurize(self):
        return make_autoregressive(self.load(), self.lags, self.split)


def make_autoregressive(series: np.ndarray, lags: int, split: float):
    """Lagged features with a chronological train/test split.

    Sample t (for t = lags .. len-1) has features
    ``(s[t-1], ..., s[t-lags])`` and label ``s[t]``; the first
    ``floor(split * k)`` of the k usable samples train, the rest test, no
    shuffling.
    """
    series = np.asarray(series, dtype=float)
    if lags < 1:
        raise ValueError("need at least one lag")
    if not 0.0 < split < 1.0:
        raise ValueError("split fraction must be in (0, 1)")
    k = series.size - lags
    if k < 1:
        raise ShapeError(f"series of length {series.size} is too short for {lags} lags")
    feats = np.empty((lags, k))
    for ell in range(1, lags + 1):
        feats[ell - 1, :] = series[lags - ell:series.size - ell]
    labels = series[lags:]
    n_train = int(np.floor(split * k))
    X_train = DataMatrix(feats[:, :n_train]) if n_train else None
    X_test = DataMatrix(feats[:, n_train:]) if n_train < k else None
    y_train = Labels(labels[:n_train]) if n_train else None
    y_test = Labels(labels[n_train:]) if n_train < k else None
    return X_train, y_train, X_test, y_test


def synthetic_ecg(length: int, seed: int = 0, noise: float = 0.01) -> np.ndarray:
    """Quasi-periodic spiky series for autoregression experiments.

    A narrow pulse rides on a slow oscillation; the cycle length drifts, so
    the signal never repeats exactly.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=float)
    period = 24.0 + 3.0 * np.sin(2.0 * np.pi * t / 311.0)
    phase = np.cumsum(2.0 * np.pi / period)
    pulse = np.exp(6.0 * (np.cos(phase) - 1.0))
    baseline = 0.22 * np.sin(0.5 * phase + 0.7) + 0.08 * np.sin(2.0 * np.pi * t / 97.0)
    return 1.4 * pulse + baseline + noise * rng.standard_normal(length)


def _net_to_dict(net: TwoLayerNet, extra_provenance: dict | None = None) -> dict:
    meta = net.meta
    provenance = {
        "method": meta.method,
        "beta": meta.beta,
        "lambda": meta.lam,
        "seed": meta.seed,
        "pattern_count": meta.pattern_count,
        "duality_gap": meta.duality_gap,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    if meta.flags:
        provenance["flags"] = list(meta.flags)
    if extra_provenance:
        provenance.update(extra_provenance)
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "d": net.d,
        "m": net.m,
        "has_bias": net.bias is not None,
        "W": [[float(v) for v in net.W[:, j]] for j in range(net.m)],
        "bias": None if net.bias is None else [float(v) for v in net.bias],
        "alpha": [float(v) for v in net.alpha],
        "provenance": provenance,
    }


def save_model(path: str, net: TwoLayerNet, extra_provenance: dict | None = None):
    atomic_write_text(path, json.dumps(_net_to_dict(net, extra_provenance), indent=2) + "\n")


def load_model(path: str) -> TwoLayerNet:
    with open(path, "r") as fh:
        obj = json.load(fh)
    if obj.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ParseError(f"unsupported model schema {obj.get('schema_version')!r}")
    d, m = int(obj["d"]), int(obj["m"])
    W = np.zeros((d, m))
    for j, col in enumerate(obj["W"]):
        W[:, j] = col
    bias = None if obj["bias"] is None else np.asarray(obj["bias"], dtype=float)
    alpha = np.asarray(obj["alpha"], dtype=float)
    prov = obj.get("provenance", {})
    meta = NetMeta(method=prov.get("method", "loaded"),
                   beta=prov.get("beta"), lam=prov.get("lambda"),
                   seed=prov.get("seed"), pattern_count=prov.get("pattern_count"),
                   duality_gap=prov.get("duality_gap"),
                   flags=tuple(prov.get("flags", ())))
    return TwoLayerNet(W, bias, alpha, meta)
