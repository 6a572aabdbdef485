"""Activation patterns of a data matrix: exact enumeration and sampling.

A weight vector ``w`` splits the samples into active and inactive halves
through the indicator ``1{X^T w >= 0}`` (ties count as active).  This module
enumerates the full set of realizable patterns exactly at desk scale, samples
it with a reproducible counter-based Gaussian stream at any scale, and exposes
the polyhedral chamber attached to each pattern.

Exact enumeration routes:

* ``d <= 2``: an angular sweep over the ``2n`` candidate normals.  Boundary
  patterns are picked up by evaluating at the exact perpendiculars of the data
  columns, where the relevant inner products cancel exactly in floating point.
* ``d >= 3`` (``n <= 16``): per-candidate feasibility LPs over all ``2^n``
  sign vectors, maximizing a separation margin on the inactive side.

All functions are pure; sampling is reproducible independent of evaluation
order because draw ``i`` comes from a counter-based stream keyed by
``(seed, i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import (
    ActivationPattern,
    PatternSet,
    ScaleLimitError,
    ShapeError,
    as_data_matrix,
)

_LP_MAX_SAMPLES = 16
_MARGIN_EPS = 1e-9
_SAMPLE_STREAM_STRIDE = 1024


@dataclass(frozen=True, eq=False)
class ArrangementReport:
    """Outcome of a pattern search.

    ``bound`` is the theoretical cap ``2 r (e (n - 1) / r)^r`` on the number
    of realizable patterns, with ``r`` the numerical rank of the data (small-n
    edge cases pinned in :func:`pattern_count_bound`).  ``witnesses`` aligns
    with ``patterns.patterns``: each entry is a weight vector realizing its
    pattern (the zero vector realizes the all-ones pattern when nothing else
    does).
    """

    patterns: PatternSet
    method: str
    samples_drawn: int
    seed: int | None
    bound: float
    witnesses: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if self.method not in ("exact-lp", "exact-2d", "sampled"):
            raise ValueError(f"unknown method tag {self.method!r}")
        if self.method == "sampled" and self.seed is None:
            raise ValueError("sampled reports must record their seed")
        if len(self.patterns) > self.bound + 1e-9:
            raise ValueError("pattern count exceeds the theoretical bound")
        if self.witnesses is not None and len(self.witnesses) != len(self.patterns):
            raise ShapeError("witnesses must align with patterns")


def pattern_of(X, w) -> ActivationPattern:
    """The activation pattern ``1{X^T w >= 0}`` induced by weight vector w."""
    X = as_data_matrix(X)
    w = np.asarray(w, dtype=float)
    if w.shape != (X.d,):
        raise ShapeError(f"weight must have shape ({X.d},), got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weight vector must be finite")
    bits = X.entries.T @ w >= 0.0
    return ActivationPattern(tuple(int(b) for b in bits))


def numerical_rank(X) -> int:
    """Rank of the data matrix with the usual SVD threshold."""
    X = as_data_matrix(X)
    s = np.linalg.svd(X.entries, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    thresh = max(X.d, X.n) * np.finfo(float).eps * s[0]
    return int(np.sum(s > thresh))


def pattern_count_bound(X) -> float:
    """Upper bound ``2 r (e (n - 1) / r)^r`` on the number of patterns.

    The printed formula degenerates for tiny inputs, so the exact small cases
    are pinned directly: a rank-0 matrix realizes only the all-ones pattern,
    and a single sample realizes at most two sign patterns.
    """
    X = as_data_matrix(X)
    r = numerical_rank(X)
    if r == 0:
        return 1.0
    if X.n == 1:
        return 2.0
    return 2.0 * r * (np.e * (X.n - 1) / r) ** r


def chamber_constraints(X, h: ActivationPattern) -> np.ndarray:
    """The n x d matrix ``(2 diag(h) - I) X^T`` whose nonnegativity cuts out
    the closed chamber of weights inducing pattern h."""
    X = as_data_matrix(X)
    if h.n != X.n:
        raise ShapeError(f"pattern has {h.n} bits, data has {X.n} samples")
    signs = 2.0 * h.as_array() - 1.0
    return signs[:, None] * X.entries.T


def _dedup_with_witness(bits_by_col: np.ndarray, weights: np.ndarray):
    """First-seen dedup of pattern columns; returns {bits: witness_index}."""
    seen: dict[tuple[int, ...], int] = {}
    for i in range(bits_by_col.shape[1]):
        key = tuple(int(b) for b in bits_by_col[:, i])
        if key not in seen:
            seen[key] = i
    return seen


def _finish_report(X, found: dict[tuple[int, ...], np.ndarray], method: str,
                   samples_drawn: int, seed: int | None) -> ArrangementReport:
    keep = {bits: w for bits, w in found.items() if any(bits)}
    order = sorted(keep)
    patterns = PatternSet(tuple(ActivationPattern(b) for b in order))
    witnesses = tuple(np.array(keep[b], dtype=float) for b in order)
    return ArrangementReport(patterns=patterns, method=method,
                             samples_drawn=samples_drawn, seed=seed,
                             bound=pattern_count_bound(X), witnesses=witnesses)


def _enumerate_low_dim(X) -> ArrangementReport:
    """Exact enumeration for d in {1, 2} via candidate directions.

    Candidates are the exact perpendiculars of each data column (both signs),
    midpoints of the angular arcs between them, and the zero vector (which
    realizes the all-ones pattern).  Evaluating at the perpendicular of a
    column makes every inner product with a parallel column cancel exactly,
    so boundary patterns come out right without tolerance tuning.
    """
    X = as_data_matrix(X)
    d = X.d
    cands: list[np.ndarray] = []
    if d == 1:
        cands = [np.array([1.0]), np.array([-1.0])]
    else:
        for i in range(X.n):
            x = X.entries[:, i]
            if x[0] == 0.0 and x[1] == 0.0:
                continue
            cands.append(np.array([-x[1], x[0]]))
            cands.append(np.array([x[1], -x[0]]))
        if cands:
            angles = np.sort(np.array([np.arctan2(c[1], c[0]) for c in cands]))
            arcs = np.append(angles, angles[0] + 2.0 * np.pi)
            mids = (arcs[:-1] + arcs[1:]) / 2.0
            cands.extend(np.array([np.cos(t), np.sin(t)]) for t in mids)
    found: dict[tuple[int, ...], np.ndarray] = {}
    for w in cands:
        p = pattern_of(X, w)
        found.setdefault(p.bits, w)
    found.setdefault((1,) * X.n, np.zeros(d))
    return _finish_report(X, found, "exact-2d", 0, None)


def _margin_lp(X, bits: tuple[int, ...]):
    """Maximize the normalized margin on the inactive side of a sign vector.

    Returns ``(margin, w)``; the pattern is realizable with strict negatives
    on its zero bits iff the margin is positive.
    """
    Xe = as_data_matrix(X).entries
    d, n = Xe.shape
    norms = np.linalg.norm(Xe, axis=0)
    rows = []
    rhs = []
    for i in range(n):
        if norms[i] == 0.0:
            continue  # zero sample: always on the active side
        if bits[i]:
            rows.append(np.append(-Xe[:, i], 0.0))
        else:
            rows.append(np.append(Xe[:, i], norms[i]))
        rhs.append(0.0)
    c = np.zeros(d + 1)
    c[-1] = -1.0  # maximize t
    bounds = [(-1.0, 1.0)] * d + [(0.0, 1e3)]
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds,
                  method="highs")
    if not res.success:
        return 0.0, None
    return float(res.x[-1]), res.x[:-1].copy()


def _enumerate_lp(X) -> ArrangementReport:
    X = as_data_matrix(X)
    if X.n > _LP_MAX_SAMPLES:
        raise ScaleLimitError(
            f"exact enumeration supports n <= {_LP_MAX_SAMPLES} for d >= 3 (got n={X.n})")
    n = X.n
    col_norms = np.linalg.norm(X.entries, axis=0)
    zero_cols = col_norms == 0.0

    # Vectorized presampling knocks out most realizable candidates cheaply.
    rng = np.random.default_rng(0)
    draws = min(40_000, 400 * 2 ** n)
    W = rng.standard_normal((X.d, draws))
    B = (X.entries.T @ W) >= 0.0
    seen = _dedup_with_witness(B, W)
    found: dict[tuple[int, ...], np.ndarray] = {bits: W[:, i] for bits, i in seen.items()}
    found.setdefault((1,) * n, np.zeros(X.d))

    for code in range(1, 2 ** n):
        bits = tuple((code >> (n - 1 - i)) & 1 for i in range(n))
        if bits in found:
            continue
        if any(zero_cols[i] and bits[i] == 0 for i in range(n)):
            continue  # a zero sample can never sit strictly on the inactive side
        margin, w = _margin_lp(X, bits)
        if w is not None and margin > _MARGIN_EPS:
            found[bits] = w
    return _finish_report(X, found, "exact-lp", 0, None)


def enumerate_exact(X) -> ArrangementReport:
    """All realizable activation patterns of X, minus the all-zero pattern.

    Raises :class:`ScaleLimitError` when neither exact route applies
    (``d >= 3`` with ``n > 16``).  The ``d >= 3`` route costs one small LP per
    unconfirmed sign vector, so expect minutes near the upper end.
    """
    X = as_data_matrix(X)
    if numerical_rank(X) == 0:
        found = {(1,) * X.n: np.zeros(X.d)}
        method = "exact-2d" if X.d <= 2 else "exact-lp"
        return _finish_report(X, found, method, 0, None)
    if X.d <= 2:
        return _enumerate_low_dim(X)
    return _enumerate_lp(X)


def _stream_draw(seed: int, index: int, d: int) -> np.ndarray:
    """Draw ``index`` of the standard-normal stream keyed by ``seed``."""
    bg = np.random.Philox(key=np.uint64(seed & (2 ** 64 - 1)))
    bg.advance(index * _SAMPLE_STREAM_STRIDE)
    return np.random.Generator(bg).standard_normal(d)


def sample_patterns(X, count: int, seed: int) -> ArrangementReport:
    """Patterns hit by ``count`` Gaussian weight draws from a seeded stream.

    Draw ``i`` depends only on ``(seed, i)``, so outputs are identical no
    matter how the draws are scheduled, and the pattern set for a smaller
    budget is always a subset of the set for a larger one at the same seed.
    """
    X = as_data_matrix(X)
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return ArrangementReport(patterns=PatternSet(()), method="sampled",
                                 samples_drawn=0, seed=seed,
                                 bound=pattern_count_bound(X), witnesses=())
    W = np.empty((X.d, count))
    for i in range(count):
        W[:, i] = _stream_draw(seed, i, X.d)
    B = (X.entries.T @ W) >= 0.0
    seen = _dedup_with_witness(B, W)
    found = {bits: W[:, i] for bits, i in seen.items()}
    return _finish_report(X, found, "sampled", count, seed)


def is_zonotope_vertex(X, h: ActivationPattern):
    """Whether ``X h`` is a vertex of the zonotope of X, with a witness.

    True iff some direction w separates the active and inactive samples with
    strict signs on both sides; the maximizing w is returned as the witness.
    Limited to ``n <= 16`` like the exact LP route.
    """
    X = as_data_matrix(X)
    if h.n != X.n:
        raise ShapeError(f"pattern has {h.n} bits, data has {X.n} samples")
    if X.n > _LP_MAX_SAMPLES:
        raise ScaleLimitError(f"vertex test supports n <= {_LP_MAX_SAMPLES} (got n={X.n})")
    Xe = X.entries
    norms = np.linalg.norm(Xe, axis=0)
    if any(norms[i] == 0.0 for i in range(X.n)):
        return False, None  # a zero generator admits no strict separation
    rows = []
    for i in range(X.n):
        sign = -1.0 if h.bits[i] else 1.0
        rows.append(np.append(sign * Xe[:, i], norms[i]))
    c = np.zeros(X.d + 1)
    c[-1] = -1.0
    bounds = [(-1.0, 1.0)] * X.d + [(0.0, 1e3)]
    res = linprog(c, A_ub=np.array(rows), b_ub=np.zeros(len(rows)),
                  bounds=bounds, method="highs")
    if not res.success or res.x[-1] <= _MARGIN_EPS:
        return False, None
    return True, res.x[:-1].copy()
