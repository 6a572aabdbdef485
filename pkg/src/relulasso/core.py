"""Shared data model: training data, activation patterns, two-layer ReLU nets.

Every type here is an immutable value backed by read-only numpy arrays, and
every operation is a pure function, so the whole module is safe to use from
multiple threads without locking.

Conventions fixed once for the entire toolkit:

* data matrices are ``d x n`` (one column per training sample);
* the ReLU indicator ties break upward, ``1{t >= 0}``, so a sample lying
  exactly on a neuron's hyperplane counts as active;
* the group-Lasso weight ``beta`` pairs with the squared-norm weight-decay
  coefficient ``lam = beta / 2`` (see :class:`RegularizationConvention`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """An input's dimensions do not agree with its partner's."""


class ScaleLimitError(ValueError):
    """An exact routine was asked to run beyond its feasible problem size."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap before reaching tolerance.

    Attributes
    ----------
    best : the best iterate found, or None
    residuals : dict of named residual magnitudes at ``best``, or None
    """

    def __init__(self, message, best=None, residuals=None):
        super().__init__(message)
        self.best = best
        self.residuals = residuals


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, order="C", copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """Training inputs stacked column-wise: ``entries`` is d x n."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _readonly(self.entries)
        if arr.ndim != 2:
            raise ShapeError(f"data matrix must be 2-D, got shape {arr.shape}")
        d, n = arr.shape
        if d < 1 or n < 1:
            raise ShapeError("data matrix needs at least one feature and one sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("data matrix entries must be finite")
        object.__setattr__(self, "entries", arr)

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.entries[:, i]


def as_data_matrix(X) -> DataMatrix:
    """Coerce a DataMatrix or a 2-D array-like into a DataMatrix."""
    if isinstance(X, DataMatrix):
        return X
    return DataMatrix(np.asarray(X, dtype=float))


@dataclass(frozen=True, eq=False)
class Labels:
    """Real targets, one per training sample."""

    values: np.ndarray

    def __post_init__(self):
        arr = _readonly(self.values)
        if arr.ndim != 1:
            raise ShapeError(f"labels must be a vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("labels must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def as_labels(y) -> Labels:
    if isinstance(y, Labels):
        return y
    return Labels(np.asarray(y, dtype=float))


@dataclass(frozen=True, order=True)
class ActivationPattern:
    """Binary vector recording which samples activate a ReLU neuron.

    Ordering is lexicographic on the bits, which fixes the canonical group
    order used everywhere downstream.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("pattern bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=float)

    def as_bitstring(self) -> str:
        return "".join(str(b) for b in self.bits)

    def support(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)

    def complement(self) -> "ActivationPattern":
        return ActivationPattern(tuple(1 - b for b in self.bits))

    def is_zero(self) -> bool:
        return not any(self.bits)

    @classmethod
    def from_bitstring(cls, s: str) -> "ActivationPattern":
        return cls(tuple(int(c) for c in s))


@dataclass(frozen=True)
class PatternSet:
    """Deduplicated activation patterns in lexicographic ascending order.

    The all-zero pattern is never a member: it indexes the identically-zero
    group and contributes nothing to any model built on top.
    """

    patterns: tuple[ActivationPattern, ...]

    def __post_init__(self):
        pats = tuple(self.patterns)
        if not pats:
            object.__setattr__(self, "patterns", pats)
            return
        n = pats[0].n
        for p in pats:
            if p.n != n:
                raise ShapeError("all patterns in a set must have equal length")
            if p.is_zero():
                raise ValueError("the all-zero pattern is excluded from pattern sets")
        for a, b in zip(pats, pats[1:]):
            if not a < b:
                raise ValueError("patterns must be strictly increasing (sorted, no duplicates)")
        object.__setattr__(self, "patterns", pats)

    @classmethod
    def from_iterable(cls, patterns) -> "PatternSet":
        """Canonicalize: dedup, drop the all-zero pattern, sort."""
        uniq = {p.bits: p for p in patterns if not p.is_zero()}
        return cls(tuple(uniq[k] for k in sorted(uniq)))

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def __getitem__(self, g: int) -> ActivationPattern:
        return self.patterns[g]

    def __contains__(self, pattern: ActivationPattern) -> bool:
        return any(p == pattern for p in self.patterns)

    @property
    def n(self) -> int:
        if not self.patterns:
            raise ValueError("empty pattern set has no sample count")
        return self.patterns[0].n

    def to_matrix(self) -> np.ndarray:
        """Stack patterns as columns of an n x G 0/1 matrix."""
        if not self.patterns:
            raise ValueError("empty pattern set has no matrix form")
        return np.array([p.bits for p in self.patterns], dtype=float).T

    def to_json_dict(self) -> dict:
        return {"n": self.n, "patterns": [p.as_bitstring() for p in self.patterns]}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PatternSet":
        pats = tuple(ActivationPattern.from_bitstring(s) for s in obj["patterns"])
        ps = cls(pats)
        if ps.patterns and ps.n != int(obj["n"]):
            raise ShapeError("pattern length disagrees with declared n")
        return ps


@dataclass(frozen=True)
class NetMeta:
    """Provenance carried with a trained network."""

    method: str = "manual"
    beta: float | None = None
    lam: float | None = None
    seed: int | None = None
    pattern_count: int | None = None
    duality_gap: float | None = None
    flags: tuple[str, ...] = ()

    def with_flags(self, *extra: str) -> "NetMeta":
        return NetMeta(self.method, self.beta, self.lam, self.seed,
                       self.pattern_count, self.duality_gap, self.flags + extra)


@dataclass(frozen=True, eq=False)
class TwoLayerNet:
    """A scalar-output two-layer ReLU network ``x -> relu(x^T W + b) alpha``.

    ``W`` is d x m with one column per neuron; ``bias`` is an optional length-m
    row; ``alpha`` holds the outer weights.  ``m = 0`` encodes the identically
    zero network, which is a first-class value here.
    """

    W: np.ndarray
    bias: np.ndarray | None
    alpha: np.ndarray
    meta: NetMeta = field(default_factory=NetMeta)

    def __post_init__(self):
        W = _readonly(self.W)
        alpha = _readonly(self.alpha)
        if W.ndim != 2:
            raise ShapeError(f"W must be 2-D, got shape {W.shape}")
        d, m = W.shape
        if d < 1:
            raise ShapeError("W needs at least one input row")
        if alpha.shape != (m,):
            raise ShapeError(f"alpha must have shape ({m},), got {alpha.shape}")
        bias = self.bias
        if bias is not None:
            bias = _readonly(bias)
            if bias.shape != (m,):
                raise ShapeError(f"bias must have shape ({m},), got {bias.shape}")
        if not np.all(np.isfinite(W)) or not np.all(np.isfinite(alpha)):
            raise ValueError("network weights must be finite")
        if bias is not None and not np.all(np.isfinite(bias)):
            raise ValueError("network bias must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "bias", bias)

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        return self.W.shape[1]

    @classmethod
    def zero(cls, d: int, meta: NetMeta | None = None) -> "TwoLayerNet":
        return cls(np.zeros((d, 0)), None, np.zeros(0), meta or NetMeta(method="zero"))


@dataclass(frozen=True)
class RegularizationConvention:
    """Pins the calibration between the two regularization weights.

    ``lasso_beta`` multiplies the sum of group Euclidean norms in the convex
    program; ``nonconvex_coeff`` multiplies ``||W||_F^2 + ||alpha||_2^2`` in
    the weight-decay objective.  Equality of the two optimal values holds
    exactly when ``nonconvex_coeff = lasso_beta / 2`` (per-neuron rescaling
    turns ``lam * (||w||^2 + a^2)`` into ``2 * lam * ||w|| * |a|`` at the
    optimum), so the pairing is enforced at construction.
    """

    lasso_beta: float
    nonconvex_coeff: float

    def __post_init__(self):
        if self.lasso_beta < 0 or self.nonconvex_coeff < 0:
            raise ValueError("regularization weights must be nonnegative")
        if self.nonconvex_coeff != self.lasso_beta / 2.0:
            raise ValueError("convention requires nonconvex_coeff == lasso_beta / 2")

    @classmethod
    def from_beta(cls, beta: float) -> "RegularizationConvention":
        return cls(float(beta), float(beta) / 2.0)

    @classmethod
    def from_weight_decay(cls, lam: float) -> "RegularizationConvention":
        return cls(2.0 * float(lam), float(lam))


def predict(net: TwoLayerNet, X) -> np.ndarray:
    """Evaluate the network on every column of X, returning a length-n vector.

    The empty (m = 0) network predicts exactly zero.  Scaling every outer
    weight by c scales the output by c; scaling a neuron's inner weights and
    bias by c > 0 while dividing its outer weight by c leaves the output
    unchanged (ReLU positive homogeneity).
    """
    X = as_data_matrix(X)
    if net.d != X.d:
        raise ShapeError(f"network expects {net.d} features, data has {X.d}")
    if net.m == 0:
        return np.zeros(X.n)
    pre = X.entries.T @ net.W
    if net.bias is not None:
        pre = pre + net.bias
    return np.maximum(pre, 0.0) @ net.alpha


def nonconvex_objective(net: TwoLayerNet, X, y, conv: RegularizationConvention) -> float:
    """Squared-loss training objective with weight decay on W and alpha.

    Bias entries are trainable but never regularized.
    """
    X = as_data_matrix(X)
    y = as_labels(y)
    if y.n != X.n:
        raise ShapeError(f"labels have {y.n} entries, data has {X.n} samples")
    r = predict(net, X) - y.values
    decay = float(np.sum(net.W * net.W) + np.sum(net.alpha * net.alpha))
    return 0.5 * float(r @ r) + conv.nonconvex_coeff * decay


def balance_rescale(net: TwoLayerNet) -> TwoLayerNet:
    """Rescale each neuron so its inner and outer weights have equal magnitude.

    Per neuron the map is ``w -> g*w``, ``alpha -> alpha/g`` with
    ``g = sqrt(|alpha| / ||w||)``, the choice minimizing
    ``g^2 ||w||^2 + alpha^2 / g^2``; the bias scales together with ``w`` so
    predictions are untouched.  Neurons with ``alpha = 0`` collapse to the
    zero neuron (the ``g -> 0`` limit, still prediction-preserving); neurons
    with ``w = 0`` but ``alpha != 0`` cannot be balanced and pass through
    unchanged, flagged in the returned meta.
    """
    if net.m == 0:
        return net
    W = net.W.copy()
    alpha = net.alpha.copy()
    bias = None if net.bias is None else net.bias.copy()
    degenerate = False
    wnorm = np.linalg.norm(W, axis=0)
    for j in range(net.m):
        a = abs(alpha[j])
        if wnorm[j] == 0.0 and a == 0.0:
            continue
        if wnorm[j] == 0.0:
            degenerate = True
            continue
        if a == 0.0:
            W[:, j] = 0.0
            if bias is not None:
                bias[j] = 0.0
            continue
        g = np.sqrt(a / wnorm[j])
        W[:, j] *= g
        alpha[j] /= g
        if bias is not None:
            bias[j] *= g
    meta = net.meta.with_flags("degenerate-neuron") if degenerate else net.meta
    return TwoLayerNet(W, bias, alpha, meta)
