"""Signed-volume dictionaries: the hinge construction for d >= 2.

Each dictionary column is anchored on a tuple of training points; the entry
for sample i is the positive part of the signed volume of the parallelotope
spanned by ``x_i`` and the anchor points, divided by the anchor blade's own
volume.  In the plane without bias this is

    A[i, j] = (x_i ^ x_j)_+ / ||x_j||_p ,

the positive area ratio of the triangle (0, x_i, x_j); appending a ones
coordinate ("with bias") shifts anchors to affine hulls, and at d = 1 with
bias the construction collapses to the univariate hinge matrix exactly.
Signed volumes are determinants: exact cofactor expansion up to 3 x 3,
pivoted elimination above.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import (
    RegularizationConvention,
    ScaleLimitError,
    ShapeError,
    NetMeta,
    TwoLayerNet,
    as_data_matrix,
    as_labels,
    predict,
)
from .solver import LassoSolution, lasso_beta_max, solve_lasso

_DEGENERACY_TOL = 1e-12


def wedge_signed_volume(vectors) -> float:
    """Signed volume of the parallelotope spanned by k vectors in R^k.

    Antisymmetric under argument swaps and linear in each argument; equal to
    the determinant of the matrix with the given vectors as columns.
    """
    arr = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
    k = arr.shape[1]
    if arr.shape[0] != k:
        raise ShapeError(f"need {arr.shape[0]} vectors of dimension {arr.shape[0]}, got {k}")
    if k == 1:
        return float(arr[0, 0])
    if k == 2:
        return float(arr[0, 0] * arr[1, 1] - arr[0, 1] * arr[1, 0])
    if k == 3:
        return float(
            arr[0, 0] * (arr[1, 1] * arr[2, 2] - arr[1, 2] * arr[2, 1])
            - arr[0, 1] * (arr[1, 0] * arr[2, 2] - arr[1, 2] * arr[2, 0])
            + arr[0, 2] * (arr[1, 0] * arr[2, 1] - arr[1, 1] * arr[2, 0])
        )
    return float(np.linalg.det(arr))


def _cofactor_vector(B: np.ndarray) -> np.ndarray:
    """Vector c with ``det([x | B]) = x . c`` for every x (expansion along x)."""
    k1, k = B.shape
    if k1 != k + 1:
        raise ShapeError("cofactor expansion needs a (k+1) x k block")
    cof = np.empty(k1)
    for i in range(k1):
        rows = [r for r in range(k1) if r != i]
        sub = B[rows, :]
        minor = wedge_signed_volume([sub[:, j] for j in range(k)]) if k else 1.0
        cof[i] = (-1.0) ** i * minor
    return cof


@dataclass(frozen=True, eq=False)
class WedgeDictionary:
    """Nonnegative volume-ratio dictionary with its anchor bookkeeping.

    ``multi_indices[j]`` is the strictly increasing anchor tuple of column j;
    ``A`` holds the positive-orientation entries and ``A_mirror`` the
    opposite-orientation twins (a hinge boundary through the anchors has two
    active sides, exactly as the scalar case keeps both difference signs).
    ``dropped`` lists anchors removed for a degenerate (near-zero) blade
    volume.
    """

    A: np.ndarray
    A_mirror: np.ndarray
    multi_indices: tuple[tuple[int, ...], ...]
    p: int
    with_bias: bool
    dropped: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def width(self) -> int:
        return self.A.shape[1]

    def stacked(self) -> np.ndarray:
        """Both orientations side by side, the trainer's design matrix."""
        return np.hstack([self.A, self.A_mirror])


def _anchor_volume(Xe: np.ndarray, J: tuple[int, ...], p: int, with_bias: bool) -> float:
    if with_bias:
        if len(J) == 1:
            return 1.0
        diffs = Xe[:, J[1:]] - Xe[:, J[0]][:, None]
        if len(J) == 2:
            return float(np.linalg.norm(diffs[:, 0], ord=p))
        gram = diffs.T @ diffs
        return float(np.sqrt(max(np.linalg.det(gram), 0.0)))
    if len(J) == 1:
        return float(np.linalg.norm(Xe[:, J[0]], ord=p))
    gram = Xe[:, J].T @ Xe[:, J]
    return float(np.sqrt(max(np.linalg.det(gram), 0.0)))


def _check_p(p: int, k: int, d: int, with_bias: bool):
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if p == 1 and k >= 2 and not (with_bias and k == 2):
        raise ValueError("p = 1 anchors are only defined for single points or "
                         "affine pairs; use p = 2 here")


def build_wedge_dictionary(X, p: int = 2, with_bias: bool = False) -> WedgeDictionary:
    """Assemble the dictionary over all strictly increasing anchor tuples.

    Anchors whose blade volume falls below the degeneracy tolerance (e.g.
    parallel points without bias, coincident points with bias) are dropped
    and reported in ``dropped``.
    """
    X = as_data_matrix(X)
    Xe = X.entries
    lifted = np.vstack([Xe, np.ones((1, X.n))]) if with_bias else Xe
    dl = lifted.shape[0]
    k = dl - 1
    if k < 1:
        raise ValueError("scalar data needs with_bias=True (or use the univariate module)")
    _check_p(p, k, X.d, with_bias)
    gen_scale = max(1.0, float(np.max(np.linalg.norm(lifted, axis=0))))
    cols = []
    mirror = []
    kept: list[tuple[int, ...]] = []
    dropped: list[tuple[int, ...]] = []
    for J in combinations(range(X.n), k):
        denom = _anchor_volume(Xe, J, p, with_bias)
        if denom <= _DEGENERACY_TOL * gen_scale ** k:
            dropped.append(J)
            continue
        cof = _cofactor_vector(lifted[:, J])
        raw = lifted.T @ cof
        cols.append(np.maximum(raw, 0.0) / denom)
        mirror.append(np.maximum(-raw, 0.0) / denom)
        kept.append(J)
    A = np.column_stack(cols) if cols else np.zeros((X.n, 0))
    Am = np.column_stack(mirror) if mirror else np.zeros((X.n, 0))
    return WedgeDictionary(A=A, A_mirror=Am, multi_indices=tuple(kept), p=p,
                           with_bias=with_bias, dropped=tuple(dropped))


@dataclass(frozen=True, eq=False)
class WedgeFit:
    """Dictionary fit; ``z`` covers both anchor orientations.

    For p = 1 the atom family is completed with the coordinate directions
    (the corners of the weight ball are extreme atoms alongside the
    data-anchored ones); their coefficients live in ``z_axis``, ordered
    ``+e_1, ..., +e_d, -e_1, ..., -e_d``.
    """

    dictionary: WedgeDictionary
    z: np.ndarray
    z_axis: np.ndarray
    objective: float
    gap: float
    certified: bool
    fitted: np.ndarray
    lasso: LassoSolution


def _axis_atoms(X: "DataMatrix", p: int, with_bias: bool) -> np.ndarray:
    """Coordinate-direction columns completing the p = 1 atom family."""
    if p != 1 or with_bias:
        return np.zeros((X.n, 0))
    XT = X.entries.T
    return np.hstack([np.maximum(XT, 0.0), np.maximum(-XT, 0.0)])


def _design(X, dico: WedgeDictionary) -> np.ndarray:
    return np.hstack([dico.stacked(), _axis_atoms(X, dico.p, dico.with_bias)])


def wedge_beta_max(X, y, p: int = 2, with_bias: bool = False) -> float:
    X = as_data_matrix(X)
    dico = build_wedge_dictionary(X, p, with_bias)
    return lasso_beta_max(_design(X, dico), y)


def train_wedge_lasso(X, y, beta: float, p: int = 2, with_bias: bool = False,
                      tol: float = 1e-8, max_iter: int = 200_000) -> WedgeFit:
    """Standard Lasso over both orientations of the dictionary (desk scale).

    ``fit.z`` carries the positive-orientation coefficients first, then the
    mirrored ones, matching :meth:`WedgeDictionary.stacked`; for p = 1 the
    coordinate atoms follow in ``fit.z_axis``.
    """
    X = as_data_matrix(X)
    y = as_labels(y)
    if X.n > 30 or X.d > 3:
        raise ScaleLimitError("wedge training supports n <= 30 and d <= 3")
    dico = build_wedge_dictionary(X, p, with_bias)
    design = _design(X, dico)
    sol = solve_lasso(design, y, beta, tol=tol, max_iter=max_iter)
    split = 2 * dico.width
    return WedgeFit(dictionary=dico, z=sol.z[:split].copy(),
                    z_axis=sol.z[split:].copy(), objective=sol.objective,
                    gap=sol.gap, certified=sol.certified,
                    fitted=design @ sol.z, lasso=sol)


def realize_planar_network(fit: WedgeFit, X) -> TwoLayerNet:
    """Network realizing a planar no-bias dictionary fit exactly.

    Column j's anchor point ``x_j`` yields one neuron with weight along a
    perpendicular of ``x_j`` (the mirrored column uses the opposite one, so
    the activation boundary passes through the anchor either way); axis
    atoms become coordinate-direction neurons.  Every neuron is balanced in
    the dictionary's own p-norm, which makes the network's p-norm decay
    objective equal the Lasso objective.
    """
    dico = fit.dictionary
    if dico.with_bias or any(len(J) != 1 for J in dico.multi_indices):
        raise ValueError("network realization is implemented for planar single-point anchors")
    X = as_data_matrix(X)
    if X.d != 2:
        raise ShapeError("planar realization needs d = 2")
    P = dico.width
    ws, als = [], []
    for col, zj in enumerate(np.asarray(fit.z, dtype=float)):
        if zj == 0.0:
            continue
        (j,) = dico.multi_indices[col % P]
        xj = X.entries[:, j]
        w_dir = np.array([xj[1], -xj[0]])  # det([x, xj]) = x . w_dir
        if col >= P:
            w_dir = -w_dir
        pnorm = float(np.linalg.norm(xj, ord=dico.p))
        s = np.sqrt(abs(zj)) / pnorm
        ws.append(s * w_dir)
        als.append(zj / (s * pnorm))
    for col, zj in enumerate(np.asarray(fit.z_axis, dtype=float)):
        if zj == 0.0:
            continue
        w_dir = np.zeros(2)
        w_dir[col % 2] = 1.0 if col < 2 else -1.0
        s = np.sqrt(abs(zj))
        ws.append(s * w_dir)
        als.append(zj / s)
    meta = NetMeta(method=f"wedge-l{dico.p}")
    if not ws:
        return TwoLayerNet.zero(2, meta)
    return TwoLayerNet(np.column_stack(ws), None, np.array(als), meta)


def lp_weight_decay_objective(net: TwoLayerNet, X, y, beta: float, p: int) -> float:
    """Training objective with per-neuron p-norm decay.

    ``0.5 ||f(X) - y||^2 + (beta/2) sum_j (||w_j||_p^2 + alpha_j^2)``; at
    optimal per-neuron scaling the decay term equals
    ``beta sum_j ||w_j||_p |alpha_j|``, the calibration under which the
    dictionary fit and the training problem share their value.
    """
    X = as_data_matrix(X)
    y = as_labels(y)
    RegularizationConvention.from_beta(beta)  # validates beta >= 0
    r = predict(net, X) - y.values
    decay = 0.0
    for j in range(net.m):
        decay += float(np.linalg.norm(net.W[:, j], ord=p) ** 2 + net.alpha[j] ** 2)
    return 0.5 * float(r @ r) + (beta / 2.0) * decay
