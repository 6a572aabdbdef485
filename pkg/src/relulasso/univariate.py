"""One-dimensional inputs: explicit hinge dictionaries and unconstrained Lasso.

With scalar inputs the chamber machinery collapses: training a biased
two-layer network is an ordinary Lasso over the hinge dictionary

    Aplus[i, j]  = sigma(x_i - x_j)
    Aminus[i, j] = sigma(x_j - x_i)

(for the absolute-value activation the two coincide and only ``Aplus`` is
used).  Nonzero coefficients reconstruct to balanced neurons with their kink
at the corresponding knot; an optional unpenalized intercept column is off by
default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NetMeta, ShapeError, TwoLayerNet
from .solver import LassoSolution, lasso_beta_max, solve_lasso

_ACTIVATIONS = ("relu", "abs")


@dataclass(frozen=True, eq=False)
class UnivariateDictionary:
    """Hinge dictionary of a scalar training set (rows follow input order)."""

    Aplus: np.ndarray
    Aminus: np.ndarray
    knots: np.ndarray
    activation: str

    @property
    def n(self) -> int:
        return self.Aplus.shape[0]

    def stacked(self, intercept: bool):
        """(design matrix, penalized-column mask) for the Lasso solve."""
        if self.activation == "abs":
            A = self.Aplus
        else:
            A = np.hstack([self.Aplus, self.Aminus])
        pen = np.ones(A.shape[1], dtype=bool)
        if intercept:
            A = np.hstack([A, np.ones((self.n, 1))])
            pen = np.append(pen, False)
        return A, pen


def build_univariate_dictionary(xs, activation: str = "relu") -> UnivariateDictionary:
    """Entries are exact floating evaluations of the defining differences."""
    if activation not in _ACTIVATIONS:
        raise ValueError(f"activation must be one of {_ACTIVATIONS}")
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size < 1:
        raise ShapeError("need a nonempty vector of scalar inputs")
    diff = xs[:, None] - xs[None, :]
    if activation == "relu":
        Aplus = np.maximum(diff, 0.0)
        Aminus = np.maximum(-diff, 0.0)
    else:
        Aplus = np.abs(diff)
        Aminus = Aplus.copy()
    return UnivariateDictionary(Aplus=Aplus, Aminus=Aminus,
                                knots=np.sort(xs), activation=activation)


@dataclass(frozen=True, eq=False)
class UnivariateFit:
    dictionary: UnivariateDictionary
    xs: np.ndarray
    zplus: np.ndarray
    zminus: np.ndarray
    intercept: float | None
    net: TwoLayerNet
    objective: float
    gap: float
    certified: bool
    fitted: np.ndarray
    lasso: LassoSolution

    def dictionary_function(self, grid) -> np.ndarray:
        """Evaluate the hinge expansion (plus intercept) anywhere."""
        grid = np.asarray(grid, dtype=float)
        diff = grid[:, None] - self.xs[None, :]
        if self.dictionary.activation == "abs":
            vals = np.abs(diff) @ self.zplus
        else:
            vals = np.maximum(diff, 0.0) @ self.zplus + np.maximum(-diff, 0.0) @ self.zminus
        if self.intercept is not None:
            vals = vals + self.intercept
        return vals


def univariate_beta_max(xs, y, activation: str = "relu", intercept: bool = False) -> float:
    dico = build_univariate_dictionary(xs, activation)
    A, pen = dico.stacked(intercept)
    return lasso_beta_max(A, y, penalized=pen)


def _reconstruct_1d(xs, zplus, zminus, intercept, activation, meta) -> TwoLayerNet:
    """Balanced neurons, one (or a ReLU pair, for abs) per nonzero coefficient.

    A nonzero intercept becomes the degenerate neuron ``relu(0 x + 1) c``.
    """
    ws, bs, als = [], [], []
    for j, z in enumerate(zplus):
        if z == 0.0:
            continue
        s = np.sqrt(abs(z))
        if activation == "relu":
            ws.append(s); bs.append(-s * xs[j]); als.append(z / s)
        else:  # |t| = relu(t) + relu(-t)
            ws.append(s); bs.append(-s * xs[j]); als.append(z / s)
            ws.append(-s); bs.append(s * xs[j]); als.append(z / s)
    for j, z in enumerate(zminus):
        if z == 0.0:
            continue
        s = np.sqrt(abs(z))
        ws.append(-s); bs.append(s * xs[j]); als.append(z / s)
    if intercept is not None and intercept != 0.0:
        ws.append(0.0); bs.append(1.0); als.append(intercept)
        meta = meta.with_flags("intercept-neuron")
    if not ws:
        return TwoLayerNet.zero(1, meta)
    return TwoLayerNet(np.array(ws)[None, :], np.array(bs), np.array(als), meta)


def solve_univariate(xs, y, beta: float, activation: str = "relu",
                     tol: float = 1e-8, intercept: bool = False,
                     max_iter: int = 200_000) -> UnivariateFit:
    """Solve the hinge-dictionary Lasso and reconstruct the biased network.

    The returned network reproduces the dictionary fit exactly (up to solver
    tolerance) at the training points and everywhere in between, since both
    are the same piecewise-linear function with kinks at the knots.
    """
    xs = np.asarray(xs, dtype=float)
    dico = build_univariate_dictionary(xs, activation)
    A, pen = dico.stacked(intercept)
    sol = solve_lasso(A, y, beta, tol=tol, max_iter=max_iter, penalized=pen)
    z = sol.z
    n = dico.n
    if activation == "abs":
        zplus = z[:n]
        zminus = np.zeros(n)
    else:
        zplus = z[:n]
        zminus = z[n:2 * n]
    c = float(z[-1]) if intercept else None
    meta = NetMeta(method=f"univariate-{activation}", beta=beta, lam=beta / 2.0,
                   duality_gap=sol.gap)
    net = _reconstruct_1d(xs, zplus, zminus, c, activation, meta)
    return UnivariateFit(dictionary=dico, xs=xs.copy(), zplus=zplus.copy(),
                         zminus=zminus.copy(), intercept=c, net=net,
                         objective=sol.objective, gap=sol.gap,
                         certified=sol.certified, fitted=A @ z, lasso=sol)
