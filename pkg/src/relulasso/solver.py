"""Cone-constrained group Lasso with certified duality gaps.

The program solved here is

    min  0.5 || sum_g D_g X^T (u_g - v_g) - y ||^2
         + beta * sum_g (||u_g|| + ||v_g||)
    s.t. u_g, v_g in K_g = {z : (2 D_g - I) X^T z >= 0},

whose optimal value equals the weight-decay training objective of a wide
enough two-layer ReLU network (weight-decay coefficient ``beta / 2``; see
:mod:`relulasso.reconstruct` for the network direction).

Algorithm: accelerated proximal gradient (FISTA with function restarts) on
the stacked variable.  The nonsmooth term of each block is
``beta ||z|| + indicator(K_g)``, whose proximal map has the exact closed
form "project onto the cone, then block-soft-threshold": for every closed
convex cone, ``max_{w in K, ||w||<=1} c^T w = ||P_K(c)||``, so minimizing
``0.5||z - c||^2 + t ||z||`` over K reduces to a scalar problem along the
ray through ``P_K(c)``.  Every iterate is therefore feasible.

Certificates come from the Fenchel dual

    max_lam  -lam^T y - 0.5 ||lam||^2
    s.t.     max(||P_g(X D_g lam)||, ||P_g(-X D_g lam)||) <= beta  for all g,

evaluated at the scaled residual ``lam = -s (y - fitted)`` with
``s = min(1, beta / max_g dual norm)``, which is always dual feasible, so the
reported gap is a true optimality bound.

A generic unconstrained Lasso (singleton groups, optional unpenalized
columns) built on the same machinery lives at the bottom; the univariate and
wedge dictionary modules reuse it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cones import ChamberCone, ConeBank, cone_from_pattern
from .core import (
    ConvergenceError,
    DataMatrix,
    Labels,
    PatternSet,
    ShapeError,
    as_data_matrix,
    as_labels,
)

_UNSET = object()
_GAP_FLOOR = -1e-12


@dataclass(frozen=True, eq=False)
class GroupLassoProblem:
    """Data, regularization weight, and the pattern family defining blocks.

    Block g couples the design slice ``A_g = diag(h_g) X^T`` with the chamber
    cone of pattern ``h_g``; blocks follow the set's lexicographic order.
    Design blocks and cones are materialized on demand (they are masked views
    of ``X^T``), keeping large sampled problems cheap to hold.
    """

    X: DataMatrix
    y: Labels
    beta: float
    patterns: PatternSet
    witnesses: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if len(self.patterns) == 0:
            raise ValueError("pattern set must be nonempty")
        if self.patterns.n != self.X.n:
            raise ShapeError("patterns and data disagree on sample count")
        if self.y.n != self.X.n:
            raise ShapeError("labels and data disagree on sample count")
        if self.witnesses is not None and len(self.witnesses) != len(self.patterns):
            raise ShapeError("witnesses must align with patterns")
        object.__setattr__(self, "_mask_cache", _UNSET)
        object.__setattr__(self, "_bank_cache", _UNSET)

    @property
    def G(self) -> int:
        return len(self.patterns)

    def mask(self) -> np.ndarray:
        """n x G 0/1 matrix whose columns are the patterns."""
        if getattr(self, "_mask_cache") is _UNSET:
            object.__setattr__(self, "_mask_cache", self.patterns.to_matrix())
        return getattr(self, "_mask_cache")

    def block(self, g: int) -> np.ndarray:
        """Design block ``A_g = diag(h_g) X^T`` (n x d)."""
        return self.mask()[:, g:g + 1] * self.X.entries.T

    def cone(self, g: int) -> ChamberCone:
        return cone_from_pattern(self.X, self.patterns[g])

    @property
    def cones(self) -> tuple[ChamberCone, ...]:
        return tuple(self.cone(g) for g in range(self.G))

    def bank(self) -> ConeBank:
        if getattr(self, "_bank_cache") is _UNSET:
            bank = ConeBank(self.mask(), self.X.entries.T, self.witnesses)
            object.__setattr__(self, "_bank_cache", bank)
        return getattr(self, "_bank_cache")


def build_problem(X, y, beta: float, patterns: PatternSet,
                  witnesses=None) -> GroupLassoProblem:
    """Assemble the convex program for the given pattern family."""
    return GroupLassoProblem(as_data_matrix(X), as_labels(y), float(beta),
                             patterns, None if witnesses is None else tuple(witnesses))


@dataclass(frozen=True, eq=False)
class GroupLassoSolution:
    """Primal variables with their certificate.

    ``active_groups`` counts nonzero vectors among all ``u_g`` and ``v_g``
    (each one reconstructs to one neuron).  ``certified`` marks whether the
    duality gap met the solve tolerance before the iteration cap.
    """

    u: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    objective: float
    gap: float
    iterations: int
    active_groups: int
    certified: bool

    def __post_init__(self):
        if self.gap < _GAP_FLOOR:
            raise ValueError("certified gap must not fall below the weak-duality floor")

    def stacks(self) -> tuple[np.ndarray, np.ndarray]:
        """Variables as a pair of d x G matrices."""
        return np.column_stack(self.u), np.column_stack(self.v)


def group_prox(z, threshold: float) -> np.ndarray:
    """Block soft-threshold ``max(1 - threshold/||z||, 0) z`` (prox of t||.||)."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    z = np.asarray(z, dtype=float)
    nz = float(np.linalg.norm(z))
    if nz <= threshold:
        return np.zeros_like(z)
    return (1.0 - threshold / nz) * z


def _fitted(mask: np.ndarray, XT: np.ndarray, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    Z = XT @ (U - V)
    return np.einsum("ng,ng->n", mask, Z)


def fitted_values(problem: GroupLassoProblem, solution: GroupLassoSolution) -> np.ndarray:
    """Model outputs ``sum_g A_g (u_g - v_g)`` on the training samples."""
    U, V = solution.stacks()
    return _fitted(problem.mask(), problem.X.entries.T, U, V)


def _penalty(U: np.ndarray, V: np.ndarray) -> float:
    return float(np.linalg.norm(U, axis=0).sum() + np.linalg.norm(V, axis=0).sum())


def _objective(yv: np.ndarray, f: np.ndarray, beta: float, U, V) -> float:
    r = f - yv
    return 0.5 * float(r @ r) + beta * _penalty(U, V)


def solution_objective(problem: GroupLassoProblem, solution: GroupLassoSolution) -> float:
    """Recompute the objective from the stored variables."""
    U, V = solution.stacks()
    f = _fitted(problem.mask(), problem.X.entries.T, U, V)
    return _objective(problem.y.values, f, problem.beta, U, V)


def _lipschitz(mask: np.ndarray, XT: np.ndarray, iters: int = 50, seed: int = 0) -> float:
    """Largest eigenvalue of the stacked design's Gram, by power iteration.

    Only used to seed the backtracking step search; the line search owns
    correctness, so an estimate is plenty.
    """
    n = mask.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    v /= nv
    lam = 0.0
    for _ in range(iters):
        T = XT.T @ (mask * v[:, None])
        w = 2.0 * np.einsum("ng,ng->n", mask, XT @ T)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


def _dual_gap_arrays(problem: GroupLassoProblem, U: np.ndarray, V: np.ndarray,
                     f: np.ndarray | None = None) -> tuple[float, float]:
    """(gap, primal) for the candidate (U, V); the gap is a true bound."""
    mask = problem.mask()
    XT = problem.X.entries.T
    yv = problem.y.values
    if f is None:
        f = _fitted(mask, XT, U, V)
    primal = _objective(yv, f, problem.beta, U, V)
    rv = yv - f
    C = XT.T @ (mask * rv[:, None])
    bank = problem.bank()
    nu = np.maximum(bank.dual_norms(C), bank.dual_norms(-C))
    top = float(np.max(nu)) if nu.size else 0.0
    s = 1.0 if top <= problem.beta or top == 0.0 else problem.beta / top
    dual = 0.5 * float(yv @ yv) - 0.5 * float(np.sum((s * rv - yv) ** 2))
    gap = primal - dual
    if gap < -1e-9 * (1.0 + abs(primal)):
        raise ConvergenceError("dual certificate lost weak duality; cone projections "
                               "are unreliable on this instance",
                               residuals={"gap": gap})
    return max(gap, 0.0), primal


def certify(problem: GroupLassoProblem, candidate: GroupLassoSolution) -> float:
    """Duality gap of an arbitrary candidate; nonnegative by weak duality."""
    U, V = candidate.stacks()
    if U.shape != (problem.X.d, problem.G):
        raise ShapeError("candidate block count disagrees with the problem")
    gap, _ = _dual_gap_arrays(problem, U, V)
    return gap


def candidate_gap(problem: GroupLassoProblem, U: np.ndarray, V: np.ndarray):
    """(gap, objective) for raw variable stacks, for callers without a
    Solution wrapper (e.g. certifying an imported network)."""
    if U.shape != (problem.X.d, problem.G) or V.shape != U.shape:
        raise ShapeError("stacks must be d x G")
    return _dual_gap_arrays(problem, U, V)


def beta_max(X, y, patterns: PatternSet, witnesses=None) -> float:
    """Smallest regularization weight at which the zero solution is optimal.

    Scales linearly with y.  Returns 0 for zero labels.
    """
    X = as_data_matrix(X)
    y = as_labels(y)
    yv = y.values
    if not np.any(yv):
        return 0.0
    mask = patterns.to_matrix()
    bank = ConeBank(mask, X.entries.T, None if witnesses is None else tuple(witnesses))
    C = X.entries @ (mask * yv[:, None])
    nu = np.maximum(bank.dual_norms(C), bank.dual_norms(-C))
    return float(np.max(nu))


def _prox_columns(bank: ConeBank, C: np.ndarray, threshold: float) -> np.ndarray:
    """Exact blockwise prox of ``thr ||.|| + indicator(K_g)`` on each column."""
    out = np.zeros_like(C)
    live = np.linalg.norm(C, axis=0) > threshold  # ||P(c)|| <= ||c||: rest shrink to 0
    if not np.any(live):
        return out
    P = bank.project_columns(C, active=live)
    norms = np.linalg.norm(P, axis=0)
    scale = np.zeros_like(norms)
    pos = live & (norms > threshold)
    scale[pos] = 1.0 - threshold / norms[pos]
    out[:, pos] = P[:, pos] * scale[pos]
    return out


def solve(problem: GroupLassoProblem, tol: float = 1e-6, max_iter: int = 50_000,
          init: tuple[np.ndarray, np.ndarray] | None = None) -> GroupLassoSolution:
    """Solve to a certified duality gap of ``tol * (1 + |objective|)``.

    Hitting the iteration cap is not an error: the best feasible iterate is
    returned with ``certified=False`` and its actual gap.  Zero labels return
    the zero solution immediately.  Blocks are processed in the pattern set's
    lexicographic order with fixed-order reductions, so repeated runs are
    bit-identical.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    mask = problem.mask()
    XT = problem.X.entries.T
    yv = problem.y.values
    d, G = problem.X.d, problem.G
    beta = problem.beta

    if not np.any(yv):
        zeros = tuple(np.zeros(d) for _ in range(G))
        return GroupLassoSolution(zeros, zeros, 0.0, 0.0, 0, 0, True)

    bank = problem.bank()
    L = _lipschitz(mask, XT)
    tau = 1.0 / (1.01 * L) if L > 0.0 else 1.0
    # the line search accepts far larger steps than 1/L whenever the active
    # blocks overlap little, so start optimistic
    tau = tau * max(1.0, np.sqrt(G))

    if init is not None:
        XU = np.array(init[0], dtype=float, copy=True)
        XV = np.array(init[1], dtype=float, copy=True)
        if XU.shape != (d, G) or XV.shape != (d, G):
            raise ShapeError("warm start must provide d x G stacks")
    else:
        XU = np.zeros((d, G))
        XV = np.zeros((d, G))
    f_x = _fitted(mask, XT, XU, XV)
    obj_x = _objective(yv, f_x, beta, XU, XV)

    best = (XU.copy(), XV.copy())
    best_f = f_x.copy()
    best_obj = obj_x

    gap, primal = _dual_gap_arrays(problem, best[0], best[1], best_f)
    if gap <= tol * (1.0 + abs(primal)):
        return _finish(problem, best, primal, gap, 0, True)
    # the residual certificate is not monotone along the iterates, so keep
    # the best-certified candidate seen at any check
    cert_best = (gap, primal, best)

    YU, YV = XU.copy(), XV.copy()
    f_y = f_x.copy()
    t_k = 1.0
    next_check = 10
    it = 0
    while it < max_iter:
        it += 1
        r = f_y - yv
        smooth_y = 0.5 * float(r @ r)
        Grad = XT.T @ (mask * r[:, None])
        while True:  # backtracking line search on the smooth part
            NU = _prox_columns(bank, YU - tau * Grad, tau * beta)
            NV = _prox_columns(bank, YV + tau * Grad, tau * beta)
            f_new = _fitted(mask, XT, NU, NV)
            rn = f_new - yv
            smooth_new = 0.5 * float(rn @ rn)
            dU, dV = NU - YU, NV - YV
            model = (smooth_y + float(np.sum(Grad * dU)) - float(np.sum(Grad * dV))
                     + (float(np.sum(dU * dU)) + float(np.sum(dV * dV))) / (2.0 * tau))
            if smooth_new <= model + 1e-12 * (1.0 + abs(smooth_y)) or tau <= 1e-18:
                break
            tau *= 0.5
        obj_new = smooth_new + beta * _penalty(NU, NV)

        if obj_new > obj_x:
            t_k = 1.0  # momentum restart keeps the trajectory near-monotone
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        theta = (t_k - 1.0) / t_next
        YU = NU + theta * (NU - XU)
        YV = NV + theta * (NV - XV)
        f_y = (1.0 + theta) * f_new - theta * f_x
        XU, XV, f_x, obj_x, t_k = NU, NV, f_new, obj_new, t_next
        tau *= 1.1

        if obj_new < best_obj:
            best = (NU.copy(), NV.copy())
            best_f = f_new.copy()
            best_obj = obj_new

        if it >= next_check or it == max_iter:
            gap, primal = _dual_gap_arrays(problem, best[0], best[1], best_f)
            if gap <= tol * (1.0 + abs(primal)):
                return _finish(problem, best, primal, gap, it, True)
            if gap < cert_best[0]:
                cert_best = (gap, primal, (best[0].copy(), best[1].copy()))
            next_check = min(2 * next_check + 10, next_check + 1000)

    gap, primal = _dual_gap_arrays(problem, best[0], best[1], best_f)
    if gap < cert_best[0]:
        cert_best = (gap, primal, best)
    gap, primal, stacks = cert_best
    return _finish(problem, stacks, primal, gap, max_iter,
                   gap <= tol * (1.0 + abs(primal)))


def _finish(problem, stacks, objective, gap, iterations, certified) -> GroupLassoSolution:
    U, V = stacks
    u = tuple(U[:, g].copy() for g in range(U.shape[1]))
    v = tuple(V[:, g].copy() for g in range(V.shape[1]))
    active = int(np.sum(np.linalg.norm(U, axis=0) > 0.0)
                 + np.sum(np.linalg.norm(V, axis=0) > 0.0))
    return GroupLassoSolution(u, v, objective, gap, iterations, active, certified)


@dataclass(frozen=True, eq=False)
class PathPoint:
    beta: float
    solution: GroupLassoSolution | None
    error: str | None = None


def reg_path(X, y, patterns: PatternSet, betas, tol: float = 1e-6,
             max_iter: int = 50_000, witnesses=None) -> list[PathPoint]:
    """Warm-started sweep over a descending grid of regularization weights.

    Per-point failures are recorded in the returned entries and the sweep
    continues.
    """
    betas = [float(b) for b in betas]
    if any(b <= 0 for b in betas):
        raise ValueError("betas must be positive")
    if any(b2 > b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("betas must be sorted descending")
    X = as_data_matrix(X)
    y = as_labels(y)
    points: list[PathPoint] = []
    warm = None
    for b in betas:
        problem = build_problem(X, y, b, patterns, witnesses)
        try:
            sol = solve(problem, tol=tol, max_iter=max_iter, init=warm)
            warm = sol.stacks()
            points.append(PathPoint(beta=b, solution=sol))
        except (ConvergenceError, ValueError) as exc:  # carried in-line
            points.append(PathPoint(beta=b, solution=None, error=str(exc)))
    return points


def solution_to_json_dict(problem: GroupLassoProblem,
                          solution: GroupLassoSolution) -> dict:
    """JSON form with zero groups omitted."""
    groups = []
    for g, pat in enumerate(problem.patterns):
        u, v = solution.u[g], solution.v[g]
        if not np.any(u) and not np.any(v):
            continue
        groups.append({"pattern": pat.as_bitstring(),
                       "u": [float(x) for x in u],
                       "v": [float(x) for x in v]})
    return {"beta": problem.beta, "objective": solution.objective,
            "gap": solution.gap, "groups": groups}


# ---------------------------------------------------------------------------
# Unconstrained Lasso on an explicit dictionary (singleton groups).  The
# univariate and wedge modules feed their dictionaries through this.
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LassoSolution:
    z: np.ndarray
    objective: float
    gap: float
    iterations: int
    certified: bool


def lasso_beta_max(A: np.ndarray, y, penalized=None) -> float:
    """Smallest weight making the all-zero coefficient vector optimal.

    With unpenalized columns present, the threshold applies to the residual
    after fitting those columns alone.
    """
    A = np.asarray(A, dtype=float)
    yv = as_labels(y).values
    pen = _penalized_mask(A, penalized)
    r = _free_residual(A, yv, pen)
    if not np.any(pen):
        return 0.0
    return float(np.max(np.abs(A[:, pen].T @ r)))


def _penalized_mask(A, penalized) -> np.ndarray:
    if penalized is None:
        return np.ones(A.shape[1], dtype=bool)
    pen = np.asarray(penalized, dtype=bool)
    if pen.shape != (A.shape[1],):
        raise ShapeError("penalized mask must have one entry per column")
    return pen


def _free_residual(A, yv, pen) -> np.ndarray:
    free = A[:, ~pen]
    if free.shape[1] == 0:
        return yv.copy()
    coef, *_ = np.linalg.lstsq(free, yv, rcond=None)
    return yv - free @ coef


def _lasso_gap(A, yv, beta, pen, z, f=None) -> tuple[float, float]:
    if f is None:
        f = A @ z
    r = f - yv
    primal = 0.5 * float(r @ r) + beta * float(np.sum(np.abs(z[pen])))
    rv = yv - f
    free = A[:, ~pen]
    if free.shape[1]:
        coef, *_ = np.linalg.lstsq(free, rv, rcond=None)
        rv = rv - free @ coef  # dual feasibility needs exact orthogonality
    corr = np.abs(A[:, pen].T @ rv)
    top = float(np.max(corr)) if corr.size else 0.0
    s = 1.0 if top <= beta or top == 0.0 else beta / top
    dual = 0.5 * float(yv @ yv) - 0.5 * float(np.sum((s * rv - yv) ** 2))
    gap = primal - dual
    if gap < -1e-9 * (1.0 + abs(primal)):
        raise ConvergenceError("lasso certificate lost weak duality",
                               residuals={"gap": gap})
    return max(gap, 0.0), primal


def solve_lasso(A: np.ndarray, y, beta: float, tol: float = 1e-8,
                max_iter: int = 50_000, penalized=None,
                init: np.ndarray | None = None) -> LassoSolution:
    """FISTA for ``0.5||A z - y||^2 + beta ||z_P||_1`` with optional free columns."""
    A = np.asarray(A, dtype=float)
    yv = as_labels(y).values
    if A.shape[0] != yv.shape[0]:
        raise ShapeError("dictionary and labels disagree on sample count")
    if beta <= 0:
        raise ValueError("beta must be positive")
    pen = _penalized_mask(A, penalized)
    thr_pattern = pen.astype(float)

    P = A.shape[1]
    if P == 0:
        return LassoSolution(np.zeros(0), 0.5 * float(yv @ yv), 0.0, 0, True)
    sig = np.linalg.svd(A, compute_uv=False)
    L = float(sig[0] ** 2) if sig.size else 0.0
    tau = 1.0 / (1.01 * L) if L > 0.0 else 1.0

    x = np.zeros(P) if init is None else np.array(init, dtype=float, copy=True)
    f_x = A @ x
    obj_x = 0.5 * float(np.sum((f_x - yv) ** 2)) + beta * float(np.sum(np.abs(x[pen])))
    best, best_f, best_obj = x.copy(), f_x.copy(), obj_x
    gap, primal = _lasso_gap(A, yv, beta, pen, best, best_f)
    if gap <= tol * (1.0 + abs(primal)):
        return LassoSolution(best, primal, gap, 0, True)
    cert_best = (gap, primal, best)  # certificates wobble; keep the best seen

    yk = x.copy()
    f_y = f_x.copy()
    t_k = 1.0
    next_check = 10
    it = 0
    while it < max_iter:
        it += 1
        r_y = f_y - yv
        smooth_y = 0.5 * float(r_y @ r_y)
        grad = A.T @ r_y
        while True:  # backtracking line search on the smooth part
            xn = yk - tau * grad
            xn = np.sign(xn) * np.maximum(np.abs(xn) - tau * beta * thr_pattern, 0.0)
            f_new = A @ xn
            smooth_new = 0.5 * float(np.sum((f_new - yv) ** 2))
            dx = xn - yk
            model = smooth_y + float(grad @ dx) + float(dx @ dx) / (2.0 * tau)
            if smooth_new <= model + 1e-12 * (1.0 + abs(smooth_y)) or tau <= 1e-18:
                break
            tau *= 0.5
        obj_new = smooth_new + beta * float(np.sum(np.abs(xn[pen])))
        if obj_new > obj_x:
            t_k = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        theta = (t_k - 1.0) / t_next
        yk = xn + theta * (xn - x)
        f_y = (1.0 + theta) * f_new - theta * f_x
        x, f_x, obj_x, t_k = xn, f_new, obj_new, t_next
        tau *= 1.1
        if obj_new < best_obj:
            best, best_f, best_obj = xn.copy(), f_new.copy(), obj_new
        if it >= next_check or it == max_iter:
            gap, primal = _lasso_gap(A, yv, beta, pen, best, best_f)
            if gap <= tol * (1.0 + abs(primal)):
                return LassoSolution(best, primal, gap, it, True)
            if gap < cert_best[0]:
                cert_best = (gap, primal, best.copy())
            next_check = min(2 * next_check + 10, next_check + 1000)
    gap, primal = _lasso_gap(A, yv, beta, pen, best, best_f)
    if gap < cert_best[0]:
        cert_best = (gap, primal, best)
    gap, primal, best = cert_best
    return LassoSolution(best, primal, gap, max_iter, gap <= tol * (1.0 + abs(primal)))
