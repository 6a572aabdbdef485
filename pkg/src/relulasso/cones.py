"""Chamber cones: membership, Euclidean projection, cone-restricted dual norms.

A chamber cone is ``K = {z : M z >= 0}`` with ``M = (2 diag(h) - I) X^T``.
Projection onto K is the geometric primitive behind both the solver's
feasibility steps and the duality certificate, via the identity

    max_{||w|| <= 1, w in K} c^T w  =  ||P_K(c)||_2.

Projection routes, in order of preference:

* the input is already feasible (projection is the identity);
* small problems (``n * d <= 64``): exact active-set least squares on the
  dual, ``P_K(c) = c + M^T mu`` with ``mu = argmin_{mu >= 0} ||M^T mu + c||``;
* an irredundant facet description is available (computed once per cone from
  an interior witness by central projection and a convex hull): exact
  active-set least squares on the few facet rows;
* otherwise cyclic Dykstra over all n halfspaces, capped at 10_000 sweeps.

Everything is pure; the one mutable-looking piece is a lazily cached facet
description on the frozen cone, which is idempotent to recompute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, lsq_linear, nnls
from scipy.spatial import ConvexHull, QhullError

from .core import ActivationPattern, ConvergenceError, ShapeError

_DIRECT_SIZE = 64
_DYKSTRA_SWEEP_CAP = 10_000
_WITNESS_MARGIN = 1e-9
_FACET_DEDUP_DECIMALS = 12

_UNSET = object()


@dataclass(frozen=True, eq=False)
class ChamberCone:
    """Closed chamber ``{z : constraint_matrix @ z >= 0}`` for one pattern."""

    constraint_matrix: np.ndarray
    pattern: ActivationPattern

    def __post_init__(self):
        M = np.array(self.constraint_matrix, dtype=float, copy=True)
        if M.ndim != 2:
            raise ShapeError("constraint matrix must be 2-D")
        if M.shape[0] != self.pattern.n:
            raise ShapeError("constraint rows must correspond 1:1 to samples")
        M.setflags(write=False)
        object.__setattr__(self, "constraint_matrix", M)
        object.__setattr__(self, "_facet_cache", _UNSET)

    @property
    def d(self) -> int:
        return self.constraint_matrix.shape[1]

    def facet_rows(self) -> np.ndarray | None:
        """Irredundant unit-norm constraint rows, or None when unavailable.

        None means the chamber has no strict interior (or the reduction was
        numerically inconclusive); callers then work with the full matrix.
        """
        if getattr(self, "_facet_cache") is _UNSET:
            facets = _reduce_constraints(self.constraint_matrix)
            object.__setattr__(self, "_facet_cache", facets)
        return getattr(self, "_facet_cache")


def cone_from_pattern(X, pattern: ActivationPattern) -> ChamberCone:
    from .arrangements import chamber_constraints

    return ChamberCone(chamber_constraints(X, pattern), pattern)


def contains(cone: ChamberCone, z, tol: float) -> bool:
    """Entrywise test ``M z >= -tol``. Every cone contains the origin."""
    z = np.asarray(z, dtype=float)
    if z.shape != (cone.d,):
        raise ShapeError(f"point must have shape ({cone.d},), got {z.shape}")
    return bool(np.all(cone.constraint_matrix @ z >= -tol))


def _unit_rows(M: np.ndarray) -> np.ndarray:
    """Nonzero rows of M scaled to unit norm, deduplicated."""
    norms = np.linalg.norm(M, axis=1)
    rows = M[norms > 0.0] / norms[norms > 0.0, None]
    if rows.shape[0] == 0:
        return rows
    _, idx = np.unique(np.round(rows, _FACET_DEDUP_DECIMALS), axis=0, return_index=True)
    return rows[np.sort(idx)]


def _interior_witness(M: np.ndarray):
    """Point with the largest normalized margin inside ``{M z >= 0}``.

    Returns ``(w, margin)``; a nonpositive margin means the chamber has no
    strict interior.
    """
    rows = _unit_rows(M)
    d = M.shape[1]
    if rows.shape[0] == 0:
        return np.zeros(d), np.inf
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-rows, np.ones((rows.shape[0], 1))])
    bounds = [(-1.0, 1.0)] * d + [(0.0, 1e3)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(rows.shape[0]), bounds=bounds,
                  method="highs")
    if not res.success:
        return np.zeros(d), 0.0
    return res.x[:-1].copy(), float(res.x[-1])


def _reduce_constraints(M: np.ndarray, witness: np.ndarray | None = None) -> np.ndarray | None:
    """Facet subset of the unit constraint rows, or None when not reducible.

    The irredundant rows are the extreme rays of the cone spanned by the
    constraint normals.  With a strict interior witness w every normal has
    positive inner product with w, so central projection onto the plane
    ``v . w = 1`` turns extreme rays into convex-hull vertices.
    """
    rows = _unit_rows(M)
    d = M.shape[1]
    if rows.shape[0] <= max(d, 2):
        return rows
    if witness is None or not _strict_margin_ok(rows, witness):
        witness, margin = _interior_witness(M)
        if margin <= _WITNESS_MARGIN:
            return None
    w = witness / np.linalg.norm(witness)
    dots = rows @ w
    if np.min(dots) <= _WITNESS_MARGIN:
        return None
    if d == 2:
        perp = np.array([-w[1], w[0]])
        angles = np.arctan2(rows @ perp, dots)
        keep = sorted({int(np.argmin(angles)), int(np.argmax(angles))})
        return rows[keep]
    pts = rows / dots[:, None]
    basis = _orthonormal_complement(w)
    coords = pts @ basis
    try:
        hull = ConvexHull(coords)
    except QhullError:
        return None
    # 2-D hulls list vertices in cyclic order, which downstream edge
    # enumeration exploits; higher-dimensional hulls have no such order.
    if coords.shape[1] == 2:
        return rows[hull.vertices]
    return rows[np.sort(hull.vertices)]


def _strict_margin_ok(unit_rows: np.ndarray, witness: np.ndarray) -> bool:
    nw = np.linalg.norm(witness)
    if nw == 0.0:
        return False
    return bool(np.min(unit_rows @ (witness / nw)) > _WITNESS_MARGIN)


def _orthonormal_complement(w: np.ndarray) -> np.ndarray:
    """Columns spanning the orthogonal complement of unit vector w."""
    d = w.shape[0]
    q, _ = np.linalg.qr(np.column_stack([w, np.eye(d)]))
    return q[:, 1:d]


def _project_active_set(M: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Exact projection via the dual nonnegative least-squares problem.

    ``P_K(c) = c + M^T mu`` with ``mu = argmin_{mu >= 0} ||M^T mu + c||``.
    The fast NNLS route occasionally returns garbage on wide duals, so every
    result is verified (feasibility, nonexpansiveness from the origin, and
    the orthogonality residual) and re-solved with BVLS when needed.
    """
    A = np.ascontiguousarray(M.T)
    scale = 1.0 + float(np.linalg.norm(c))
    try:
        mu, _ = nnls(A, -c)
        p = c + A @ mu
        if _projection_ok(M, c, p, scale):
            return p
    except RuntimeError:
        pass
    res = lsq_linear(A, -c, bounds=(0.0, np.inf), method="bvls")
    p = c + A @ res.x
    if _projection_ok(M, c, p, scale, loose=True):
        return p
    raise ConvergenceError("cone projection failed its optimality check",
                           best=p,
                           residuals={"violation": -float(np.min(M @ p)),
                                      "optimality": abs(float(p @ (c - p)))})


def _projection_ok(M, c, p, scale, loose=False) -> bool:
    tol = 1e-8 if loose else 1e-10
    if np.linalg.norm(p) > np.linalg.norm(c) * (1.0 + 1e-9) + 1e-12:
        return False
    if float(np.min(M @ p, initial=0.0)) < -tol * scale * _row_scale(M):
        return False
    return abs(float(p @ (c - p))) <= tol * scale * scale * max(_row_scale(M), 1.0)


def _dykstra(rows: np.ndarray, c: np.ndarray, tol: float, sweep_cap: int):
    """Cyclic Dykstra over unit-normal halfspaces ``{z : rows @ z >= 0}``."""
    k = rows.shape[0]
    z = c.copy()
    corrections = np.zeros_like(rows)
    scale = 1.0 + np.linalg.norm(c)
    for sweep in range(sweep_cap):
        z_prev = z.copy()
        for j in range(k):
            zc = z - corrections[j]
            dot = rows[j] @ zc
            z = zc - min(dot, 0.0) * rows[j]
            corrections[j] = z - zc
        viol = -min(float(np.min(rows @ z)), 0.0)
        change = float(np.linalg.norm(z - z_prev))
        if viol <= tol * scale and change <= tol * scale:
            return z, True
    return z, False


def project(cone: ChamberCone, c, tol: float = 1e-8) -> np.ndarray:
    """Euclidean projection of c onto the chamber.

    Raises :class:`ConvergenceError` carrying the best iterate when the
    (rarely used) Dykstra fallback fails to converge within its sweep cap.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (cone.d,):
        raise ShapeError(f"point must have shape ({cone.d},), got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("point must be finite")
    M = cone.constraint_matrix
    scale = 1.0 + float(np.linalg.norm(c))
    if np.all(M @ c >= -1e-13 * scale * _row_scale(M)):
        return c.copy()
    if M.shape[0] * M.shape[1] <= _DIRECT_SIZE:
        return _project_active_set(M, c)
    facets = cone.facet_rows()
    if facets is not None:
        return _project_active_set(facets, c)
    rows = _unit_rows(M)
    z, ok = _dykstra(rows, c, tol, _DYKSTRA_SWEEP_CAP)
    if not ok:
        resid = {"violation": -float(np.min(rows @ z)),
                 "optimality": abs(float(z @ (c - z)))}
        raise ConvergenceError("cone projection did not converge", best=z,
                               residuals=resid)
    return z


def _row_scale(M: np.ndarray) -> float:
    norms = np.linalg.norm(M, axis=1)
    return float(np.max(norms)) if norms.size else 1.0


def cone_restricted_dual_norm(cone: ChamberCone, c) -> float:
    """``max {c^T w : ||w||_2 <= 1, w in K}``, the norm of the projection."""
    return float(np.linalg.norm(project(cone, np.asarray(c, dtype=float))))


class ConeBank:
    """Batch projection machinery for a family of chamber cones.

    Built once per group-Lasso problem: extracts an irredundant facet
    description per cone (witnesses from pattern sampling avoid almost every
    interior-point LP).  For d <= 3 the projection onto a cone with few
    facets is computed exactly by face enumeration: the projection lies on
    the cone itself, on one facet's hyperplane, on one edge ray, or at the
    apex, so the nearest feasible candidate among those is the projection.
    All candidates are evaluated vectorized across cones; numerically
    suspicious blocks and cones without a facet description fall back to
    exact per-cone active-set projections.
    """

    def __init__(self, mask: np.ndarray, XT: np.ndarray, witnesses=None):
        self.XT = XT
        self.signs = 2.0 * mask - 1.0  # (n, G)
        n, G = self.signs.shape
        self.G = G
        self.d = XT.shape[1]
        facet_list: list[np.ndarray | None] = []
        for g in range(G):
            M = self.signs[:, g:g + 1] * XT
            w = None if witnesses is None else witnesses[g]
            facet_list.append(_reduce_constraints(M, w))
        self.facets = facet_list
        kmax = max((f.shape[0] for f in facet_list if f is not None), default=0)
        self.kmax = kmax
        self.R = np.zeros((G, kmax, self.d))
        self.reducible = np.zeros(G, dtype=bool)
        for g, f in enumerate(facet_list):
            if f is not None:
                self.R[g, :f.shape[0], :] = f
                self.reducible[g] = True
        self.fast = self.d <= 3 and kmax > 0
        if self.fast:
            self.E, self.suspect = _edge_rays(facet_list, self.d)

    def full_matrix(self, g: int) -> np.ndarray:
        return self.signs[:, g:g + 1] * self.XT

    def project_one(self, g: int, c: np.ndarray) -> np.ndarray:
        f = self.facets[g]
        M = f if f is not None else self.full_matrix(g)
        return _project_active_set(M, c)

    def violations(self, C: np.ndarray) -> np.ndarray:
        """Max constraint violation per column of the d x G matrix C,
        measured against the facet rows where available."""
        if self.kmax:
            vals = np.einsum("gkd,dg->gk", self.R, C)
            viol = -np.minimum(vals.min(axis=1), 0.0)
        else:
            viol = np.zeros(self.G)
        for g in np.nonzero(~self.reducible)[0]:
            m = float(np.min(self.full_matrix(g) @ C[:, g]))
            viol[g] = -min(m, 0.0)
        return viol

    def project_columns(self, C: np.ndarray, active=None) -> np.ndarray:
        """Project columns of the d x G matrix C onto their cones.

        ``active`` restricts work to a boolean subset of columns; the rest
        are passed through untouched.
        """
        P = C.copy()
        scale = 1.0 + np.linalg.norm(C, axis=0)
        viol = self.violations(C)
        todo = viol > 1e-13 * scale
        if active is not None:
            todo = todo & active
        batch = np.nonzero(todo & self.reducible)[0]
        if batch.size:
            if self.fast:
                Z, ok = self._face_enumeration(batch, C[:, batch].T)
            else:
                Z, ok = self._dykstra_batch(batch, C[:, batch].T)
            P[:, batch] = Z.T
            for g in batch[~ok]:
                P[:, g] = self.project_one(g, C[:, g])
        for g in np.nonzero(todo & ~self.reducible)[0]:
            P[:, g] = self.project_one(g, C[:, g])
        return P

    def _face_enumeration(self, idx: np.ndarray, C: np.ndarray):
        """Exact projection for d <= 3 via nearest feasible face candidate.

        C is (B, d), one row per selected cone.  Candidates per cone: the
        apex, the orthogonal projection onto each facet hyperplane, and the
        clamped projection onto each edge ray.  Blocks whose winner fails
        the optimality residual are reported for the active-set fallback.
        """
        R = self.R[idx]                      # (B, k, d)
        E = self.E[idx]                      # (B, e, d)
        B, k, d = R.shape
        facet_dots = np.einsum("bkd,bd->bk", R, C)
        cand_f = C[:, None, :] - facet_dots[:, :, None] * R      # (B, k, d)
        edge_dots = np.maximum(np.einsum("bed,bd->be", E, C), 0.0)
        cand_e = edge_dots[:, :, None] * E                        # (B, e, d)
        zero = np.zeros((B, 1, d))
        Q = np.concatenate([cand_f, cand_e, zero], axis=1)        # (B, q, d)
        scale = 1.0 + np.linalg.norm(C, axis=1)
        # zero-padded facet rows contribute margin exactly 0, never blocking
        margins = np.einsum("bkd,bqd->bqk", R, Q).min(axis=2)
        feasible = margins >= -1e-11 * scale[:, None]
        dist2 = np.sum((Q - C[:, None, :]) ** 2, axis=2)
        dist2[~feasible] = np.inf
        pick = np.argmin(dist2, axis=1)
        Z = Q[np.arange(B), pick]
        resid = np.abs(np.einsum("bd,bd->b", Z, C - Z))
        ok = (resid <= 1e-10 * scale ** 2) & ~self.suspect[idx]
        return Z, ok

    def _dykstra_batch(self, idx: np.ndarray, C: np.ndarray, sweep_cap: int = 200,
                       tol: float = 1e-11):
        R = self.R[idx]
        Z = C.copy()
        Q = np.zeros_like(R)
        scale = 1.0 + np.linalg.norm(C, axis=1)
        ok = np.zeros(idx.size, dtype=bool)
        for sweep in range(sweep_cap):
            Z_prev = Z.copy()
            for j in range(self.kmax):
                Rj = R[:, j, :]
                Zc = Z - Q[:, j, :]
                dot = np.einsum("bd,bd->b", Rj, Zc)
                Z = Zc - np.minimum(dot, 0.0)[:, None] * Rj
                Q[:, j, :] = Z - Zc
            if sweep % 4 == 3 or sweep == sweep_cap - 1:
                viol = -np.minimum(np.einsum("bkd,bd->bk", R, Z).min(axis=1), 0.0)
                change = np.linalg.norm(Z - Z_prev, axis=1)
                ok = (viol <= tol * scale) & (change <= tol * scale)
                if np.all(ok):
                    break
        return Z, ok

    def dual_norms(self, C: np.ndarray) -> np.ndarray:
        """Exact cone-restricted dual norms of each column of the d x G matrix."""
        P = self.project_columns(C)
        return np.linalg.norm(P, axis=0)


def _edge_rays(facet_list, d: int):
    """Unit edge-ray candidates per cone, zero-padded into (G, emax, d).

    d = 1 cones need no edge candidates (facet projections already hit the
    apex); d = 2 edges are the perpendiculars of each facet normal (both
    signs, feasibility filters later); d = 3 edges are cross products of
    facet-normal pairs in both signs.  Spurious candidates are harmless
    (they lose the nearest-feasible selection), but a near-parallel facet
    pair whose cross product degenerates could hide a true edge, so such
    cones are marked suspect and always routed to the exact fallback.
    """
    G = len(facet_list)
    rays: list[np.ndarray] = []
    suspect = np.zeros(G, dtype=bool)
    for g, f in enumerate(facet_list):
        if f is None or d == 1 or f.shape[0] == 0:
            rays.append(np.zeros((0, d)))
            continue
        k = f.shape[0]
        cand = []
        if d == 2:
            for i in range(k):
                perp = np.array([-f[i, 1], f[i, 0]])
                cand.extend([perp, -perp])
        elif k <= 4:
            for i in range(k):
                for j in range(i + 1, k):
                    e = np.cross(f[i], f[j])
                    ne = np.linalg.norm(e)
                    if ne > 1e-10:
                        cand.extend([e / ne, -e / ne])
                    else:
                        suspect[g] = True
        else:
            # facets arrive in cyclic cross-section order: true edges are
            # the adjacent pairs, sign fixed by feasibility
            for i in range(k):
                e = np.cross(f[i], f[(i + 1) % k])
                ne = np.linalg.norm(e)
                if ne <= 1e-10:
                    suspect[g] = True
                    continue
                e /= ne
                m_plus = float(np.min(f @ e))
                m_minus = float(np.min(f @ -e))
                pick = e if m_plus >= m_minus else -e
                if max(m_plus, m_minus) < -1e-9:
                    suspect[g] = True
                cand.append(pick)
        rays.append(np.array(cand) if cand else np.zeros((0, d)))
    emax = max((r.shape[0] for r in rays), default=0)
    E = np.zeros((G, max(emax, 1), d))
    for g, r in enumerate(rays):
        if r.shape[0]:
            E[g, :r.shape[0], :] = r
    return E, suspect
