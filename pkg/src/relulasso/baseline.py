"""Non-convex reference training and a tiny-instance brute-force oracle.

``train_sgd`` is a deliberately plain trainer: (mini-batch) gradient descent
with weight decay, optional heavy-ball momentum, optional backtracking on the
full-batch path, and best-of-restarts selection.  It exists to give the
certified convex route something honest to race against.

``brute_force_oracle`` double-checks tiny instances (n <= 6, d <= 2) with two
methods that share nothing with the main solver's update rule: a long
projected-subgradient run on the convex program (with its own closed-form
sector projections) and a multi-restart descent on the training objective.
The reported value is the smaller of the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrangements import enumerate_exact
from .core import (
    ConvergenceError,
    NetMeta,
    RegularizationConvention,
    ScaleLimitError,
    ShapeError,
    TwoLayerNet,
    as_data_matrix,
    as_labels,
    nonconvex_objective,
)

_RELU_SUBGRAD_AT_ZERO = 1.0  # matches the 1{t >= 0} activation tie-break


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the reference trainer.

    ``batch_size=None`` means full-batch descent.  ``weight_decay`` is the
    coefficient on ``||W||_F^2 + ||alpha||_2^2``; when None it is taken from
    the convention passed to :func:`train_sgd`.  ``backtrack`` halves the
    step until each full-batch update decreases the objective.
    ``rebalance_every`` equalizes inner/outer weight magnitudes every so many
    epochs; the reparametrization preserves predictions and never increases
    the decay term, and it cures the slow tail of plain descent.
    """

    learning_rate: float
    epochs: int
    batch_size: int | None = None
    restarts: int = 1
    init_scale: float | None = None
    seed: int = 0
    weight_decay: float | None = None
    momentum: float = 0.0
    backtrack: bool = False
    rebalance_every: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch size must be positive")


def _objective_arrays(Xe, yv, W, alpha, lam) -> float:
    act = np.maximum(Xe.T @ W, 0.0)
    r = act @ alpha - yv
    return 0.5 * float(r @ r) + lam * float(np.sum(W * W) + alpha @ alpha)


def _rebalance(W, alpha):
    """In-place per-neuron magnitude equalization (prediction preserving)."""
    wn = np.linalg.norm(W, axis=0)
    an = np.abs(alpha)
    both = (wn > 0.0) & (an > 0.0)
    g = np.sqrt(an[both] / wn[both])
    W[:, both] *= g
    alpha[both] /= g
    dead = (wn > 0.0) & (an == 0.0)
    W[:, dead] = 0.0


def _gradients(Xb, yb, W, alpha, lam, scale):
    pre = Xb.T @ W
    act = np.maximum(pre, 0.0)
    ind = np.where(pre >= 0.0, _RELU_SUBGRAD_AT_ZERO, 0.0)
    r = act @ alpha - yb
    dalpha = scale * (act.T @ r) + 2.0 * lam * alpha
    dW = scale * (Xb @ (ind * (r[:, None] * alpha[None, :]))) + 2.0 * lam * W
    return dW, dalpha


def train_sgd(X, y, width: int, cfg: TrainConfig,
              conv: RegularizationConvention | None = None):
    """Best-of-restarts descent on the weight-decay training objective.

    Returns ``(net, trace)`` where ``trace[e]`` is the full objective after
    epoch e of the winning restart (``trace[0]`` is the initial value).
    Restart k draws its weights from a stream keyed by ``(seed, k)``, so runs
    are reproducible and restarts could be evaluated in any order.  Diverging
    restarts (non-finite objective) are excluded from the selection and
    counted in the returned net's meta flags; ties go to the lowest restart
    index.
    """
    X = as_data_matrix(X)
    y = as_labels(y)
    if y.n != X.n:
        raise ShapeError("labels and data disagree on sample count")
    if width < 1:
        raise ValueError("width must be at least one neuron")
    if cfg.batch_size is not None and cfg.batch_size > X.n:
        raise ValueError("batch size exceeds the sample count")
    lam = cfg.weight_decay
    if lam is None:
        lam = conv.nonconvex_coeff if conv is not None else 0.0
    Xe, yv = X.entries, y.values
    scale_init = cfg.init_scale if cfg.init_scale is not None else 1.0 / np.sqrt(X.d * width)

    best = None  # (objective, restart index, W, alpha, trace)
    divergent = 0
    # overflow in a diverging restart is detected, not a warning condition
    with np.errstate(over="ignore", invalid="ignore"):
        best, divergent = _run_restarts(Xe, yv, width, cfg, lam, scale_init)
    if best is None:
        raise ConvergenceError("every restart diverged; lower the learning rate")
    flags = (f"divergent-restarts={divergent}",) if divergent else ()
    meta = NetMeta(method="sgd", beta=2.0 * lam, lam=lam, seed=cfg.seed,
                   duality_gap=None, flags=flags)
    net = TwoLayerNet(best[2], None, best[3], meta)
    return net, best[4]


def _run_restarts(Xe, yv, width, cfg, lam, scale_init):
    d, n = Xe.shape
    best = None
    divergent = 0
    for k in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, k])
        W = rng.uniform(-scale_init, scale_init, size=(d, width))
        alpha = rng.uniform(-scale_init, scale_init, size=width)
        velW = np.zeros_like(W)
        vela = np.zeros_like(alpha)
        lr = cfg.learning_rate
        trace = np.empty(cfg.epochs + 1)
        trace[0] = _objective_arrays(Xe, yv, W, alpha, lam)
        ok = np.isfinite(trace[0])
        for e in range(cfg.epochs):
            if not ok:
                break
            if cfg.batch_size is None:
                dW, da = _gradients(Xe, yv, W, alpha, lam, 1.0)
                if cfg.backtrack:
                    fcur = _objective_arrays(Xe, yv, W, alpha, lam)
                    while lr > 1e-15:
                        Wc, ac = W - lr * dW, alpha - lr * da
                        if _objective_arrays(Xe, yv, Wc, ac, lam) <= fcur:
                            break
                        lr *= 0.5
                    W, alpha = W - lr * dW, alpha - lr * da
                    lr = min(lr * 1.2, cfg.learning_rate)
                elif cfg.momentum > 0.0:
                    velW = cfg.momentum * velW - lr * dW
                    vela = cfg.momentum * vela - lr * da
                    W, alpha = W + velW, alpha + vela
                else:
                    W, alpha = W - lr * dW, alpha - lr * da
            else:
                order = rng.permutation(n)
                bs = cfg.batch_size
                for start in range(0, n, bs):
                    idx = order[start:start + bs]
                    dW, da = _gradients(Xe[:, idx], yv[idx], W, alpha, lam,
                                        n / idx.size)
                    if cfg.momentum > 0.0:
                        velW = cfg.momentum * velW - lr * dW
                        vela = cfg.momentum * vela - lr * da
                        W, alpha = W + velW, alpha + vela
                    else:
                        W, alpha = W - lr * dW, alpha - lr * da
            if cfg.rebalance_every and (e + 1) % cfg.rebalance_every == 0:
                _rebalance(W, alpha)
            trace[e + 1] = _objective_arrays(Xe, yv, W, alpha, lam)
            ok = np.isfinite(trace[e + 1])
        if not ok:
            divergent += 1
            continue
        final = trace[-1]
        if best is None or final < best[0]:
            best = (final, k, W.copy(), alpha.copy(), trace.copy())
    return best, divergent


# ---------------------------------------------------------------------------
# Brute-force oracle for tiny instances.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    """Lower-confidence estimate of the optimal training value.

    ``value = min(subgradient_value, descent_value)``: the first comes from a
    projected-subgradient run on the convex program, the second from
    multi-restart descent on the training objective; both sit above the true
    optimum, so their minimum is the tighter upper estimate.
    """

    value: float
    subgradient_value: float
    descent_value: float
    subgradient_iterations: int


class _SectorProjector:
    """Closed-form projections onto chamber cones in one or two dimensions.

    Independent of the main projection stack on purpose: each 2-D chamber is
    an angular sector ``[lo, hi]`` around an interior direction, and the
    projection clamps to the nearer edge ray.  Kind 0 = whole space,
    1 = sector, 2 = origin only, 3 = 1-D clamp.
    """

    def __init__(self, X, patterns, witnesses):
        Xe = as_data_matrix(X).entries
        d, n = Xe.shape
        if d > 2:
            raise ScaleLimitError("sector projections require d <= 2")
        G = len(patterns)
        self.d = d
        self.kind = np.zeros(G, dtype=int)
        self.lo = np.zeros(G)
        self.hi = np.zeros(G)
        self.e_lo = np.zeros((G, d))
        self.e_hi = np.zeros((G, d))
        self.theta0 = np.zeros(G)
        self.clip_lo = np.full(G, -np.inf)
        self.clip_hi = np.full(G, np.inf)
        for g, pat in enumerate(patterns):
            signs = 2.0 * pat.as_array() - 1.0
            M = signs[:, None] * Xe.T
            rows = M[np.linalg.norm(M, axis=1) > 0.0]
            if rows.shape[0] == 0:
                self.kind[g] = 0
                continue
            if d == 1:
                has_pos = bool(np.any(rows[:, 0] > 0.0))
                has_neg = bool(np.any(rows[:, 0] < 0.0))
                self.kind[g] = 3
                self.clip_lo[g] = 0.0 if has_pos else -np.inf
                self.clip_hi[g] = 0.0 if has_neg else np.inf
                continue
            w0 = witnesses[g]
            if np.linalg.norm(w0) == 0.0:
                self.kind[g] = 2
                continue
            t0 = np.arctan2(w0[1], w0[0])
            delta = _wrap_angle(np.arctan2(rows[:, 1], rows[:, 0]) - t0)
            lo = float(np.max(delta - np.pi / 2.0))
            hi = float(np.min(delta + np.pi / 2.0))
            if lo > hi:
                self.kind[g] = 2
                continue
            self.kind[g] = 1
            self.theta0[g] = t0
            self.lo[g], self.hi[g] = lo, hi
            self.e_lo[g] = [np.cos(t0 + lo), np.sin(t0 + lo)]
            self.e_hi[g] = [np.cos(t0 + hi), np.sin(t0 + hi)]

    def project(self, Z: np.ndarray) -> np.ndarray:
        """Project each row of the (B, d) stack onto its cone."""
        out = Z.copy()
        if self.d == 1:
            mask = self.kind == 3
            out[mask, 0] = np.clip(Z[mask, 0], self.clip_lo[mask], self.clip_hi[mask])
            out[self.kind == 2] = 0.0
            return out
        out[self.kind == 2] = 0.0
        sec = np.nonzero(self.kind == 1)[0]
        if sec.size == 0:
            return out
        Zs = Z[sec]
        psi = _wrap_angle(np.arctan2(Zs[:, 1], Zs[:, 0]) - self.theta0[sec])
        nonzero = np.linalg.norm(Zs, axis=1) > 0.0
        inside = (psi >= self.lo[sec]) & (psi <= self.hi[sec]) | ~nonzero
        ca = np.maximum(np.einsum("bd,bd->b", Zs, self.e_lo[sec]), 0.0)
        cb = np.maximum(np.einsum("bd,bd->b", Zs, self.e_hi[sec]), 0.0)
        proj = np.where((ca >= cb)[:, None], ca[:, None] * self.e_lo[sec],
                        cb[:, None] * self.e_hi[sec])
        out[sec] = np.where(inside[:, None], Zs, proj)
        return out


def _wrap_angle(a):
    return np.mod(np.asarray(a) + np.pi, 2.0 * np.pi) - np.pi


def brute_force_oracle(X, y, beta: float,
                       conv: RegularizationConvention | None = None,
                       subgrad_iters: int = 1_000_000,
                       gd_restarts: int = 1000,
                       gd_epochs: int = 1500,
                       seed: int = 0) -> OracleResult:
    """Independent estimate of the optimal value on a tiny instance.

    The subgradient run stops early once its best value plateaus (relative
    improvement below 1e-14 across a 25_000-iteration window), so generous
    iteration budgets cost nothing once converged.
    """
    X = as_data_matrix(X)
    y = as_labels(y)
    if X.n > 6 or X.d > 2:
        raise ScaleLimitError("brute force supports n <= 6 and d <= 2")
    if beta <= 0:
        raise ValueError("beta must be positive")
    conv = conv if conv is not None else RegularizationConvention.from_beta(beta)
    if conv.lasso_beta != beta:
        raise ValueError("convention disagrees with beta")

    report = enumerate_exact(X)
    patterns = report.patterns
    G = len(patterns)
    mask = patterns.to_matrix()
    Xe, yv = X.entries, y.values
    d, n = X.d, X.n

    blocks = [mask[:, g:g + 1] * Xe.T for g in range(G)]
    A = np.hstack(blocks + [-B for B in blocks])  # (n, 2 G d)
    projector = _SectorProjector(X, list(patterns) * 2,
                                 list(report.witnesses) * 2)

    step0 = 0.3 * (1.0 + float(np.linalg.norm(yv)))

    z = np.zeros(2 * G * d)
    best_sub = 0.5 * float(yv @ yv)
    window_best = best_sub
    iters_done = 0
    for k in range(1, subgrad_iters + 1):
        iters_done = k
        r = A @ z - yv
        norms = np.linalg.norm(z.reshape(2 * G, d), axis=1)
        f = 0.5 * float(r @ r) + beta * float(norms.sum())
        if f < best_sub:
            best_sub = f
        g_smooth = A.T @ r
        dirs = z.reshape(2 * G, d).copy()
        pos = norms > 0.0
        dirs[pos] /= norms[pos, None]
        g_total = g_smooth + beta * dirs.ravel()
        gn = float(np.linalg.norm(g_total))
        z = z - (step0 / (np.sqrt(k) * max(gn, 1e-12))) * g_total
        z = projector.project(z.reshape(2 * G, d)).ravel()
        if k % 25_000 == 0:
            if window_best - best_sub <= 1e-14 * (1.0 + abs(best_sub)):
                break
            window_best = best_sub

    cfg = TrainConfig(learning_rate=0.5, epochs=gd_epochs, restarts=gd_restarts,
                      seed=seed + 1, weight_decay=conv.nonconvex_coeff,
                      backtrack=True, rebalance_every=100)
    net, _ = train_sgd(X, y, width=2 * n + 2, cfg=cfg)
    gd_value = nonconvex_objective(net, X, y, conv)

    return OracleResult(value=min(best_sub, gd_value),
                        subgradient_value=best_sub,
                        descent_value=gd_value,
                        subgradient_iterations=iters_done)
