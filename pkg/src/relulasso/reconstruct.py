"""From certified group-Lasso solutions to globally optimal ReLU networks.

Each nonzero block vector becomes one balanced neuron:

    u_g != 0  ->  w = u_g / sqrt(||u_g||),  alpha = +sqrt(||u_g||)
    v_g != 0  ->  w = v_g / sqrt(||v_g||),  alpha = -sqrt(||v_g||)

so ``||w|| = |alpha|`` holds by construction and the network's weight-decay
objective (coefficient ``beta / 2``) equals the convex objective up to the
certified gap.  A block with both branches nonzero yields two neurons sharing
a chamber.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cones import contains
from .core import (
    NetMeta,
    RegularizationConvention,
    TwoLayerNet,
    nonconvex_objective,
)
from .solver import GroupLassoProblem, GroupLassoSolution


@dataclass(frozen=True, eq=False)
class ReconstructionReport:
    """A reconstructed network next to the two objective values it ties.

    ``certified`` mirrors the source solution; when False the objective
    equality is reported but not guaranteed.  ``neuron_sources`` maps each
    network column to its (group index, branch) origin.
    """

    net: TwoLayerNet
    convex_objective: float
    nonconvex_objective: float
    discrepancy: float
    width: int
    certified: bool
    neuron_sources: tuple[tuple[int, str], ...]


def reconstruct_net(solution: GroupLassoSolution, problem: GroupLassoProblem,
                    conv: RegularizationConvention) -> ReconstructionReport:
    """Build the network for a solved instance and compare objectives.

    The all-zero solution reconstructs to the width-0 network.  The
    convention's ``lasso_beta`` must match the problem's weight.
    """
    if conv.lasso_beta != problem.beta:
        raise ValueError("regularization convention disagrees with the problem's beta")
    cols: list[np.ndarray] = []
    alphas: list[float] = []
    sources: list[tuple[int, str]] = []
    for g in range(problem.G):
        for branch, vec, sign in (("u", solution.u[g], 1.0), ("v", solution.v[g], -1.0)):
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                continue
            root = np.sqrt(norm)
            cols.append(vec / root)
            alphas.append(sign * root)
            sources.append((g, branch))
    meta = NetMeta(method="convex-reconstruction", beta=problem.beta,
                   lam=conv.nonconvex_coeff, pattern_count=problem.G,
                   duality_gap=solution.gap)
    if cols:
        net = TwoLayerNet(np.column_stack(cols), None, np.array(alphas), meta)
    else:
        net = TwoLayerNet.zero(problem.X.d, meta)
    ncvx = nonconvex_objective(net, problem.X, problem.y, conv)
    return ReconstructionReport(net=net,
                                convex_objective=solution.objective,
                                nonconvex_objective=ncvx,
                                discrepancy=abs(solution.objective - ncvx),
                                width=net.m,
                                certified=solution.certified,
                                neuron_sources=tuple(sources))


def verify_chamber_consistency(report: ReconstructionReport,
                               problem: GroupLassoProblem, tol: float) -> bool:
    """Check every neuron sits in its source chamber and activates inside it.

    Membership is ``contains`` at tol; the realized support
    ``{i : x_i^T w > tol}`` must sit inside the source pattern's support, and
    must equal it whenever the neuron is strictly interior (all chamber
    margins above tol).
    """
    XT = problem.X.entries.T
    for (g, _branch), j in zip(report.neuron_sources, range(report.net.m)):
        w = report.net.W[:, j]
        cone = problem.cone(g)
        if not contains(cone, w, tol):
            return False
        margins = XT @ w
        support = set(problem.patterns[g].support())
        realized = {i for i in range(problem.X.n) if margins[i] > tol}
        if not realized.issubset(support):
            return False
        if np.all(cone.constraint_matrix @ w > tol) and realized != support:
            return False
    return True
