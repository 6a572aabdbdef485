import numpy as np
import pytest

from relulasso import (
    ActivationPattern,
    DataMatrix,
    PatternSet,
    RegularizationConvention,
    build_problem,
    enumerate_exact,
    fitted_values,
    nonconvex_objective,
    predict,
    reconstruct_net,
    solve,
    verify_chamber_consistency,
)
from relulasso.solver import GroupLassoSolution


def solved_demo(demo_X, demo_y, beta=0.1, tol=1e-8):
    report = enumerate_exact(demo_X)
    prob = build_problem(demo_X, demo_y, beta, report.patterns, report.witnesses)
    return prob, solve(prob, tol=tol)


class TestReconstruct:
    def test_single_group_neuron(self, demo_X, demo_y):
        report = enumerate_exact(demo_X)
        prob = build_problem(demo_X, demo_y, 1.0, report.patterns)
        u = [np.zeros(2) for _ in range(prob.G)]
        v = [np.zeros(2) for _ in range(prob.G)]
        u[2] = np.array([4.0, 0.0])
        sol = GroupLassoSolution(tuple(u), tuple(v), 0.0, 0.0, 0, 1, True)
        rec = reconstruct_net(sol, prob, RegularizationConvention.from_beta(1.0))
        assert rec.width == 1
        assert rec.net.W[:, 0] == pytest.approx([2.0, 0.0])
        assert rec.net.alpha[0] == pytest.approx(2.0)

    def test_zero_solution_gives_zero_net(self, demo_X, demo_y):
        report = enumerate_exact(demo_X)
        prob = build_problem(demo_X, demo_y, 100.0, report.patterns)
        zeros = tuple(np.zeros(2) for _ in range(prob.G))
        sol = GroupLassoSolution(zeros, zeros, 7.0, 0.0, 0, 0, True)
        rec = reconstruct_net(sol, prob, RegularizationConvention.from_beta(100.0))
        assert rec.width == 0
        assert rec.nonconvex_objective == pytest.approx(
            0.5 * float(demo_y.values @ demo_y.values))

    def test_end_to_end_equivalence(self, demo_X, demo_y):
        prob, sol = solved_demo(demo_X, demo_y)
        rec = reconstruct_net(sol, prob, RegularizationConvention.from_beta(0.1))
        assert rec.certified
        assert rec.discrepancy <= 1e-8 + sol.gap

    def test_prediction_bridge(self, demo_X, demo_y):
        prob, sol = solved_demo(demo_X, demo_y)
        rec = reconstruct_net(sol, prob, RegularizationConvention.from_beta(0.1))
        np.testing.assert_allclose(predict(rec.net, demo_X),
                                   fitted_values(prob, sol), atol=1e-10)

    def test_exact_balance(self, demo_X, demo_y):
        prob, sol = solved_demo(demo_X, demo_y)
        rec = reconstruct_net(sol, prob, RegularizationConvention.from_beta(0.1))
        gaps = np.abs(np.abs(rec.net.alpha) - np.linalg.norm(rec.net.W, axis=0))
        assert np.max(gaps, initial=0.0) <= 1e-12

    def test_convention_must_match(self, demo_X, demo_y):
        prob, sol = solved_demo(demo_X, demo_y)
        with pytest.raises(ValueError):
            reconstruct_net(sol, prob, RegularizationConvention.from_beta(0.2))

    def test_both_branches_give_two_neurons(self, demo_X, demo_y):
        report = enumerate_exact(demo_X)
        prob = build_problem(demo_X, demo_y, 1.0, report.patterns)
        u = [np.zeros(2) for _ in range(prob.G)]
        v = [np.zeros(2) for _ in range(prob.G)]
        u[2] = np.array([1.0, 0.0])
        v[2] = np.array([0.5, 0.5])
        sol = GroupLassoSolution(tuple(u), tuple(v), 0.0, 0.0, 0, 2, True)
        rec = reconstruct_net(sol, prob, RegularizationConvention.from_beta(1.0))
        assert rec.width == 2
        assert rec.net.alpha[0] > 0 > rec.net.alpha[1]


class TestChamberConsistency:
    def test_solved_instances(self, demo_X, demo_y):
        prob, sol = solved_demo(demo_X, demo_y)
        rec = reconstruct_net(sol, prob, RegularizationConvention.from_beta(0.1))
        assert verify_chamber_consistency(rec, prob, 1e-8)

    def test_interior_neuron_realizes_pattern(self):
        rng = np.random.default_rng(17)
        X = DataMatrix(rng.standard_normal((2, 5)))
        report = enumerate_exact(X)
        # pick a pattern with a strict witness and plant it as the solution
        for pat, w in zip(report.patterns, report.witnesses):
            margins = (2.0 * pat.as_array() - 1.0) * (X.entries.T @ w)
            if np.min(margins) > 1e-6:
                break
        ps = PatternSet((pat,))
        prob = build_problem(X, np.ones(5), 1.0, ps)
        sol = GroupLassoSolution((w.copy(),), (np.zeros(2),), 0.0, 0.0, 0, 1, True)
        rec = reconstruct_net(sol, prob, RegularizationConvention.from_beta(1.0))
        assert verify_chamber_consistency(rec, prob, 1e-10)
        realized = X.entries.T @ rec.net.W[:, 0] > 1e-10
        assert tuple(int(b) for b in realized) == pat.bits

    def test_boundary_group_support_containment(self, demo_X, demo_y):
        # weight orthogonal to the third point sits on the chamber boundary
        pat = ActivationPattern((1, 1, 0))
        ps = PatternSet((pat,))
        prob = build_problem(demo_X, demo_y, 1.0, ps)
        w = np.array([0.0, 1.0])  # x3 = (1, 0) gives margin exactly 0
        sol = GroupLassoSolution((w,), (np.zeros(2),), 0.0, 0.0, 0, 1, True)
        rec = reconstruct_net(sol, prob, RegularizationConvention.from_beta(1.0))
        assert verify_chamber_consistency(rec, prob, 1e-10)

    def test_detects_foreign_weight(self, demo_X, demo_y):
        pat = ActivationPattern((1, 1, 0))
        ps = PatternSet((pat,))
        prob = build_problem(demo_X, demo_y, 1.0, ps)
        w = np.array([1.0, -2.0])  # realizes (0, 0, 1), not (1, 1, 0)
        sol = GroupLassoSolution((w,), (np.zeros(2),), 0.0, 0.0, 0, 1, True)
        rec = reconstruct_net(sol, prob, RegularizationConvention.from_beta(1.0))
        assert not verify_chamber_consistency(rec, prob, 1e-10)
