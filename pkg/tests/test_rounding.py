import numpy as np
import pytest

from gpt_definetti import geometry as g
from gpt_definetti import hierarchy as h
from gpt_definetti import rounding as r
from gpt_definetti.cli import pr_box_problem
from gpt_definetti.exceptions import EnumerationOverflow, NoFeasibleTerm
from gpt_definetti.config import override
from gpt_definetti.tensor import SymExtension, partial_unit

from oracles import product_optimum


def test_product_state_conditionals_are_trivial():
    S, T = g.simplex(3), g.square()
    rng = np.random.default_rng(0)
    xa, xb = T.random_state(rng), S.random_state(rng)
    y = SymExtension.product(xa, xb, 3)
    M = g.ic_measurement(S)
    for m in range(3):
        ens = r.conditionals(y, M, m, T.unit, S.unit)
        assert ens.total_probability == pytest.approx(1.0)
        for o in ens.outcomes:
            assert np.allclose(o.x_A, xa) and np.allclose(o.x_B, xb)


def test_m_zero_gives_marginals():
    prob = pr_box_problem()
    rep = h.solve_level(prob, 2)
    ens = r.conditionals(rep.y_opt, g.ic_measurement(prob.B), 0, prob.A.unit, prob.B.unit)
    assert len(ens.outcomes) == 1 and ens.outcomes[0].z == ()
    X = rep.x_AB.reshape(3, 3)
    assert np.allclose(ens.outcomes[0].x_A, X @ prob.B.unit)
    assert np.allclose(ens.outcomes[0].x_B, prob.A.unit @ X)


def test_bayes_posteriors():
    # classical A and two classical B copies: y[a, b1, b2] = p(a) p(b1|a) p(b2|a)
    D = g.simplex(2)
    pa = np.array([0.3, 0.7])
    pb = np.array([[0.9, 0.1], [0.2, 0.8]])
    full = np.einsum("a,ab,ac->abc", pa, pb, pb)
    y = SymExtension.from_full(full)
    ens = r.conditionals(y, g.Measurement(np.eye(2), D), 1, D.unit, D.unit)
    for o in ens.outcomes:
        b = o.z[0]
        joint = pa * pb[:, b]
        assert o.probability == pytest.approx(joint.sum())
        assert np.allclose(o.x_A, joint / joint.sum())
        assert np.allclose(o.x_B, (joint / joint.sum()) @ pb)


@pytest.mark.parametrize("seed", range(3))
def test_marginal_reconstruction(seed):
    rng = np.random.default_rng(seed)
    S = g.square()
    prob = h.LocalProblem(S, S, rng.normal(size=9))
    rep = h.solve_level(prob, 4)
    M = g.ic_measurement(S)
    xa = partial_unit(rep.y_opt, 0, S.unit).coeffs[:, 0]
    for m in range(4):
        ens = r.conditionals(rep.y_opt, M, m, S.unit, S.unit)
        assert ens.total_probability + ens.dropped_mass == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(ens.mean_A(), xa, atol=1e-8)
        for o in ens.outcomes:
            assert S.contains(o.x_A, 1e-8) and S.contains(o.x_B, 1e-8)


def test_outcome_cap():
    prob = pr_box_problem()
    rep = h.solve_level(prob, 4)
    with override(cap_enum=3):
        with pytest.raises(EnumerationOverflow):
            r.conditionals(rep.y_opt, g.ic_measurement(prob.B), 3, prob.A.unit, prob.B.unit)


def test_unconstrained_sandwich():
    prob = pr_box_problem()
    sep = product_optimum(prob)
    for n in (1, 2, 4):
        rep = h.solve_level(prob, n)
        inner = r.inner_search(prob, rep)
        assert rep.p_n - 1e-9 <= sep <= inner.best_value + 1e-9
        assert inner.gap_to_outer <= inner.certified_bound + 1e-9
        assert inner.certified_bound == pytest.approx(rep.error_bound)


def test_pinned_coordinate_propagates():
    S = g.square()
    rng = np.random.default_rng(3)
    FA = np.array([[0.0, 1.0, 0.0]]) - S.unit  # x_1 = 1 pins x_A to an edge
    FA = np.vstack([FA, np.array([0.0, 0.0, 1.0]) - S.unit])  # and x_2 = 1, a vertex
    prob = h.LocalProblem(S, S, rng.normal(size=9), F_A=FA)
    rep = h.solve_level(prob, 3)
    inner = r.inner_search(prob, rep)
    assert np.allclose(inner.best_point[0], [1, 1, 1], atol=1e-7)


def test_mixture_value_is_average():
    rng = np.random.default_rng(4)
    S = g.square()
    prob = h.LocalProblem(S, S, rng.normal(size=9))
    rep = h.solve_level(prob, 3)
    inner = r.inner_search(prob, rep)
    ens = r.conditionals(rep.y_opt, g.ic_measurement(S), inner.m_star, S.unit, S.unit)
    avg = sum(o.probability * prob.objective(o.x_A, o.x_B) for o in ens.outcomes) / ens.total_probability
    assert inner.mixture_value == pytest.approx(avg)
    assert inner.mixture_value >= inner.best_value - 1e-12


def test_no_feasible_term():
    prob = pr_box_problem()
    rep = h.solve_level(prob, 2)
    with pytest.raises(NoFeasibleTerm):
        r.inner_search(prob, rep, feas_tol=-1.0)
