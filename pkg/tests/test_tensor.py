import itertools
import math

import numpy as np
import pytest

from gpt_definetti import geometry as g
from gpt_definetti import tensor as t
from gpt_definetti.config import override
from gpt_definetti.exceptions import DimensionOverflow
from gpt_definetti.hierarchy import LocalProblem, build_level
from gpt_definetti.solver import solve_optimal

from oracles import full_tensor_level

PAIRS = [(g.simplex(2), g.simplex(2)), (g.simplex(2), g.square()), (g.square(), g.square()),
         (g.simplex(3), g.square()), (g.polygon(5), g.simplex(3))]


def random_sym(rng, n, dA, dB):
    return t.SymExtension(n, dA, dB, rng.normal(size=(dA, t.sym_index(dB, n).size)))


@pytest.mark.parametrize("A, B", PAIRS, ids=lambda K: K.label)
def test_min_inside_max(A, B):
    P = t.max_tensor(A, B)
    assert (P.sep_generators @ P.facets.T).min() >= -1e-12
    assert np.allclose(P.sep_generators @ P.unit, 1)
    assert np.allclose(P.max_vertices @ P.unit, 1)


def test_simplex_products_are_nuclear():
    P = t.max_tensor(g.simplex(2), g.simplex(2))
    assert len(P.facets) == 4 and len(P.max_vertices) == 4
    P = t.max_tensor(g.simplex(2), g.square())
    assert len(P.max_vertices) == 8


def test_square_square_has_pr_boxes():
    P = t.max_tensor(g.square(), g.square())
    # 16 product vertices plus 8 PR-type boxes; frozen regression count
    assert len(P.max_vertices) == 24
    assert g.validate(P.as_state_space()).passed


def test_dimension_cap():
    with override(cap_dim=8):
        with pytest.raises(DimensionOverflow):
            t.max_tensor(g.square(), g.square())


def test_separable_distance():
    S = g.square()
    P = t.max_tensor(S, S)
    assert t.separable_distance(P, P.sep_generators[3]) == pytest.approx(0, abs=1e-9)
    assert t.separable_distance(P, P.sep_generators.mean(axis=0)) == pytest.approx(0, abs=1e-9)
    pr = [v for v in P.max_vertices if np.min(np.abs(P.sep_generators - v).sum(axis=1)) > 1e-6]
    assert len(pr) == 8
    # frozen regression value
    assert t.separable_distance(P, pr[0]) == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("d, n, size", [(3, 4, 15), (2, 1, 2), (2, 3, 4), (4, 8, 165)])
def test_sym_index_sizes(d, n, size):
    basis = t.sym_index(d, n)
    assert basis.size == size == math.comb(d + n - 1, n)
    assert basis.weights.sum() == d ** n


def test_sym_index_colex():
    assert t.sym_index(2, 3).multisets == ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1))


def test_sym_index_cap():
    with pytest.raises(DimensionOverflow):
        t.sym_index(2, 9)


def test_eval_sym_functional_small_cases():
    G = np.array([[0.3, -1.2], [2.0, 0.5]])
    assert t.eval_sym_functional(G, (1,), (0,)) == pytest.approx(G[1, 0])
    assert t.eval_sym_functional(G, (0, 0), (1, 1)) == pytest.approx(G[0, 1] ** 2)
    val = t.eval_sym_functional(G, (0, 1), (0, 1))
    assert val == pytest.approx(G[0, 0] * G[1, 1] + G[0, 1] * G[1, 0])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_pairing_matches_full_tensor(n):
    rng = np.random.default_rng(n)
    dB = 3
    y = random_sym(rng, n, 2, dB)
    full = y.to_full()
    gs = rng.normal(size=(n, dB))
    f = rng.normal(size=2)
    expected = full
    expected = np.tensordot(f, expected, axes=(0, 0))
    for gb in gs:
        expected = np.tensordot(gb, expected, axes=(0, 0))
    assert y.evaluate(f, gs) == pytest.approx(float(expected))
    # the permanent formula agrees with the polynomial expansion
    rows, J = t.sym_multiset_rows(gs, n)
    basis = t.sym_index(dB, n)
    for j, ms in enumerate(J.multisets):
        for i, m in enumerate(basis.multisets):
            assert rows[j, i] == pytest.approx(t.eval_sym_functional(gs, ms, m))


def test_partial_unit_product_state():
    S = g.square()
    rng = np.random.default_rng(0)
    xa, xb = g.simplex(3).random_state(rng), S.random_state(rng)
    y = t.SymExtension.product(xa, xb, 4)
    for keep in range(5):
        z = t.partial_unit(y, keep, S.unit)
        assert np.allclose(z.coeffs, t.SymExtension.product(xa, xb, keep).coeffs)
    assert np.allclose(t.partial_unit(y, 0, S.unit).coeffs[:, 0], xa)


def test_partial_unit_matches_full_tensor():
    rng = np.random.default_rng(4)
    y = random_sym(rng, 3, 2, 3)
    u = rng.normal(size=3)
    expected = np.einsum("abcd,c,d->ab", y.to_full(), u, u)
    assert np.allclose(t.partial_unit(y, 1, u).coeffs, expected)
    assert t.partial_unit(y, 3, u) is y


def test_apply_on_first_factor_matches_full_tensor():
    rng = np.random.default_rng(5)
    y = random_sym(rng, 2, 2, 3)
    L = rng.normal(size=(4, 3))
    z = t.apply_on_first_factor(L, y)
    expected = np.einsum("wk,akc->awc", L, y.to_full())
    assert np.allclose(z, expected)
    # identity: the embedding Sym^2 -> V_B ⊗ Sym^1 reproduces the full tensor
    assert np.allclose(t.apply_on_first_factor(np.eye(3), y), y.to_full())


def test_apply_unit_equals_partial_unit():
    rng = np.random.default_rng(6)
    y = random_sym(rng, 3, 2, 3)
    u = rng.normal(size=3)
    z = t.apply_on_first_factor(u[None, :], y)[:, 0, :]
    assert np.allclose(z, t.partial_unit(y, 2, u).coeffs)


def test_partial_unit_commutes_with_first_factor_map():
    rng = np.random.default_rng(7)
    y = random_sym(rng, 3, 2, 3)
    u, L = rng.normal(size=3), rng.normal(size=(2, 3))
    a = t.apply_on_first_factor(L, t.partial_unit(y, 2, u))
    b = np.stack([t.partial_unit(t.SymExtension(2, 2, 3, z), 1, u).coeffs
                  for z in np.moveaxis(t.apply_on_first_factor(L, y), 1, 0)], axis=1)
    assert np.allclose(a, b)


def test_normalization_conserved():
    S = g.square()
    rng = np.random.default_rng(8)
    y = random_sym(rng, 3, 3, 3)
    value = y.unit_value(S.unit, S.unit)
    for keep in range(4):
        assert t.partial_unit(y, keep, S.unit).unit_value(S.unit, S.unit) == pytest.approx(value)


def test_full_round_trip():
    rng = np.random.default_rng(9)
    y = random_sym(rng, 3, 2, 2)
    assert np.allclose(t.SymExtension.from_full(y.to_full()).coeffs, y.coeffs)


@pytest.mark.parametrize("seed", range(10))
def test_symmetric_lp_matches_full_tensor_lp(seed):
    rng = np.random.default_rng(seed)
    spaces = [g.simplex(2), g.simplex(3), g.square()]
    A, B = spaces[rng.integers(3)], spaces[rng.integers(3)]
    prob = LocalProblem(A, B, rng.normal(size=A.dim * B.dim))
    for n in (2, 3):
        assert solve_optimal(build_level(prob, n)).value == pytest.approx(full_tensor_level(prob, n), abs=1e-7)


def test_from_affine_examples():
    D = g.simplex(2)
    assert np.allclose(t.from_affine(np.eye(2), np.zeros(2), D), np.eye(2))
    c = np.array([0.3, 0.7])
    const = t.from_affine(np.zeros((2, 2)), c, D)
    assert np.allclose(const, np.outer(c, D.unit))
    F = t.from_affine([[2.0, 0.0]], -1.0, D)
    assert np.allclose(F @ D.vertices.T, [[1.0, -1.0]])


def test_from_affine_chart_coordinates():
    S = g.square()
    # x -> x_1 + 0.5 on the chart (x_1, x_2)
    F = t.from_affine([[1.0, 0.0]], 0.5, S)
    assert np.allclose(F @ S.vertices.T, S.vertices[:, 1] + 0.5)


def test_product_marginals():
    S = g.square()
    P = t.max_tensor(g.simplex(3), S)
    rng = np.random.default_rng(10)
    xa, xb = g.simplex(3).random_state(rng), S.random_state(rng)
    x = P.product(xa, xb)
    assert np.allclose(P.marginal_A(x), xa) and np.allclose(P.marginal_B(x), xb)
    assert P.is_state(x)
    for v in itertools.islice(P.max_vertices, 5):
        assert P.is_state(v)
