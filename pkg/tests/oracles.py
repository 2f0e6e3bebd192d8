"""Independent brute-force oracles shared by the test modules."""
import itertools

import numpy as np

from gpt_definetti import polyhedra
from gpt_definetti.solver import LinearProgram, solve


def full_tensor_level(problem, n):
    """Level-n value computed on the full tensor V_A ⊗ V_B^{⊗n} with explicit symmetry.

    Positivity is imposed on every ordered tuple of B facets, and permutation
    invariance of the B factors by equality constraints.
    """
    A, B = problem.A, problem.B
    dA, dB = A.dim, B.dim
    shape = (dA,) + (dB,) * n
    N = int(np.prod(shape))
    idx = np.arange(N).reshape(shape)
    eq_rows = []
    for perm in itertools.permutations(range(1, n + 1)):
        permuted = np.transpose(idx, (0,) + perm).ravel()
        for i, j in zip(idx.ravel(), permuted):
            if i < j:
                row = np.zeros(N)
                row[i], row[j] = 1.0, -1.0
                eq_rows.append(row)

    def product_row(fa, gs):
        out = fa
        for gb in gs:
            out = np.kron(out, gb)
        return out

    eq_rows.append(product_row(A.unit, [B.unit] * n))
    b_eq = np.zeros(len(eq_rows))
    b_eq[-1] = 1.0
    ge_rows = [product_row(f, gs) for f in A.facets for gs in itertools.product(B.facets, repeat=n)]
    # P acts on (A, B_1), the unit on the remaining copies
    c = product_row(problem.P, [B.unit] * (n - 1))
    lp = LinearProgram(c=c, A_eq=np.array(eq_rows), b_eq=b_eq, A_ge=np.array(ge_rows),
                       b_ge=np.zeros(len(ge_rows)), name="full_tensor")
    return solve(lp, raise_on_failure=True).value


def feasible_vertices(K, F=None, G=None):
    """Vertices of K ∩ {F x = 0, G x >= 0}."""
    facets = K.facets if G is None or len(G) == 0 else np.vstack([K.facets, G])
    E = None if F is None or len(F) == 0 else np.atleast_2d(F)
    rays = polyhedra.extreme_rays(facets, E=E)
    scale = rays @ K.unit
    return rays[scale > 1e-12] / scale[scale > 1e-12, None]


def product_optimum(problem):
    """min P(x_A ⊗ x_B) over feasible product states, by vertex-pair enumeration."""
    VA = feasible_vertices(problem.A, problem.F_A, problem.G_A)
    VB = feasible_vertices(problem.B, problem.F_B, problem.G_B)
    return float((VA @ problem.P_matrix @ VB.T).min())


def strategy_value(G):
    """Classical value by enumerating all deterministic strategy pairs."""
    nA, nB, nX, nY = G.V.shape
    g = G.g
    best = 0.0
    for fa in itertools.product(range(nA), repeat=nX):
        for fb in itertools.product(range(nB), repeat=nY):
            best = max(best, sum(g[fa[x], fb[y], x, y] for x in range(nX) for y in range(nY)))
    return best
