"""Tensor products of state spaces and the symmetric-subspace representation.

Elements of ``V_A ⊗ Sym^n(V_B)`` are stored as arrays ``y[a, m]`` where ``m``
indexes multisets of size ``n`` over the ``d_B`` coordinates of ``V_B``.  The
entry is the coefficient of the full tensor at *any* ordering of ``m``:

    Y[a, k_1, ..., k_n] = y[a, multiset(k_1, ..., k_n)]

so a product functional ``f ⊗ g_1 ⊗ ... ⊗ g_n`` evaluates to
``sum_a f[a] sum_m y[a, m] c[m]`` with ``c[m]`` the sum over the orderings of
``m`` of ``prod_t g_t[k_t]`` (a permanent divided by the multiplicities).
"""
from __future__ import annotations

import dataclasses
import functools
import itertools
import math

import numpy as np

from . import polyhedra
from .config import settings
from .exceptions import DimensionOverflow, InvalidStateSpace
from .geometry import StateSpace
from .solver import LinearProgram, solve_optimal


# --------------------------------------------------------------------------
# product spaces
# --------------------------------------------------------------------------


class ProductSpace:
    """``K_A ⊗̂ K_B`` described by product facets, plus its separable generators.

    ``max_vertices`` is computed on first access by double description.
    """

    def __init__(self, A, B):
        self.A = A
        self.B = B
        self.facets = np.array([np.kron(f, g) for f in A.facets for g in B.facets])
        self.unit = np.kron(A.unit, B.unit)
        self.sep_generators = np.array([np.kron(v, w) for v in A.vertices for w in B.vertices])
        self._max_vertices = None
        self._state_space = None

    @property
    def dim(self):
        return self.unit.size

    @property
    def label(self):
        return f"{self.A.label}⊗̂{self.B.label}"

    @property
    def max_vertices(self):
        if self._max_vertices is None:
            rays = polyhedra.cached_extreme_rays(self.facets, tag="max_tensor")
            self._max_vertices = rays / (rays @ self.unit)[:, None]
        return self._max_vertices

    def as_state_space(self):
        """The maximal tensor product as a :class:`StateSpace`."""
        if self._state_space is None:
            self._state_space = StateSpace(self.max_vertices, self.facets, self.unit, label=self.label)
        return self._state_space

    def product(self, x_A, x_B):
        return np.kron(x_A, x_B)

    def marginal_A(self, x):
        return np.asarray(x).reshape(self.A.dim, self.B.dim) @ self.B.unit

    def marginal_B(self, x):
        return self.A.unit @ np.asarray(x).reshape(self.A.dim, self.B.dim)

    def is_state(self, x, tol=None):
        tol = settings.tol if tol is None else tol
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.facets @ x >= -tol) and abs(self.unit @ x - 1) <= tol)

    def __repr__(self):
        return f"ProductSpace({self.label}, dim={self.dim})"


def max_tensor(A, B):
    """Maximal tensor product of two state spaces."""
    if A.dim * B.dim > settings.cap_dim:
        raise DimensionOverflow(f"d_A * d_B = {A.dim * B.dim} exceeds cap {settings.cap_dim}")
    return ProductSpace(A, B)


def separable_distance(P, x):
    """Base-norm distance (w.r.t. ``K_A ⊗̂ K_B``) from ``x`` to the separable states.

    One LP: ``min u(p) + u(q)`` s.t. ``x - S w = p - q``, ``w`` in the
    probability simplex, ``p, q`` in the max-tensor cone.
    """
    x = np.asarray(x, dtype=float)
    S = P.sep_generators.T
    D, k = S.shape
    F = P.facets
    nf = F.shape[0]
    # variables: w (k), p (D), q (D)
    c = np.concatenate([np.zeros(k), P.unit, P.unit])
    A_eq = np.vstack([
        np.hstack([S, np.eye(D), -np.eye(D)]),
        np.concatenate([np.ones(k), np.zeros(2 * D)])[None, :],
    ])
    b_eq = np.concatenate([x, [1.0]])
    A_ge = np.vstack([
        np.hstack([np.zeros((nf, k)), F, np.zeros((nf, D))]),
        np.hstack([np.zeros((nf, k)), np.zeros((nf, D)), F]),
    ])
    lp = LinearProgram(c, A_eq, b_eq, A_ge, np.zeros(2 * nf),
                       bounds=[(0, None)] * k + [(None, None)] * (2 * D), name="separable_distance")
    return max(0.0, float(solve_optimal(lp).value))


# --------------------------------------------------------------------------
# symmetric basis
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class SymBasis:
    """Multisets of size ``n`` over ``d`` symbols in colex order."""

    d: int
    n: int
    multisets: tuple
    counts: np.ndarray
    index: dict
    weights: np.ndarray  # number of orderings of each multiset

    @property
    def size(self):
        return len(self.multisets)


@functools.lru_cache(maxsize=256)
def sym_index(d, n):
    """Catalog of multisets of size ``n`` over ``d`` symbols (colex order)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    size = math.comb(d + n - 1, n) if n else 1
    if n > settings.cap_sym or size > settings.cap_enum * 64:
        raise DimensionOverflow(f"symmetric basis of size {size} (n={n}) exceeds caps")
    ms = sorted(itertools.combinations_with_replacement(range(d), n), key=lambda m: m[::-1])
    counts = np.zeros((len(ms), d), dtype=int)
    for i, m in enumerate(ms):
        for k in m:
            counts[i, k] += 1
    weights = np.array([math.factorial(n) // math.prod(math.factorial(c) for c in row) for row in counts], dtype=float)
    return SymBasis(d, n, tuple(ms), counts, {m: i for i, m in enumerate(ms)}, weights)


@functools.lru_cache(maxsize=256)
def _successor(d, n):
    """``succ[i, k]`` = index (size ``n+1``) of multiset ``i`` (size ``n``) plus symbol ``k``."""
    lo, hi = sym_index(d, n), sym_index(d, n + 1)
    succ = np.empty((lo.size, d), dtype=int)
    for i, m in enumerate(lo.multisets):
        for k in range(d):
            succ[i, k] = hi.index[tuple(sorted(m + (k,)))]
    return succ


def _permanent(M):
    n = M.shape[0]
    if n == 0:
        return 1.0
    rows = np.arange(n)
    return float(sum(np.prod(M[rows, list(p)]) for p in itertools.permutations(range(n))))


def eval_sym_functional(covectors, g_multiset, e_multiset):
    """Pairing of ``g_{j_1} ⊗ ... ⊗ g_{j_n}`` with the symmetric basis element of ``e_multiset``.

    ``covectors`` holds the ``g_j`` as rows; basis vectors are coordinate vectors
    of ``V_B``.  Direct enumeration of the permanent (``n <= 8``).
    """
    g_multiset, e_multiset = tuple(g_multiset), tuple(e_multiset)
    n = len(g_multiset)
    if n != len(e_multiset):
        raise ValueError("multisets must have equal size")
    if n > settings.cap_sym:
        raise DimensionOverflow(f"n={n} exceeds the enumeration cap {settings.cap_sym}")
    G = np.asarray(covectors, dtype=float)
    M = G[np.ix_(g_multiset, e_multiset)]
    mult = math.prod(math.factorial(e_multiset.count(k)) for k in set(e_multiset))
    return _permanent(M) / mult


def sym_product_coeffs(covectors_seq, d):
    """Coefficient vector ``c[m]`` of the product functional ``g_1 ⊗ ... ⊗ g_n``.

    Expands ``prod_t (sum_k g_t[k] z_k)``; the coefficient of the monomial with
    multiplicities of ``m`` is exactly the pairing with the basis element ``m``.
    """
    poly = np.ones(1)
    for r, g in enumerate(covectors_seq):
        succ = _successor(d, r)
        nxt = np.zeros(sym_index(d, r + 1).size)
        np.add.at(nxt, succ, poly[:, None] * np.asarray(g, dtype=float)[None, :])
        poly = nxt
    return poly


def sym_multiset_rows(covectors, n, d=None):
    """Rows ``c_J`` for every multiset ``J`` of size ``n`` over the given covectors.

    Returns ``(rows, J_basis)`` where ``rows[j]`` is the coefficient vector of
    the product of covectors in ``J_basis.multisets[j]``.  Shared prefixes are
    expanded once.
    """
    G = np.atleast_2d(np.asarray(covectors, dtype=float))
    d = G.shape[1] if d is None else d
    J = sym_index(G.shape[0], n)
    rows = np.empty((J.size, sym_index(d, n).size))
    cache = {(): np.ones(1)}
    for j, ms in enumerate(J.multisets):
        # multisets are sorted tuples; build from the longest cached prefix
        for cut in range(len(ms), -1, -1):
            if ms[:cut] in cache:
                break
        poly = cache[ms[:cut]]
        for r in range(cut, len(ms)):
            succ = _successor(d, r)
            nxt = np.zeros(sym_index(d, r + 1).size)
            np.add.at(nxt, succ, poly[:, None] * G[ms[r]][None, :])
            poly = nxt
            if r + 1 < len(ms):
                cache[ms[: r + 1]] = poly
        rows[j] = poly
    return rows, J


# --------------------------------------------------------------------------
# symmetric extensions
# --------------------------------------------------------------------------


@dataclasses.dataclass(eq=False)
class SymExtension:
    """Element of ``V_A ⊗ Sym^n(V_B)``; ``coeffs`` has shape ``(d_A, C(d_B+n-1, n))``."""

    n: int
    d_A: int
    d_B: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(self.d_A, sym_index(self.d_B, self.n).size)
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite extension coefficients")

    @property
    def basis(self):
        return sym_index(self.d_B, self.n)

    @classmethod
    def product(cls, x_A, x_B, n):
        """``x_A ⊗ x_B^{⊗n}``."""
        x_A, x_B = np.asarray(x_A, dtype=float), np.asarray(x_B, dtype=float)
        basis = sym_index(x_B.size, n)
        col = np.array([np.prod(x_B[list(m)]) if m else 1.0 for m in basis.multisets])
        return cls(n, x_A.size, x_B.size, np.outer(x_A, col))

    @classmethod
    def from_vector(cls, vec, n, d_A, d_B):
        return cls(n, d_A, d_B, np.asarray(vec).reshape(d_A, -1))

    def vector(self):
        return self.coeffs.ravel()

    def evaluate(self, f_A, covectors_B):
        """Value of ``f_A ⊗ g_1 ⊗ ... ⊗ g_n`` on ``y``."""
        c = sym_product_coeffs(covectors_B, self.d_B)
        return float(np.asarray(f_A) @ self.coeffs @ c)

    def unit_value(self, u_A, u_B):
        return self.evaluate(u_A, [u_B] * self.n)

    def to_full(self):
        """Dense tensor of shape ``(d_A, d_B, ..., d_B)`` (test oracle, small sizes only)."""
        if self.d_B ** self.n * self.d_A > 10 ** 6:
            raise DimensionOverflow("full tensor too large")
        full = np.empty((self.d_A,) + (self.d_B,) * self.n)
        idx = self.basis.index
        for k in itertools.product(range(self.d_B), repeat=self.n):
            full[(slice(None),) + k] = self.coeffs[:, idx[tuple(sorted(k))]]
        return full

    @classmethod
    def from_full(cls, full):
        """Read off a permutation-invariant dense tensor (no symmetry check)."""
        d_A = full.shape[0]
        n = full.ndim - 1
        d_B = full.shape[1] if n else 1
        basis = sym_index(d_B, n)
        coeffs = np.array([[full[(a,) + m] for m in basis.multisets] for a in range(d_A)])
        return cls(n, d_A, d_B, coeffs)


def contract_first(y, L):
    """``(id_A ⊗ L ⊗ id)(y)`` as an array of shape ``(d_A, W, C(d_B+n-2, n-1))``."""
    if y.n < 1:
        raise ValueError("nothing to contract: n = 0")
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if L.shape[1] != y.d_B:
        raise ValueError(f"map has {L.shape[1]} columns, expected {y.d_B}")
    succ = _successor(y.d_B, y.n - 1)  # (K_{n-1}, d_B)
    gathered = y.coeffs[:, succ]  # (d_A, K_{n-1}, d_B)
    return np.einsum("wk,amk->awm", L, gathered)


def apply_on_first_factor(L, y):
    """Apply a linear map ``L: V_B -> W`` to one B factor of ``y``.

    By permutation invariance the choice of factor does not matter.  Returns an
    array ``z[a, w, m']`` over ``V_A ⊗ W ⊗ Sym^{n-1}(V_B)``.
    """
    return contract_first(y, L)


def partial_unit(y, keep, u_B):
    """Apply the B unit to ``n - keep`` factors, returning a :class:`SymExtension` with ``n = keep``."""
    if not 0 <= keep <= y.n:
        raise ValueError(f"keep must lie in [0, {y.n}]")
    cur = y
    u_B = np.asarray(u_B, dtype=float)
    while cur.n > keep:
        z = contract_first(cur, u_B[None, :])[:, 0, :]
        cur = SymExtension(cur.n - 1, cur.d_A, cur.d_B, z)
    return cur


def bipartite_marginal(y, u_B):
    """The ``n = 1`` marginal as a flat vector in ``V_A ⊗ V_B``."""
    return partial_unit(y, 1, u_B).coeffs.ravel()


# --------------------------------------------------------------------------
# affine maps
# --------------------------------------------------------------------------


def from_affine(matrix, offset, K):
    """Homogenize ``x -> matrix @ x + offset`` on ``K``.

    ``matrix`` acts on homogeneous coordinates (``d`` columns).  If it has
    ``d - 1`` columns and the unit is a coordinate covector, the unit
    coordinate is treated as absent from the affine chart.  The result ``F``
    satisfies ``F @ v == matrix @ v + offset`` for every state ``v``.
    """
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    c = np.atleast_1d(np.asarray(offset, dtype=float))
    d = K.dim
    if M.shape[1] == d - 1:
        pivots = np.flatnonzero(K.unit)
        if pivots.size != 1 or not np.isclose(K.unit[pivots[0]], 1.0):
            raise InvalidStateSpace("affine chart requires the unit to be a coordinate covector")
        M = np.insert(M, pivots[0], 0.0, axis=1)
    if M.shape[1] != d:
        raise ValueError(f"affine map has {M.shape[1]} columns, expected {d} or {d - 1}")
    if c.size == 1 and M.shape[0] != 1:
        c = np.full(M.shape[0], c[0])
    return M + np.outer(c, K.unit)
