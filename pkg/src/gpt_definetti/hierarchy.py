"""Outer relaxations of bilinear programs over two state spaces.

The problem is

    min P(x_A ⊗ x_B)  s.t.  F_A x_A = 0, F_B x_B = 0, G_A x_A >= 0, G_B x_B >= 0,

with ``x_A, x_B`` states.  Level ``n`` replaces the product by a symmetric
extension ``y`` in ``V_A ⊗ Sym^n(V_B)`` that is positive on every product of
facets, normalized, and obeys the lifted constraints; the objective is taken
on its one-copy marginal.  Inequalities are understood componentwise.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os

import numpy as np

from . import polyhedra
from .config import settings
from .entropy import DeFinettiConstants, definetti_constants
from .exceptions import (
    Degenerate,
    EnumerationOverflow,
    InfeasibleRelaxation,
    LiftInconsistent,
    SolverError,
)
from .geometry import StateSpace, ic_measurement, irredundant_facets
from .solver import LinearProgram, Status, solve
from .tensor import SymExtension, _successor, max_tensor, sym_index, sym_multiset_rows, sym_product_coeffs


def _block(M, cols):
    if M is None:
        return np.zeros((0, cols))
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros((0, cols))
    return np.atleast_2d(M)


@dataclasses.dataclass(eq=False)
class LocalProblem:
    """Minimize ``P`` on ``K_A ⊗ K_B`` under local linear constraints (homogeneous coordinates)."""

    A: StateSpace
    B: StateSpace
    P: np.ndarray
    F_A: np.ndarray | None = None
    F_B: np.ndarray | None = None
    G_A: np.ndarray | None = None
    G_B: np.ndarray | None = None
    name: str = "problem"

    def __post_init__(self):
        dA, dB = self.A.dim, self.B.dim
        self.P = np.asarray(self.P, dtype=float).reshape(dA * dB)
        self.F_A, self.G_A = _block(self.F_A, dA), _block(self.G_A, dA)
        self.F_B, self.G_B = _block(self.F_B, dB), _block(self.G_B, dB)
        for M, d, label in ((self.F_A, dA, "F_A"), (self.G_A, dA, "G_A"), (self.F_B, dB, "F_B"), (self.G_B, dB, "G_B")):
            if M.shape[1] != d:
                raise ValueError(f"{label} has {M.shape[1]} columns, expected {d}")
        if not all(np.all(np.isfinite(M)) for M in (self.P, self.F_A, self.F_B, self.G_A, self.G_B)):
            raise ValueError("non-finite problem data")

    @property
    def P_matrix(self):
        return self.P.reshape(self.A.dim, self.B.dim)

    def objective(self, x_A, x_B):
        return float(np.asarray(x_A) @ self.P_matrix @ np.asarray(x_B))

    def residuals(self, x_A, x_B):
        """Worst equality violation and worst inequality shortfall of a product pair."""
        x_A, x_B = np.asarray(x_A, dtype=float), np.asarray(x_B, dtype=float)
        eq = np.concatenate([self.F_A @ x_A, self.F_B @ x_B])
        ge = np.concatenate([self.G_A @ x_A, self.G_B @ x_B, self.A.facets @ x_A, self.B.facets @ x_B])
        return {
            "eq": float(np.abs(eq).max()) if eq.size else 0.0,
            "ineq": float(max(0.0, -ge.min())) if ge.size else 0.0,
            "unit": float(max(abs(self.A.unit @ x_A - 1), abs(self.B.unit @ x_B - 1))),
        }

    def to_dict(self):
        return {
            "name": self.name,
            "A": self.A.to_dict(),
            "B": self.B.to_dict(),
            "P": self.P.tolist(),
            "F_A": self.F_A.tolist(),
            "F_B": self.F_B.tolist(),
            "G_A": self.G_A.tolist(),
            "G_B": self.G_B.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            StateSpace.from_dict(d["A"]), StateSpace.from_dict(d["B"]), d["P"],
            d.get("F_A"), d.get("F_B"), d.get("G_A"), d.get("G_B"), d.get("name", "problem"),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def content_hash(self):
        return polyhedra.content_hash(
            self.A.vertices, self.A.facets, self.B.vertices, self.B.facets, self.P,
            self.F_A, self.F_B, self.G_A, self.G_B, extra="LocalProblem",
        )


# --------------------------------------------------------------------------
# level-n program
# --------------------------------------------------------------------------


def _objective_row(problem, n):
    u = problem.B.unit
    Pm = problem.P_matrix
    return np.concatenate([sym_product_coeffs([Pm[a]] + [u] * (n - 1), problem.B.dim) for a in range(problem.A.dim)])


def build_level(problem, n):
    """The level-``n`` LP; variables are the coefficients of ``y`` (A index major)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    A, B = problem.A, problem.B
    dA, dB = A.dim, B.dim
    Kn = sym_index(dB, n).size
    N = dA * Kn

    facet_rows, _ = sym_multiset_rows(B.facets, n, dB)  # B-facet multisets of size n
    ge_blocks = [np.kron(A.facets, facet_rows)]
    if problem.G_A.shape[0]:
        ge_blocks.append(np.kron(problem.G_A, facet_rows))
    if problem.G_B.shape[0]:
        lower, _ = sym_multiset_rows(B.facets, n - 1, dB)
        rows = []
        for g in problem.G_B:
            # product functional g ⊗ (facet multiset of size n-1)
            for c in lower:
                rows.append(_prepend_factor(g, c, dB, n))
        ge_blocks.append(np.kron(A.facets, np.array(rows)))
    A_ge = np.vstack(ge_blocks)

    norm = np.kron(A.unit, sym_product_coeffs([B.unit] * n, dB))
    eq_blocks = [norm[None, :]]
    b_eq = [1.0]
    if problem.F_A.shape[0]:
        blk = np.kron(problem.F_A, np.eye(Kn))
        eq_blocks.append(blk)
        b_eq += [0.0] * blk.shape[0]
    if problem.F_B.shape[0]:
        blk = _first_factor_matrix(problem.F_B, dA, dB, n)
        eq_blocks.append(blk)
        b_eq += [0.0] * blk.shape[0]
    A_eq = np.vstack(eq_blocks)

    if N > 200_000:
        raise EnumerationOverflow(f"level {n} has {N} variables")
    return LinearProgram(
        c=_objective_row(problem, n), A_eq=A_eq, b_eq=np.array(b_eq), A_ge=A_ge,
        b_ge=np.zeros(A_ge.shape[0]), sense="min", name=f"{problem.name}:level{n}",
    )


def _prepend_factor(g, c_lower, dB, n):
    """Coefficients of ``g ⊗ h`` where ``h`` has coefficients ``c_lower`` on ``Sym^{n-1}``.

    Symmetrizing ``g ⊗ h`` and pairing with the basis element ``m`` sums, over
    the symbols ``k`` of ``m``, ``g[k]`` times ``h`` at ``m - {k}``.
    """
    succ = _successor(dB, n - 1)
    out = np.zeros(sym_index(dB, n).size)
    np.add.at(out, succ, c_lower[:, None] * np.asarray(g, dtype=float)[None, :])
    return out


def _first_factor_matrix(L, dA, dB, n):
    """Matrix of ``y -> (id_A ⊗ L ⊗ id)(y)`` with output index ``(a, w, m')``."""
    L = np.atleast_2d(L)
    W = L.shape[0]
    succ = _successor(dB, n - 1)
    Kn, Km = sym_index(dB, n).size, succ.shape[0]
    M = np.zeros((dA, W, Km, dA, Kn))
    for a in range(dA):
        for w in range(W):
            for mp in range(Km):
                np.add.at(M[a, w, mp, a], succ[mp], L[w])
    return M.reshape(dA * W * Km, dA * Kn)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def _clean(v):
    """Round-trip-safe floats; negative zero becomes zero."""
    return float(v) + 0.0


@dataclasses.dataclass(eq=False)
class OuterReport:
    level: int
    p_n: float
    y_opt: SymExtension
    x_AB: np.ndarray
    error_bound: float
    P_norm: float
    constants: DeFinettiConstants
    stats: dict

    def to_dict(self):
        return {
            "level": self.level,
            "p_n": _clean(self.p_n),
            "x_AB": [_clean(v) for v in self.x_AB],
            "error_bound": _clean(self.error_bound),
            "P_norm": _clean(self.P_norm),
            "constants": self.constants.to_dict(),
            "stats": self.stats,
        }


def order_unit_norm(problem):
    """``max |P(x)|`` over the maximal tensor product, from two LPs over its facets."""
    P = max_tensor(problem.A, problem.B)
    vals = []
    for sense in ("max", "min"):
        lp = LinearProgram(c=problem.P, A_eq=P.unit[None, :], b_eq=[1.0], A_ge=P.facets,
                           b_ge=np.zeros(len(P.facets)), sense=sense, name="P_norm")
        vals.append(abs(solve(lp, raise_on_failure=True).value))
    return max(vals)


EXACT_PRODUCT_DIM = 16


def problem_constants(problem, M_A=None, M_B=None):
    """de Finetti constants for the problem's pair of state spaces."""
    M_A = ic_measurement(problem.A) if M_A is None else M_A
    M_B = ic_measurement(problem.B) if M_B is None else M_B
    verts = None
    # exact enumeration of the product vertices is only attempted for small products
    if problem.A.dim * problem.B.dim <= EXACT_PRODUCT_DIM:
        try:
            verts = max_tensor(problem.A, problem.B).max_vertices
        except (EnumerationOverflow, Degenerate):
            verts = None
    return definetti_constants(problem.A, problem.B, M_A, M_B, product_vertices=verts)


def solve_level(problem, n, constants=None, P_norm=None):
    """Solve level ``n``; raises :class:`InfeasibleRelaxation` if it is empty."""
    lp = build_level(problem, n)
    sol = solve(lp)
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleRelaxation(f"level {n} relaxation is infeasible, so is the problem")
    if sol.status is not Status.OPTIMAL:
        raise SolverError(f"level {n}: {sol.status.value} ({sol.message})", sol)
    constants = problem_constants(problem) if constants is None else constants
    P_norm = order_unit_norm(problem) if P_norm is None else P_norm
    y = SymExtension(n, problem.A.dim, problem.B.dim, sol.x.reshape(problem.A.dim, -1))
    from .tensor import bipartite_marginal

    x_AB = bipartite_marginal(y, problem.B.unit)
    stats = {
        "variables": lp.n_vars,
        "eq_rows": int(lp.A_eq.shape[0]),
        "ge_rows": int(lp.A_ge.shape[0]),
        "residual": _clean(sol.residual),
        "backend": sol.backend,
    }
    bound = 2.0 * P_norm * constants.c_AB / math.sqrt(n)
    return OuterReport(n, float(sol.value), y, x_AB, bound, P_norm, constants, stats)


def run_schedule(problem, n_max, out_dir=None, tol=None, constants=None):
    """Levels ``1..n_max`` in order, checking that the bounds never decrease.

    Each report is written to ``out_dir`` (if given) as
    ``<problem hash>-level<n>.json``.  On failure the reports computed so far
    are attached to the exception as ``partial``.
    """
    tol = settings.tol if tol is None else tol
    constants = problem_constants(problem) if constants is None else constants
    P_norm = order_unit_norm(problem)
    key = problem.content_hash()
    reports = []
    for n in range(1, n_max + 1):
        try:
            rep = solve_level(problem, n, constants, P_norm)
            if reports and rep.p_n < reports[-1].p_n - tol:
                raise SolverError(f"outer bound decreased from level {n - 1} to {n}")
        except Exception as exc:
            exc.partial = reports
            raise
        reports.append(rep)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, f"{key}-level{n}.json"), "w") as fh:
                json.dump(rep.to_dict(), fh, sort_keys=True, indent=1)
    return reports


# --------------------------------------------------------------------------
# lifts
# --------------------------------------------------------------------------


@dataclasses.dataclass(eq=False)
class LiftData:
    """One side of a lift: ``K = T(C ∩ {R y = r})`` with ``C = {y : cone_facets @ y >= 0}``."""

    cone_facets: np.ndarray
    T: np.ndarray
    R: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.cone_facets = np.atleast_2d(np.asarray(self.cone_facets, dtype=float))
        self.T = np.atleast_2d(np.asarray(self.T, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.r = np.atleast_1d(np.asarray(self.r, dtype=float))
        D = self.cone_facets.shape[1]
        if self.T.shape[1] != D or self.R.shape[1] != D or self.R.shape[0] != self.r.size:
            raise ValueError("inconsistent lift dimensions")

    @classmethod
    def identity(cls, K):
        return cls(K.facets, np.eye(K.dim), K.unit[None, :], [1.0])

    @classmethod
    def simplex_projection(cls, K):
        """``K`` as the image of a simplex whose vertices map to the vertices of ``K``."""
        N = K.n_vertices
        return cls(np.eye(N), K.vertices.T, np.ones((1, N)), [1.0])

    def lifted_space(self, label="lift"):
        """Return ``(state space of the slice, map into the original coordinates)``."""
        F, R, r = self.cone_facets, self.R, self.r
        if R.shape[0] == 1 and abs(r[0]) > 0:
            unit = R[0] / r[0]
            T = self.T
        else:
            # slice coordinates: nullspace of R y = r t, plus t >= 0
            from scipy.linalg import null_space

            N = null_space(np.hstack([R, -r[:, None]]))
            Ny, Nt = N[:-1], N[-1]
            F = np.vstack([F @ Ny, Nt[None, :]])
            unit = Nt
            T = self.T @ Ny
        rays = polyhedra.cached_extreme_rays(F, tag="lift")
        scale = rays @ unit
        if np.any(scale <= settings.interior_tol):
            raise LiftInconsistent("slice of the lifting cone is unbounded or empty")
        verts = rays / scale[:, None]
        K = StateSpace(verts, irredundant_facets(F, verts), unit, label=label)
        return K, T


def _check_lift(K, lifted, T):
    images = lifted.vertices @ T.T
    if np.any(images @ K.facets.T < -settings.tol) or np.any(np.abs(images @ K.unit - 1) > settings.tol):
        raise LiftInconsistent(f"slice points map outside {K.label}")
    # every vertex of K must be attained
    for v in K.vertices:
        lp = LinearProgram(c=np.zeros(len(images)), A_eq=np.vstack([images.T, np.ones(len(images))]),
                           b_eq=np.concatenate([v, [1.0]]), bounds=[(0, None)] * len(images), name="lift_cover")
        if solve(lp).status is not Status.OPTIMAL:
            raise LiftInconsistent(f"lift image misses a vertex of {K.label}")


def lift_program(problem, lift_A, lift_B):
    """Pull the problem back to the lifted cones.

    The objective becomes ``(T_A ⊗ T_B)^T P`` and constraint maps are composed
    with ``T``; the slice condition ``R y = r`` becomes the normalization of the
    lifted state spaces.  Returns ``(lifted problem, T_A, T_B)``.
    """
    KA, TA = lift_A.lifted_space(problem.A.label + "~")
    KB, TB = lift_B.lifted_space(problem.B.label + "~")
    _check_lift(problem.A, KA, TA)
    _check_lift(problem.B, KB, TB)
    P = TA.T @ problem.P_matrix @ TB
    lifted = LocalProblem(
        KA, KB, P,
        problem.F_A @ TA if problem.F_A.shape[0] else None,
        problem.F_B @ TB if problem.F_B.shape[0] else None,
        problem.G_A @ TA if problem.G_A.shape[0] else None,
        problem.G_B @ TB if problem.G_B.shape[0] else None,
        name=problem.name + ":lifted",
    )
    return lifted, TA, TB
