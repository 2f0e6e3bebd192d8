"""Polytopal state spaces in homogeneous coordinates.

A state space ``K`` is stored as the base of a polyhedral cone in ``R^d``:
vertices carry their normalization (``unit @ v == 1``), facets are covectors
generating the dual cone, so ``z`` lies in the cone iff ``facets @ z >= 0``.
Affine maps on ``K`` are therefore plain matrices.
"""
from __future__ import annotations

import dataclasses
import json

import numpy as np
from scipy.optimize import nnls

from . import polyhedra
from .config import override, settings
from .exceptions import InvalidStateSpace, NotInterior, RankDeficient, EnumerationOverflow, Degenerate
from .solver import LinearProgram, solve_optimal


@dataclasses.dataclass(eq=False)
class StateSpace:
    """Polytopal GPT system.

    Parameters
    ----------
    vertices : (N, d) array
        Extreme points in homogeneous coordinates.
    facets : (M, d) array
        Generators of the dual cone.
    unit : (d,) array
        Order unit; equals one on every vertex.
    label : str
    check : bool
        Run :func:`validate` and raise :class:`InvalidStateSpace` on failure.
    """

    vertices: np.ndarray
    facets: np.ndarray
    unit: np.ndarray
    label: str = "K"
    check: dataclasses.InitVar[bool] = True

    def __post_init__(self, check):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        self.facets = np.atleast_2d(np.asarray(self.facets, dtype=float))
        self.unit = np.asarray(self.unit, dtype=float).ravel()
        d = self.unit.size
        if self.vertices.shape[1] != d or self.facets.shape[1] != d:
            raise InvalidStateSpace(
                f"{self.label}: vertices {self.vertices.shape}, facets {self.facets.shape} "
                f"and unit ({d},) disagree on the dimension"
            )
        if check:
            report = validate(self)
            if not report.passed:
                raise InvalidStateSpace(f"{self.label}: {report.summary()}")

    @property
    def dim(self):
        return self.unit.size

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_facets(self):
        return self.facets.shape[0]

    @property
    def facet_max(self):
        """Largest value of each facet over the vertices."""
        return (self.facets @ self.vertices.T).max(axis=1)

    @property
    def barycenter(self):
        return self.vertices.mean(axis=0)

    def contains(self, z, tol=None):
        """Membership of ``z`` in ``K`` (cone membership plus normalization)."""
        tol = settings.tol if tol is None else tol
        z = np.asarray(z, dtype=float)
        return bool(np.all(self.facets @ z >= -tol) and abs(self.unit @ z - 1.0) <= tol)

    def random_state(self, rng, concentration=1.0):
        """Random mixture of vertices with Dirichlet weights."""
        w = rng.dirichlet(np.full(self.n_vertices, concentration))
        return w @ self.vertices

    # construction helpers -------------------------------------------------

    @classmethod
    def from_vertices(cls, vertices, unit=None, label="K"):
        """Build from homogeneous vertices, deriving facets by double description."""
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        if unit is None:
            unit = np.linalg.lstsq(V, np.ones(V.shape[0]), rcond=None)[0]
        facets = polyhedra.cached_extreme_rays(V, tag="facets")
        facets = facets / (facets @ V.T).max(axis=1, keepdims=True)
        return cls(V, facets, unit, label=label)

    @classmethod
    def from_facets(cls, facets, unit, label="K"):
        """Build from dual-cone generators, deriving vertices by double description."""
        F = np.atleast_2d(np.asarray(facets, dtype=float))
        unit = np.asarray(unit, dtype=float)
        rays = polyhedra.cached_extreme_rays(F, tag="vertices")
        scale = rays @ unit
        if np.any(scale <= settings.interior_tol):
            raise InvalidStateSpace(f"{label}: unit is not strictly positive on the cone")
        return cls(rays / scale[:, None], F, unit, label=label)

    def to_dict(self):
        return {
            "label": self.label,
            "dim": self.dim,
            "vertices": self.vertices.tolist(),
            "facets": self.facets.tolist(),
            "unit": self.unit.tolist(),
        }

    @classmethod
    def from_dict(cls, d, check=True):
        space = cls(d["vertices"], d["facets"], d["unit"], label=d.get("label", "K"), check=check)
        if "dim" in d and int(d["dim"]) != space.dim:
            raise InvalidStateSpace(f"declared dim {d['dim']} does not match data ({space.dim})")
        return space

    @classmethod
    def from_json(cls, text, check=True):
        return cls.from_dict(json.loads(text), check=check)

    def to_json(self):
        return json.dumps(self.to_dict())

    def __repr__(self):
        return f"StateSpace({self.label!r}, dim={self.dim}, vertices={self.n_vertices}, facets={self.n_facets})"


def irredundant_facets(F, vertices, tol=1e-9):
    """Rows of ``F`` that define facets of ``cone(vertices)``, scaled to max one and deduplicated."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    V = np.asarray(vertices, dtype=float)
    F = F / (F @ V.T).max(axis=1, keepdims=True)
    d = V.shape[1]
    keep = []
    for i, f in enumerate(F):
        tight = V[np.abs(V @ f) <= tol]
        if len(tight) >= d - 1 and np.linalg.matrix_rank(tight, tol=1e-8) == d - 1:
            keep.append(i)
    return polyhedra._dedupe(F[keep])


def simplex(d):
    """Classical system with ``d`` outcomes."""
    eye = np.eye(d)
    return StateSpace(eye, eye, np.ones(d), label=f"simplex{d}")


def square():
    """The gbit: square with vertices ``(1, ±1, ±1)``."""
    V = np.array([[1, 1, 1], [1, 1, -1], [1, -1, 1], [1, -1, -1]], dtype=float)
    F = np.array([[1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1]], dtype=float) / 2
    return StateSpace(V, F, [1.0, 0.0, 0.0], label="square")


def polygon(n):
    """Regular ``n``-gon centred at the origin with circumradius one."""
    if n < 3:
        raise ValueError("a polygon needs at least 3 vertices")
    theta = 2 * np.pi * np.arange(n) / n
    V = np.column_stack([np.ones(n), np.cos(theta), np.sin(theta)])
    mid = theta + np.pi / n
    r_in = np.cos(np.pi / n)
    # facet between vertex k and k+1:  r_in - <normal, x> >= 0
    F = np.column_stack([np.full(n, r_in), -np.cos(mid), -np.sin(mid)])
    F /= (F @ V.T).max(axis=1, keepdims=True)
    return StateSpace(V, F, [1.0, 0.0, 0.0], label=f"polygon{n}")


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


@dataclasses.dataclass
class Check:
    name: str
    passed: bool
    worst: float


@dataclasses.dataclass
class ValidationReport:
    label: str
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c.name for c in self.checks if not c.passed]

    def summary(self):
        parts = [f"{c.name}: {'pass' if c.passed else 'FAIL'} (worst {c.worst:.3e})" for c in self.checks]
        return "; ".join(parts)


def validate(K, tol=None):
    """Check the structural invariants of ``K``; never raises."""
    tol = settings.tol if tol is None else tol
    V, F, u = K.vertices, K.facets, K.unit
    vals = F @ V.T
    checks = []
    worst = float(max(0.0, -vals.min())) if vals.size else 0.0
    checks.append(Check("vertices inside facets", worst <= tol, worst))
    worst = float(np.max(np.abs(V @ u - 1.0))) if V.size else np.inf
    checks.append(Check("base normalization", worst <= tol, worst))
    coeffs, resid = nnls(F.T, u)
    checks.append(Check("unit positive on cone", resid <= tol * max(1.0, np.linalg.norm(u)), float(resid)))
    s = np.linalg.svd(V, compute_uv=False)
    rank = int(np.sum(s > settings.rank_tol * max(1.0, s.max(initial=0.0))))
    checks.append(Check("full dimension", rank == K.dim, float(K.dim - rank)))
    # every facet must support the body (touch at least one vertex)
    slack = (vals / np.maximum(vals.max(axis=1, keepdims=True), 1e-300)).min(axis=1) if vals.size else np.zeros(0)
    worst = float(np.max(np.abs(slack), initial=0.0))
    checks.append(Check("facets supporting", worst <= max(tol, 1e-6), worst))
    return ValidationReport(K.label, checks)


# --------------------------------------------------------------------------
# effects and measurements
# --------------------------------------------------------------------------


@dataclasses.dataclass(eq=False)
class Effect:
    vector: np.ndarray
    space: StateSpace

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float)
        vals = self.space.vertices @ self.vector
        tol = settings.tol
        if vals.min() < -tol or vals.max() > 1 + tol:
            raise InvalidStateSpace(f"covector is not an effect on {self.space.label} (range [{vals.min()}, {vals.max()}])")

    def __call__(self, z):
        return float(self.vector @ z)


@dataclasses.dataclass(eq=False)
class Measurement:
    """Finite-outcome measurement; row ``i`` of ``matrix`` is effect ``i``."""

    matrix: np.ndarray
    space: StateSpace

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        tol = settings.tol
        if not np.allclose(self.matrix.sum(axis=0), self.space.unit, atol=tol):
            raise InvalidStateSpace("effects do not sum to the unit")
        vals = self.matrix @ self.space.vertices.T
        if vals.min() < -tol or vals.max() > 1 + tol:
            raise InvalidStateSpace("measurement contains a non-effect")

    @property
    def effects(self):
        return [Effect(row, self.space) for row in self.matrix]

    @property
    def outcome_count(self):
        return self.matrix.shape[0]

    def __call__(self, z):
        return self.matrix @ z

    def is_informationally_complete(self):
        return np.linalg.matrix_rank(self.matrix, tol=settings.rank_tol) == self.space.dim


# --------------------------------------------------------------------------
# norms and order bounds
# --------------------------------------------------------------------------


def effect_sup(K, z):
    """``sup`` of ``f(z)`` over the effect algebra of ``K``."""
    z = np.asarray(z, dtype=float)
    if not np.any(z):
        return 0.0
    V = K.vertices
    lp = LinearProgram(
        c=z,
        A_ge=np.vstack([V, -V]),
        b_ge=np.concatenate([np.zeros(len(V)), -np.ones(len(V))]),
        sense="max",
        name="effect_sup",
    )
    return float(solve_optimal(lp).value)


def base_dual_norm(K, z):
    """Base norm ``min lam + mu`` over ``z = lam p - mu q`` with ``p, q`` in ``K``."""
    z = np.asarray(z, dtype=float)
    if not np.any(z):
        return 0.0
    V = K.vertices
    N = V.shape[0]
    lp = LinearProgram(
        c=np.ones(2 * N),
        A_eq=np.hstack([V.T, -V.T]),
        b_eq=z,
        bounds=[(0, None)] * (2 * N),
        name="base_norm",
    )
    return float(solve_optimal(lp).value)


def _facet_interior_values(K, y, what="reference state"):
    fy = K.facets @ np.asarray(y, dtype=float)
    rel = fy / K.facet_max
    if rel.min() <= settings.interior_tol:
        raise NotInterior(f"{what} is not in the relative interior of {K.label} (min facet value {rel.min():.3e})")
    return fy


def order_bounds(K, x, y):
    """Tightest ``(mu, lam)`` with ``mu y <= x <= lam y`` in the cone order."""
    fy = _facet_interior_values(K, y)
    ratios = (K.facets @ np.asarray(x, dtype=float)) / fy
    return float(ratios.min()), float(ratios.max())


def lambda_for_tau(K, tau):
    """``sup_x inf{lam : x <= lam tau}`` over states ``x`` of ``K``."""
    ftau = _facet_interior_values(K, tau, "tau")
    return float(np.max(K.facet_max / ftau))


def optimize_tau(K):
    """Interior state minimizing :func:`lambda_for_tau`.

    ``lam(tau) = max_i M_i / f_i(tau)`` with ``M_i`` the facet maxima, so the
    optimum is ``1/s`` for the LP ``max s`` s.t. ``f_i(tau) >= s M_i``, ``tau``
    in ``K``.  Returns ``(tau, lam)``.
    """
    V, F = K.vertices, K.facets
    N = V.shape[0]
    M = K.facet_max
    # variables: convex weights alpha (N), s
    A_ge = np.hstack([F @ V.T, -M[:, None]])
    A_eq = np.hstack([np.ones((1, N)), np.zeros((1, 1))])
    c = np.zeros(N + 1)
    c[-1] = 1.0
    lp = LinearProgram(
        c=c, A_eq=A_eq, b_eq=[1.0], A_ge=A_ge, b_ge=np.zeros(len(F)),
        bounds=[(0, None)] * N + [(None, None)], sense="max", name="optimize_tau",
    )
    sol = solve_optimal(lp)
    s = sol.x[-1]
    if s <= settings.interior_tol:
        raise Degenerate(f"{K.label} has an empty relative interior")
    tau = sol.x[:N] @ V
    return tau, lambda_for_tau(K, tau)


def ic_measurement(K, basis=None):
    """Informationally complete measurement with ``dim`` outcomes.

    Effects ``h_i = (1 + eps_i a_i) / d`` for ``i < d`` and the complement
    ``h_d = 1 - sum h_i``, where ``a_i`` complete the unit to a covector basis
    (by default the coordinate covectors centred at the barycenter) and
    ``eps_i`` is half the largest value keeping ``0 <= h_i <= 2/d``.  If the
    complement would dip below ``1/(2d)`` all ``eps_i`` are shrunk together.
    """
    d = K.dim
    u = K.unit
    V = K.vertices
    if basis is None:
        center = K.barycenter
        cand = np.eye(d) - np.outer(center, u) / (u @ center)
        # row j: e_j - e_j(center) * unit, vanishes at the barycenter
        chosen = []
        stack = u[None, :]
        for row in cand:
            trial = np.vstack([stack, row])
            if np.linalg.matrix_rank(trial, tol=1e-9) == trial.shape[0]:
                chosen.append(row)
                stack = trial
            if len(chosen) == d - 1:
                break
        basis = np.array(chosen).reshape(-1, d)
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.shape != (d - 1, d):
        raise RankDeficient(f"need {d - 1} basis covectors, got {basis.shape[0]}")
    vals = basis @ V.T
    eps = 0.5 / np.abs(vals).max(axis=1)
    worst = (eps[:, None] * vals).sum(axis=0).max() if d > 1 else 0.0
    if worst > 0.5:
        eps *= 0.5 / worst
    H = np.empty((d, d))
    H[:-1] = (u[None, :] + eps[:, None] * basis) / d
    H[-1] = u - H[:-1].sum(axis=0)
    meas = Measurement(H, K)
    if not meas.is_informationally_complete():
        raise RankDeficient(f"constructed measurement on {K.label} is not informationally complete")
    return meas


# --------------------------------------------------------------------------
# injectivity constant
# --------------------------------------------------------------------------


@dataclasses.dataclass
class InjectivityBound:
    value: float
    alpha: float
    sigma_min: float
    beta: float
    beta_exact: bool


POLAR_CAP = 2000


def _symmetric_inradius(points):
    """Inradius of ``conv(P ∪ -P)`` via facet enumeration of its polar."""
    P = np.vstack([points, -points])
    D = P.shape[1]
    H = np.hstack([-P, np.ones((P.shape[0], 1))])  # t - a.p >= 0
    # the polar can have far more facets than P has points; give up early
    with override(cap_vertices=min(settings.cap_vertices, POLAR_CAP)):
        rays = polyhedra.cached_extreme_rays(H, tag="polar")
    t = rays[:, -1]
    a = rays[:, :-1] / t[:, None]
    return float(1.0 / np.linalg.norm(a, axis=1).max())


def _basis_inradius_bound(V_A, V_B):
    """Certified lower bound on the inradius of the separable symmetric hull."""

    def pick(V):
        rows = polyhedra._independent_rows(V)
        return V[rows]

    B_A, B_B = pick(V_A), pick(V_B)
    s_A = np.linalg.svd(B_A, compute_uv=False).min()
    s_B = np.linalg.svd(B_B, compute_uv=False).min()
    return float(s_A * s_B / np.sqrt(V_A.shape[1] * V_B.shape[1]))


def injectivity_bound(K_A, K_B, M_A, M_B, product_vertices=None, exact_cap=None):
    """Certified ``f`` with ``sup_g g((M_A x M_B) z) >= f sup_h h(z)`` on unit-zero ``z``.

    ``f = alpha * sigma_min * beta`` where ``alpha`` is the reciprocal
    circumradius of the output base-norm ball (the cross-polytope, so 1),
    ``sigma_min`` the smallest singular value of ``M_A ⊗ M_B`` and ``beta`` the
    inradius of ``conv(V ∪ -V)`` for the max-tensor vertices ``V``.  When the
    vertices are not supplied or facet enumeration is too large, ``beta`` is
    replaced by a smaller certified value from a product vertex basis.
    """
    T = np.kron(M_A.matrix, M_B.matrix)
    s = np.linalg.svd(T, compute_uv=False)
    sigma = float(s[min(T.shape) - 1]) if T.shape[0] >= T.shape[1] else 0.0
    if sigma <= settings.rank_tol:
        raise RankDeficient("measurement tensor product is not injective")
    n_out = T.shape[0]
    out_vertices = np.eye(n_out)
    alpha = float(1.0 / np.linalg.norm(out_vertices, axis=1).max())
    beta, exact = None, False
    exact_cap = 200 if exact_cap is None else exact_cap
    if product_vertices is not None and len(product_vertices) <= exact_cap:
        try:
            beta, exact = _symmetric_inradius(np.asarray(product_vertices, dtype=float)), True
        except (EnumerationOverflow, Degenerate):
            beta = None
    if beta is None:
        beta = _basis_inradius_bound(K_A.vertices, K_B.vertices)
    return InjectivityBound(alpha * sigma * beta, alpha, sigma, beta, exact)


def injectivity_constant(K_A, K_B, M_A, M_B, product_vertices=None):
    """Scalar form of :func:`injectivity_bound`."""
    return injectivity_bound(K_A, K_B, M_A, M_B, product_vertices).value
