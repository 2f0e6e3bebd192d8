"""Measurement-based rounding of symmetric extensions to feasible product states.

Measuring ``m`` of the ``B`` copies of an optimal extension with an
informationally complete measurement and tracing out all but one of the
others gives, per outcome, a conditional bipartite state.  Its marginals form
a product pair that satisfies the local constraints, so its objective value
is an upper (inner) bound for the minimization problem.
"""
from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np

from .config import settings
from .exceptions import EnumerationOverflow, NoFeasibleTerm
from .geometry import ic_measurement
from .tensor import SymExtension, contract_first, partial_unit


@dataclasses.dataclass
class Outcome:
    z: tuple
    probability: float
    x_A: np.ndarray
    x_B: np.ndarray


@dataclasses.dataclass
class ConditionalEnsemble:
    """Conditionals after measuring ``m`` copies.

    Outcome tuples are reported as sorted multisets; the probability of a
    multiset is the total over its orderings, all of which share the same
    conditional state by permutation invariance.
    """

    m: int
    outcomes: list
    dropped_mass: float
    measurement: np.ndarray

    @property
    def total_probability(self):
        return float(sum(o.probability for o in self.outcomes))

    def mean_A(self):
        return sum(o.probability * o.x_A for o in self.outcomes)


def conditionals(y, M, m, u_A, u_B, p_floor=None):
    """Conditional product pairs after measuring ``m`` of the ``n`` B copies with ``M``."""
    p_floor = settings.p_floor if p_floor is None else p_floor
    E = np.atleast_2d(M.matrix if hasattr(M, "matrix") else np.asarray(M, dtype=float))
    if not 0 <= m <= y.n - 1:
        raise ValueError(f"m must lie in [0, {y.n - 1}]")
    n_out = E.shape[0]
    count = math.comb(n_out + m - 1, m)
    if count > settings.cap_enum:
        raise EnumerationOverflow(f"{count} outcome multisets exceed the cap {settings.cap_enum}")
    base = partial_unit(y, m + 1, u_B)
    outcomes, dropped = [], 0.0
    for z in itertools.combinations_with_replacement(range(n_out), m):
        cur = base
        for k in z:
            cur = SymExtension(cur.n - 1, cur.d_A, cur.d_B, contract_first(cur, E[k][None, :])[:, 0, :])
        xt = cur.coeffs  # (d_A, d_B): unnormalized conditional of the remaining pair
        mult = math.factorial(m) // math.prod(math.factorial(z.count(k)) for k in set(z))
        p_single = float(u_A @ xt @ u_B)
        p = mult * p_single
        if p < p_floor:
            dropped += max(p, 0.0)
            continue
        outcomes.append(Outcome(z, p, xt @ u_B / p_single, u_A @ xt / p_single))
    return ConditionalEnsemble(m, outcomes, dropped, E)


@dataclasses.dataclass
class Term:
    m: int
    z: tuple
    probability: float
    value: float
    x_A: np.ndarray
    x_B: np.ndarray
    residuals: dict
    certified: bool


@dataclasses.dataclass
class InnerReport:
    best_value: float
    best_point: tuple
    m_star: int
    z_star: tuple
    residuals: dict
    gap_to_outer: float
    certified_bound: float
    mixture_value: float
    mixture_residuals: dict
    terms_checked: int
    terms_certified: int
    dropped_mass: dict

    def to_dict(self):
        return {
            "best_value": float(self.best_value) + 0.0,
            "x_A": [float(v) + 0.0 for v in self.best_point[0]],
            "x_B": [float(v) + 0.0 for v in self.best_point[1]],
            "m_star": self.m_star,
            "z_star": list(self.z_star),
            "residuals": self.residuals,
            "gap_to_outer": float(self.gap_to_outer) + 0.0,
            "certified_bound": float(self.certified_bound),
            "mixture_value": float(self.mixture_value) + 0.0,
            "mixture_residuals": self.mixture_residuals,
            "terms_checked": self.terms_checked,
            "terms_certified": self.terms_certified,
            "dropped_mass": self.dropped_mass,
        }


def _certify(res, feas_tol):
    return res["eq"] <= feas_tol and res["ineq"] <= feas_tol and res["unit"] <= feas_tol


def inner_search(problem, outer, M=None, feas_tol=None):
    """Best certified product term over every ``m`` in ``0..n-1`` and every outcome.

    ``outer`` is the :class:`OuterReport` of the level whose extension is
    rounded.  Smaller objective values are better.  The mixture of the
    best ``m`` is reported alongside.
    """
    feas_tol = settings.tol if feas_tol is None else feas_tol
    y = outer.y_opt
    M = ic_measurement(problem.B) if M is None else M
    u_A, u_B = problem.A.unit, problem.B.unit
    best, worst_res, checked, certified = None, 0.0, 0, 0
    mixtures, dropped = {}, {}
    for m in range(y.n):
        ens = conditionals(y, M, m, u_A, u_B)
        dropped[m] = ens.dropped_mass
        terms = []
        for o in ens.outcomes:
            res = problem.residuals(o.x_A, o.x_B)
            ok = _certify(res, feas_tol)
            checked += 1
            certified += ok
            worst_res = max(worst_res, res["eq"], res["ineq"], res["unit"])
            t = Term(m, o.z, o.probability, problem.objective(o.x_A, o.x_B), o.x_A, o.x_B, res, ok)
            terms.append(t)
            # strict comparison keeps the first (lowest m, lowest z) on ties
            if ok and (best is None or t.value < best.value - 1e-12):
                best = t
        mixtures[m] = terms
    if best is None:
        raise NoFeasibleTerm(f"no product term passed certification (worst residual {worst_res:.3g})")
    terms = mixtures[best.m]
    total = sum(t.probability for t in terms)
    w = sum(t.probability * np.kron(t.x_A, t.x_B) for t in terms) / total
    mix_value = float(problem.P @ w)
    dA, dB = problem.A.dim, problem.B.dim
    W = w.reshape(dA, dB)
    wA, wB = W @ u_B, u_A @ W
    mix_res = problem.residuals(wA, wB)
    return InnerReport(
        best_value=best.value,
        best_point=(best.x_A, best.x_B),
        m_star=best.m,
        z_star=best.z,
        residuals=best.residuals,
        gap_to_outer=best.value - outer.p_n,
        certified_bound=outer.error_bound,
        mixture_value=mix_value,
        mixture_residuals=mix_res,
        terms_checked=checked,
        terms_certified=certified,
        dropped_mass={str(k): float(v) for k, v in dropped.items()},
    )
