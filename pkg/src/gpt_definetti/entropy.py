"""Relative entropy of state spaces and the derived de Finetti constants.

For a reference state ``y`` in the interior, the divergence reduces to a one
dimensional integral of

    h(s) = sup_{f in E(K)} (s f(y) - f(x)),

a convex piecewise-linear function of ``s``.  Each linear piece ``a s + b``
integrates against ``ds / s`` in closed form, so no quadrature is needed once
the pieces are known.  The effect polytope ``E(K) = {f : 0 <= f(v) <= 1}``
has finitely many vertices; they are enumerated when small enough and
otherwise the pieces are found by a breakpoint walk with an LP oracle.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import polyhedra
from .config import settings
from .exceptions import EnclosureTooWide, EnumerationOverflow, NotInterior, SupportMismatch
from .geometry import effect_sup, injectivity_bound, optimize_tau, order_bounds
from .solver import LinearProgram, solve_optimal


@dataclasses.dataclass
class EntropyResult:
    value: float
    lower: float
    upper: float
    mu: float
    lam: float
    method: str
    pieces: int = 0

    def __post_init__(self):
        for name in ("value", "lower", "upper", "mu", "lam"):
            setattr(self, name, float(getattr(self, name)))

    def to_dict(self):
        return {"value": self.value, "lower": self.lower, "upper": self.upper,
                "mu": self.mu, "lambda": self.lam, "method": self.method, "pieces": self.pieces}


# --------------------------------------------------------------------------
# the integrand
# --------------------------------------------------------------------------


def effect_vertices(K, max_vertices=None):
    """Vertices of the effect polytope ``{f : 0 <= f(v) <= 1 for all vertices v}``.

    Raises :class:`EnumerationOverflow` above ``max_vertices`` (default ``cap_enum``).
    """
    V = K.vertices
    d = V.shape[1]
    # homogenized: f.v >= 0, t - f.v >= 0
    H = np.vstack([np.hstack([V, np.zeros((len(V), 1))]), np.hstack([-V, np.ones((len(V), 1))])])
    key_cap = settings.cap_enum if max_vertices is None else max_vertices
    key = polyhedra.content_hash(H, extra=f"effects:{key_cap}")
    cached = polyhedra._memory_cache.get(key)
    if cached is None:
        rays = polyhedra.extreme_rays(H, max_rays=key_cap)
        cached = rays[:, :d] / rays[:, d:]
        polyhedra._memory_cache[key] = cached
    return cached.copy()


def _effect_argmax(K, z):
    """``(value, f)`` maximizing ``f(z)`` over effects."""
    V = K.vertices
    lp = LinearProgram(
        c=z, A_ge=np.vstack([V, -V]),
        b_ge=np.concatenate([np.zeros(len(V)), -np.ones(len(V))]),
        sense="max", name="effect_argmax",
    )
    sol = solve_optimal(lp)
    return float(sol.value), sol.x


def _upper_envelope(slopes, intercepts, lo, hi):
    """Pieces ``(s1, s2, a, b)`` of ``max_k (a_k s + b_k)`` on ``[lo, hi]``, increasing in ``s``."""
    order = np.lexsort((intercepts, slopes))
    a_sorted, b_sorted = slopes[order], intercepts[order]
    # keep the largest intercept for each slope
    lines = []
    for a, b in zip(a_sorted, b_sorted):
        if lines and abs(lines[-1][0] - a) <= 1e-15 * max(1.0, abs(a)):
            lines[-1] = (a, max(b, lines[-1][1]))
        else:
            lines.append((a, b))
    # lines that win somewhere on [lo, hi]: convex hull trick on increasing slopes
    hull = []  # (a, b, start)
    for a, b in lines:
        while hull:
            a0, b0, s0 = hull[-1]
            x = (b0 - b) / (a - a0)  # where the new line overtakes the last one
            if x <= s0:
                hull.pop()
            else:
                hull.append((a, b, x))
                break
        else:
            hull.append((a, b, -math.inf))
    pieces = []
    for k, (a, b, start) in enumerate(hull):
        end = hull[k + 1][2] if k + 1 < len(hull) else math.inf
        s1, s2 = max(start, lo), min(end, hi)
        if s2 > s1:
            pieces.append((s1, s2, a, b))
    return pieces


def _integrate_pieces(pieces, tol):
    """``sum ∫ (a s + b) / s ds`` over the pieces; a piece starting at 0 must have ``b = 0``."""
    total = 0.0
    for s1, s2, a, b in pieces:
        total += a * (s2 - s1)
        if s1 <= 0.0:
            if abs(b) > tol:
                raise NotInterior("integrand does not vanish at s = 0")
        elif b != 0.0:
            total += b * math.log(s2 / s1)
    return total


def _walk_lines(K, x, y, lo, hi, tol):
    """Lines of the envelope on ``[lo, hi]`` found by a breakpoint walk (LP oracle)."""
    found = {}

    def line_at(s):
        _, f = _effect_argmax(K, s * y - x)
        a, b = float(f @ y), float(-(f @ x))
        found[(round(a, 12), round(b, 12))] = (a, b)
        return a, b

    stack = [(lo, line_at(lo), hi, line_at(hi))]
    guard = 0
    while stack:
        s1, L1, s2, L2 = stack.pop()
        guard += 1
        if guard > 10 * settings.cap_enum:
            raise EnumerationOverflow("breakpoint walk did not terminate")
        if abs(L1[0] - L2[0]) <= 1e-14:
            continue
        sx = (L2[1] - L1[1]) / (L1[0] - L2[0])
        if not s1 < sx < s2:
            continue
        L3 = line_at(sx)
        if L3[0] * sx + L3[1] <= L1[0] * sx + L1[1] + tol:
            continue
        stack.append((sx, L3, s2, L2))
        stack.append((s1, L1, sx, L3))
    arr = np.array(list(found.values()))
    return arr[:, 0], arr[:, 1]


def _integration_limits(K, x, y):
    mu, lam = order_bounds(K, x, y)
    mu = max(mu, 0.0)
    return mu, lam, min(mu, 1.0), max(lam, 1.0)


def _boundary_terms(K, x, y, Lam):
    return float(K.unit @ x) * math.log(Lam) - float(K.unit @ y) * (Lam - 1.0)


def relative_entropy(K, x, y, method="exact-pwl", tol=None):
    """Relative entropy ``D(x || y)`` in nats for ``y`` interior.

    Works for normalized states and, more generally, for cone elements (the
    unit value enters the boundary terms), which gives ``D(cx||cy) = c D(x||y)``.
    ``method`` is ``"exact-pwl"`` (closed-form integration over the linear
    pieces) or ``"adaptive"`` (LP evaluations with a rigorous enclosure).
    """
    tol = settings.tol if tol is None else tol
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(K.facets @ x < -settings.tol):
        raise NotInterior(f"x is not in the cone of {K.label}")
    mu, lam, lo, hi = _integration_limits(K, x, y)
    if np.allclose(x, y, rtol=0, atol=1e-15):
        return EntropyResult(0.0, 0.0, 0.0, mu, lam, method, 0)
    if method == "adaptive":
        return _adaptive(K, x, y, mu, lam, lo, hi, tol)
    if method != "exact-pwl":
        raise ValueError(f"unknown method {method!r}")
    try:
        E = effect_vertices(K)
        slopes, intercepts = E @ y, -(E @ x)
    except EnumerationOverflow:
        slopes, intercepts = _walk_lines(K, x, y, lo, hi, 1e-12)
    pieces = _upper_envelope(slopes, intercepts, lo, hi)
    value = _integrate_pieces(pieces, 1e-9) + _boundary_terms(K, x, y, hi)
    slack = 1e-12 * max(1.0, abs(value)) * max(1, len(pieces))
    return EntropyResult(value, value - slack, value + slack, mu, lam, "exact-pwl", len(pieces))


def _adaptive(K, x, y, mu, lam, lo, hi, tol, max_nodes=400):
    """Enclosure from chords (above) and supporting lines (below) of ``h``."""
    h, lines = {}, [(0.0, 0.0)]

    def evaluate(s):
        val, f = _effect_argmax(K, s * y - x)
        h[s] = max(val, 0.0)
        lines.append((float(f @ y), float(-(f @ x))))

    n0 = 9
    if lo > 0:
        nodes = list(np.geomspace(lo, hi, n0))
    else:
        nodes = [0.0] + list(np.geomspace(hi * 1e-3, hi, n0))
    for s in nodes:
        evaluate(s)

    def bounds():
        ss = sorted(h)
        upper_parts = []
        for s1, s2 in zip(ss[:-1], ss[1:]):
            a = (h[s2] - h[s1]) / (s2 - s1)
            b = h[s1] - a * s1
            part = a * (s2 - s1) + (b * math.log(s2 / s1) if s1 > 0 else 0.0)
            upper_parts.append(part)
        arr = np.array(lines)
        low_pieces = _upper_envelope(arr[:, 0], arr[:, 1], lo, hi)
        lower = 0.0
        lower_parts = []
        for s1, s2 in zip(ss[:-1], ss[1:]):
            sub = [(max(p[0], s1), min(p[1], s2), p[2], p[3]) for p in low_pieces if p[1] > s1 and p[0] < s2]
            part = sum(max(a * (t2 - t1) + (b * math.log(t2 / t1) if t1 > 0 else 0.0), 0.0)
                       for t1, t2, a, b in sub)
            lower_parts.append(part)
            lower += part
        return ss, upper_parts, lower_parts

    while True:
        ss, up, low = bounds()
        gaps = np.array(up) - np.array(low)
        if gaps.sum() <= tol or len(h) >= max_nodes:
            break
        k = int(np.argmax(gaps))
        s1, s2 = ss[k], ss[k + 1]
        evaluate(math.sqrt(s1 * s2) if s1 > 0 else s2 / 2)
    extra = _boundary_terms(K, x, y, hi)
    lower, upper = sum(low) + extra, sum(up) + extra
    if upper - lower > tol:
        raise EnclosureTooWide(f"enclosure width {upper - lower:.3g} exceeds {tol:.3g}")
    return EntropyResult(0.5 * (lower + upper), lower, upper, mu, lam, "adaptive", len(h) - 1)


# --------------------------------------------------------------------------
# classical cross-checks
# --------------------------------------------------------------------------


def kl_divergence(p, q):
    """Kullback-Leibler divergence in nats with ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("shape mismatch")
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise SupportMismatch("supp(p) is not contained in supp(q)")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def pinsker_gap(K, x, y):
    """``D(x||y) - (effect_sup(x - y))^2 / 2``; nonnegative up to tolerance."""
    d = relative_entropy(K, x, y).value
    return d - 0.5 * effect_sup(K, np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2


# --------------------------------------------------------------------------
# mutual information
# --------------------------------------------------------------------------


def mutual_information_upper(P, x_AB, tau_A):
    """``D(x_AB || tau_A ⊗ x_B)``, an upper bound on the mutual information."""
    x_AB = np.asarray(x_AB, dtype=float)
    x_B = P.marginal_B(x_AB)
    return relative_entropy(P.as_state_space(), x_AB, np.kron(tau_A, x_B)).value


def mutual_information_marginal(P, x_AB):
    """``D(x_AB || x_A ⊗ x_B)``; no claim is made that it equals the infimum."""
    x_AB = np.asarray(x_AB, dtype=float)
    return relative_entropy(P.as_state_space(), x_AB, np.kron(P.marginal_A(x_AB), P.marginal_B(x_AB))).value


# --------------------------------------------------------------------------
# de Finetti constants
# --------------------------------------------------------------------------


@dataclasses.dataclass
class DeFinettiConstants:
    lambda_A: float
    c_A: float
    f_AB: float
    c_AB: float
    tau_A: np.ndarray

    def to_dict(self):
        return {"lambda_A": self.lambda_A, "c_A": self.c_A, "f_AB": self.f_AB,
                "c_AB": self.c_AB, "tau_A": [float(t) for t in self.tau_A]}


def monogamy_constant(lam):
    return lam * (1.0 + math.log(lam))


def definetti_constants(K_A, K_B, M_A, M_B, product_vertices=None):
    """``lambda_A``, ``c_A = lambda_A (1 + ln lambda_A)``, ``f_AB`` and ``c_AB = sqrt(2 c_A) / f_AB``."""
    tau, lam = optimize_tau(K_A)
    c_A = monogamy_constant(lam)
    f = injectivity_bound(K_A, K_B, M_A, M_B, product_vertices).value
    return DeFinettiConstants(lam, c_A, f, math.sqrt(2.0 * c_A) / f, tau)


def definetti_bound(consts, n):
    """``2 c_AB / sqrt(n)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return 2.0 * consts.c_AB / math.sqrt(n)
