"""Two-player nonlocal games played with a general state space on Bob's side.

The assemblage relaxation optimizes a bilinear function of an assemblage
(subnormalized conditional states with an input-independent total) and a
multimeter (one complete measurement per question).  Both sets are polytopes
when ``K_B`` is, so the relaxation is a :class:`LocalProblem`.
"""
from __future__ import annotations

import dataclasses
import itertools
import json

import numpy as np
from scipy.linalg import null_space

from . import polyhedra
from .config import settings
from .exceptions import DimensionOverflow, DomainError, EnumerationOverflow, SolverError
from .geometry import StateSpace, irredundant_facets
from .hierarchy import LocalProblem
from .solver import LinearProgram, solve


@dataclasses.dataclass(eq=False)
class GameSpec:
    """``pi[x, y]`` question distribution, ``V[a, b, x, y]`` 0/1 winning predicate."""

    pi: np.ndarray
    V: np.ndarray
    name: str = "game"

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        if self.pi.ndim != 2 or self.V.ndim != 4:
            raise DomainError("pi must be 2-d and V 4-d")
        if self.V.shape[2:] != self.pi.shape:
            raise DomainError(f"V has question shape {self.V.shape[2:]}, pi has {self.pi.shape}")
        if np.any(self.pi < 0) or abs(self.pi.sum() - 1) > 1e-9:
            raise DomainError("pi must be a probability distribution")
        if not np.all((self.V == 0) | (self.V == 1)):
            raise DomainError("V must be binary")

    @property
    def sizes(self):
        nA, nB, nX, nY = self.V.shape
        return {"X": nX, "Y": nY, "A": nA, "B": nB}

    @property
    def g(self):
        """``g[a, b, x, y] = pi[x, y] V[a, b, x, y]``."""
        return self.V * self.pi[None, None, :, :]

    @property
    def is_free(self):
        """Whether the question distribution is a product."""
        return bool(np.allclose(self.pi, np.outer(self.pi.sum(1), self.pi.sum(0))))

    def to_dict(self):
        s = self.sizes
        return {"name": self.name, **s, "pi": self.pi.tolist(), "V": self.V.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d):
        V = np.asarray(d["V"], dtype=float)
        expected = (d["A"], d["B"], d["X"], d["Y"])
        if V.shape != tuple(expected):
            raise DomainError(f"V has shape {V.shape}, expected {expected}")
        return cls(d["pi"], V, d.get("name", "game"))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def chsh():
    V = np.zeros((2, 2, 2, 2))
    for a, b, x, y in itertools.product(range(2), repeat=4):
        V[a, b, x, y] = float((a ^ b) == (x & y))
    return GameSpec(np.full((2, 2), 0.25), V, "CHSH")


def constant_game(value, nA=2, nB=2, nX=2, nY=2):
    """Game that is always won (``value=1``) or always lost (``value=0``)."""
    return GameSpec(np.full((nX, nY), 1.0 / (nX * nY)), np.full((nA, nB, nX, nY), float(value)), f"V={value}")


def random_game(rng, nA=2, nB=2, nX=2, nY=2):
    pi = rng.dirichlet(np.ones(nX * nY)).reshape(nX, nY)
    V = (rng.random((nA, nB, nX, nY)) < 0.5).astype(float)
    return GameSpec(pi, V, "random")


# --------------------------------------------------------------------------
# bodies
# --------------------------------------------------------------------------


@dataclasses.dataclass(eq=False)
class Body:
    """A polytope given in coordinates ``z`` with ambient embedding ``amb = embed @ z``."""

    space: StateSpace
    embed: np.ndarray

    def ambient(self, z):
        return self.embed @ np.asarray(z, dtype=float)


def _body(F_amb, E_amb, unit_amb, label):
    N = null_space(E_amb) if E_amb.shape[0] else np.eye(F_amb.shape[1])
    F = F_amb @ N
    unit = unit_amb @ N
    rays = polyhedra.cached_extreme_rays(F, tag=label)
    scale = rays @ unit
    if np.any(scale <= settings.interior_tol):
        raise DomainError(f"{label} is unbounded")
    verts = rays / scale[:, None]
    return Body(StateSpace(verts, irredundant_facets(F, verts), unit, label=label), N)


def assemblage_body(K_B, nA, nX):
    """Tuples ``rho[a, x]`` in ``cone(K_B)`` with ``sum_a rho[a, x]`` independent of ``x``.

    Ambient index ``(a, x, k)``; the unit is ``u_B(sum_a rho[a, 0])``.
    """
    d = K_B.dim
    D = nA * nX * d
    idx = lambda a, x: slice((a * nX + x) * d, (a * nX + x + 1) * d)  # noqa: E731
    F = np.zeros((nA * nX * K_B.n_facets, D))
    row = 0
    for a in range(nA):
        for x in range(nX):
            F[row:row + K_B.n_facets, idx(a, x)] = K_B.facets
            row += K_B.n_facets
    E = np.zeros(((nX - 1) * d, D))
    for x in range(1, nX):
        for a in range(nA):
            E[(x - 1) * d:x * d, idx(a, x)] += np.eye(d)
            E[(x - 1) * d:x * d, idx(a, 0)] -= np.eye(d)
    unit = np.zeros(D)
    for a in range(nA):
        unit[idx(a, 0)] = K_B.unit
    return _body(F, E if E.size else np.zeros((0, D)), unit, "assemblage")


def multimeter_body(K_B, nB, nY):
    """Homogenized effect tuples ``(n[b, y], t)`` with ``sum_b n[b, y] = t u_B``.

    Ambient index ``(b, y, k)`` followed by ``t``; the unit is ``t``.
    """
    d = K_B.dim
    D = nB * nY * d + 1
    V = K_B.vertices
    F = np.zeros((nB * nY * len(V) + 1, D))
    row = 0
    for b in range(nB):
        for y in range(nY):
            F[row:row + len(V), (b * nY + y) * d:(b * nY + y + 1) * d] = V
            row += len(V)
    F[row, -1] = 1.0
    E = np.zeros((nY * d, D))
    for y in range(nY):
        for b in range(nB):
            E[y * d:(y + 1) * d, (b * nY + y) * d:(b * nY + y + 1) * d] = np.eye(d)
        E[y * d:(y + 1) * d, -1] = -K_B.unit
    unit = np.zeros(D)
    unit[-1] = 1.0
    return _body(F, E, unit, "multimeter")


@dataclasses.dataclass(eq=False)
class GameProblem(LocalProblem):
    """Compiled game; ``P`` is the negated payoff so that minimizing maximizes the win rate."""

    game: GameSpec | None = None
    assemblage: Body | None = None
    multimeter: Body | None = None
    payoff: np.ndarray | None = None  # un-negated, in body coordinates


def _raw_payoff(G, d):
    nA, nB, nX, nY = G.V.shape
    g = G.g
    P = np.zeros((nA * nX * d, nB * nY * d + 1))
    for a, b, x, y in itertools.product(range(nA), range(nB), range(nX), range(nY)):
        i, j = (a * nX + x) * d, (b * nY + y) * d
        P[i:i + d, j:j + d] += g[a, b, x, y] * np.eye(d)
    return P


def compile_game(G, K_B):
    """The assemblage relaxation of ``G`` with ``K_B`` as a minimization :class:`LocalProblem`."""
    s = G.sizes
    asm = assemblage_body(K_B, s["A"], s["X"])
    mm = multimeter_body(K_B, s["B"], s["Y"])
    if asm.space.dim * mm.space.dim > settings.cap_dim:
        raise DimensionOverflow(f"compiled dimension {asm.space.dim * mm.space.dim} exceeds cap {settings.cap_dim}")
    payoff = asm.embed.T @ _raw_payoff(G, K_B.dim) @ mm.embed
    return GameProblem(asm.space, mm.space, -payoff, name=f"{G.name}/{K_B.label}",
                       game=G, assemblage=asm, multimeter=mm, payoff=payoff)


# --------------------------------------------------------------------------
# oracles
# --------------------------------------------------------------------------


def classical_value(G):
    """Best winning probability over deterministic strategies."""
    nA, nB, nX, nY = G.V.shape
    count = nA ** nX * nB ** nY
    if count > settings.cap_enum * 16:
        raise EnumerationOverflow(f"{count} deterministic strategies exceed the cap")
    g = G.g
    best = 0.0
    for fa in itertools.product(range(nA), repeat=nX):
        # Bob's best response decouples over questions
        val = 0.0
        for y in range(nY):
            val += max(sum(g[fa[x], b, x, y] for x in range(nX)) for b in range(nB))
        best = max(best, val)
    return float(best)


def _lp_best(space, c):
    lp = LinearProgram(c=c, A_eq=space.unit[None, :], b_eq=[1.0], A_ge=space.facets,
                       b_ge=np.zeros(space.n_facets), sense="max", name="seesaw")
    sol = solve(lp)
    if not sol.ok:
        raise SolverError(f"seesaw step failed: {sol.status.value}", sol)
    return sol.x, float(sol.value)


@dataclasses.dataclass
class SeesawResult:
    value: float
    assemblage: np.ndarray
    multimeter: np.ndarray
    restarts_run: int
    exhaustive: bool


def seesaw_lower(G, K_B, restarts=16, seed=0, compiled=None, max_iter=100):
    """Lower bound from alternating LPs over the two bodies.

    When the multimeter body has at most ``restarts`` vertices every vertex is
    used as a starting point, which makes the first half-step already exact.
    """
    prob = compile_game(G, K_B) if compiled is None else compiled
    W = prob.payoff
    verts = prob.multimeter.space.vertices
    exhaustive = len(verts) <= restarts
    if exhaustive:
        starts = list(verts)
    else:
        rng = np.random.default_rng(seed)
        starts = [verts[i] for i in rng.choice(len(verts), size=restarts, replace=False)]
    best, done = None, 0
    for nb in starts:
        try:
            prev = -np.inf
            for _ in range(max_iter):
                za, _ = _lp_best(prob.A, W @ nb)
                nb, val = _lp_best(prob.B, W.T @ za)
                if val <= prev + 1e-12:
                    break
                prev = val
        except SolverError:
            continue
        done += 1
        if best is None or val > best.value + 1e-12:
            best = SeesawResult(val, prob.assemblage.ambient(za), prob.multimeter.ambient(nb), 0, exhaustive)
    if best is None:
        raise SolverError("every seesaw restart failed")
    best.restarts_run = done
    return best
