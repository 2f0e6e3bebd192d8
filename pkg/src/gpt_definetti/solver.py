"""Linear programs, solutions and solver backends.

Every optimization in the package is phrased as a :class:`LinearProgram` and
handed to :func:`solve`.  Two in-process backends ship with the package:

``"highs"``
    scipy's HiGHS interface.  Default; fast and deterministic.
``"simplex"``
    A dense two-phase tableau simplex with Bland's rule, written for
    reproducibility and as an independent cross-check of the default backend.

A third kind of backend talks to an external process through the JSON form
produced by :meth:`LinearProgram.to_json` (see :class:`SubprocessBackend`).
Running ``python -m gpt_definetti.solver`` turns this module into such a
process: it reads one LP as JSON from stdin and writes the solution as JSON.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import subprocess
import sys

import numpy as np
from scipy.optimize import linprog

from .config import settings
from .exceptions import SolverError


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL = "Numerical"


def _as_block(matrix, n):
    if matrix is None:
        return np.zeros((0, n))
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, n) if matrix.size else np.zeros((0, n))
    return matrix


@dataclasses.dataclass
class LinearProgram:
    """``min|max c @ x`` s.t. ``A_eq @ x == b_eq``, ``A_ge @ x >= b_ge``, bounds.

    Variables are free unless ``bounds`` (a list of ``(lo, hi)`` pairs, ``None``
    meaning infinite) says otherwise.
    """

    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ge: np.ndarray | None = None
    b_ge: np.ndarray | None = None
    bounds: list | None = None
    sense: str = "min"
    name: str = ""

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_eq = _as_block(self.A_eq, n)
        self.A_ge = _as_block(self.A_ge, n)
        self.b_eq = np.asarray(self.b_eq if self.b_eq is not None else [], dtype=float).ravel()
        self.b_ge = np.asarray(self.b_ge if self.b_ge is not None else [], dtype=float).ravel()
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if self.A_eq.shape != (self.b_eq.size, n) or self.A_ge.shape != (self.b_ge.size, n):
            raise ValueError(
                f"inconsistent LP dimensions: c has {n} entries, A_eq {self.A_eq.shape}, "
                f"b_eq {self.b_eq.shape}, A_ge {self.A_ge.shape}, b_ge {self.b_ge.shape}"
            )
        if self.bounds is None:
            self.bounds = [(None, None)] * n
        elif len(self.bounds) != n:
            raise ValueError("bounds must have one pair per variable")
        for arr in (self.c, self.A_eq, self.b_eq, self.A_ge, self.b_ge):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP data must be finite")

    @property
    def n_vars(self):
        return self.c.size

    def lower_upper(self):
        lo = np.array([-np.inf if b[0] is None else b[0] for b in self.bounds], dtype=float)
        hi = np.array([np.inf if b[1] is None else b[1] for b in self.bounds], dtype=float)
        return lo, hi

    def to_dict(self):
        return {
            "name": self.name,
            "sense": self.sense,
            "c": self.c.tolist(),
            "A_eq": self.A_eq.tolist(),
            "b_eq": self.b_eq.tolist(),
            "A_ge": self.A_ge.tolist(),
            "b_ge": self.b_ge.tolist(),
            "bounds": [list(b) for b in self.bounds],
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        n = len(d["c"])
        return cls(
            c=d["c"],
            A_eq=np.asarray(d.get("A_eq") or np.zeros((0, n)), dtype=float).reshape(-1, n),
            b_eq=d.get("b_eq") or [],
            A_ge=np.asarray(d.get("A_ge") or np.zeros((0, n)), dtype=float).reshape(-1, n),
            b_ge=d.get("b_ge") or [],
            bounds=[tuple(b) for b in d["bounds"]] if d.get("bounds") else None,
            sense=d.get("sense", "min"),
            name=d.get("name", ""),
        )


@dataclasses.dataclass
class Solution:
    """Result of :func:`solve`.

    ``dual_eq``/``dual_ge`` are multipliers of the minimization form of the
    problem (``max`` problems are negated internally); ``dual_ge >= 0``.
    """

    status: Status
    x: np.ndarray | None = None
    value: float = float("nan")
    dual_eq: np.ndarray | None = None
    dual_ge: np.ndarray | None = None
    residual_eq: float = 0.0
    residual_ge: float = 0.0
    residual_bounds: float = 0.0
    gap: float = float("nan")
    message: str = ""
    backend: str = ""

    @property
    def ok(self):
        return self.status == Status.OPTIMAL

    @property
    def residual(self):
        return max(self.residual_eq, self.residual_ge, self.residual_bounds)

    def to_dict(self):
        def arr(v):
            return None if v is None else np.asarray(v).tolist()

        return {
            "status": self.status.value,
            "x": arr(self.x),
            "value": self.value,
            "dual_eq": arr(self.dual_eq),
            "dual_ge": arr(self.dual_ge),
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d):
        def arr(v):
            return None if v is None else np.asarray(v, dtype=float)

        return cls(
            status=Status(d["status"]),
            x=arr(d.get("x")),
            value=float(d.get("value", float("nan"))),
            dual_eq=arr(d.get("dual_eq")),
            dual_ge=arr(d.get("dual_ge")),
            message=d.get("message", ""),
        )


def residuals(lp, x):
    """Max violation of equality rows, inequality rows and bounds at ``x``."""
    r_eq = float(np.max(np.abs(lp.A_eq @ x - lp.b_eq), initial=0.0))
    r_ge = float(np.max(lp.b_ge - lp.A_ge @ x, initial=0.0))
    lo, hi = lp.lower_upper()
    r_b = float(max(np.max(lo - x, initial=0.0), np.max(x - hi, initial=0.0)))
    return r_eq, max(r_ge, 0.0), max(r_b, 0.0)


def dual_objective(lp, y_eq, y_ge):
    """Lagrangian dual bound of the minimization form for given multipliers.

    Reduced costs left after the row multipliers are absorbed by the variable
    bounds; an infinite bound with nonzero reduced cost gives ``-inf``.
    """
    c = lp.c if lp.sense == "min" else -lp.c
    lo, hi = lp.lower_upper()
    r = c - lp.A_eq.T @ y_eq - lp.A_ge.T @ y_ge
    val = float(lp.b_eq @ y_eq + lp.b_ge @ y_ge)
    scale = 1.0 + float(np.max(np.abs(c), initial=0.0))
    for j, rj in enumerate(r):
        if abs(rj) <= 1e-9 * scale:
            continue
        bound = lo[j] if rj > 0 else hi[j]
        if not np.isfinite(bound):
            return -np.inf
        val += rj * bound
    return val


def _finish(lp, sol):
    """Attach residuals and duality gap; demote inaccurate optima."""
    if sol.x is None:
        return sol
    sol.residual_eq, sol.residual_ge, sol.residual_bounds = residuals(lp, sol.x)
    primal = float(lp.c @ sol.x)
    sol.value = primal
    if sol.dual_eq is not None and sol.dual_ge is not None:
        dual = dual_objective(lp, sol.dual_eq, sol.dual_ge)
        internal = primal if lp.sense == "min" else -primal
        sol.gap = internal - dual
    scale = 1.0 + float(max(np.max(np.abs(lp.b_eq), initial=0), np.max(np.abs(lp.b_ge), initial=0)))
    if sol.ok and sol.residual > settings.tol * scale:
        sol.message += f" | residual {sol.residual:.3e} exceeds tolerance"
        sol.status = Status.NUMERICAL
    return sol


def _solve_highs(lp):
    c = lp.c if lp.sense == "min" else -lp.c
    kwargs = {}
    if lp.A_eq.shape[0]:
        kwargs["A_eq"], kwargs["b_eq"] = lp.A_eq, lp.b_eq
    if lp.A_ge.shape[0]:
        kwargs["A_ub"], kwargs["b_ub"] = -lp.A_ge, -lp.b_ge
    res = linprog(
        c,
        bounds=lp.bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": settings.solver_tol,
            "dual_feasibility_tolerance": settings.solver_tol,
            "presolve": True,
        },
        **kwargs,
    )
    status = {0: Status.OPTIMAL, 2: Status.INFEASIBLE, 3: Status.UNBOUNDED}.get(res.status, Status.NUMERICAL)
    sol = Solution(status=status, message=str(res.message), backend="highs")
    if status == Status.OPTIMAL:
        sol.x = np.asarray(res.x, dtype=float)
        sol.dual_eq = (
            np.asarray(res.eqlin.marginals, dtype=float) if lp.A_eq.shape[0] else np.zeros(0)
        )
        sol.dual_ge = (
            -np.asarray(res.ineqlin.marginals, dtype=float) if lp.A_ge.shape[0] else np.zeros(0)
        )
    return sol


# --------------------------------------------------------------------------
# Dense two-phase simplex (Bland's rule)
# --------------------------------------------------------------------------


def _to_standard_form(lp):
    """Rewrite ``lp`` (as a min problem) into ``min c@z, A z = b, z >= 0, b >= 0``.

    Returns ``(c, A, b, x0, T, row_map)`` with ``x = x0 + T @ z``; ``row_map``
    holds ``(kind, index, sign)`` for every standard row so duals can be mapped
    back to the original rows.
    """
    n = lp.n_vars
    c_orig = lp.c if lp.sense == "min" else -lp.c
    lo, hi = lp.lower_upper()
    cols = []  # (original var, coefficient)
    x0 = np.zeros(n)
    extra_rows = []  # (column index of shifted var, upper - lower)
    for j in range(n):
        if np.isfinite(lo[j]):
            x0[j] = lo[j]
            cols.append((j, 1.0))
            if np.isfinite(hi[j]):
                extra_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            x0[j] = hi[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    m_eq, m_ge = lp.A_eq.shape[0], lp.A_ge.shape[0]
    T = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        T[j, k] = s
    n_struct = len(cols)
    n_slack = m_ge + len(extra_rows)
    n_std = n_struct + n_slack
    m = m_eq + m_ge + len(extra_rows)
    A = np.zeros((m, n_std))
    b = np.zeros(m)
    row_map = []
    A[:m_eq, :n_struct] = lp.A_eq @ T
    b[:m_eq] = lp.b_eq - lp.A_eq @ x0
    row_map += [("eq", i) for i in range(m_eq)]
    A[m_eq:m_eq + m_ge, :n_struct] = lp.A_ge @ T
    A[m_eq:m_eq + m_ge, n_struct:n_struct + m_ge] = -np.eye(m_ge)
    b[m_eq:m_eq + m_ge] = lp.b_ge - lp.A_ge @ x0
    row_map += [("ge", i) for i in range(m_ge)]
    for r, (k, width) in enumerate(extra_rows):
        row = m_eq + m_ge + r
        A[row, k] = 1.0
        A[row, n_struct + m_ge + r] = 1.0
        b[row] = width
        row_map.append(("ub", r))
    signs = np.where(b < 0, -1.0, 1.0)
    A *= signs[:, None]
    b *= signs
    c = np.zeros(n_std)
    c[:n_struct] = T.T @ c_orig
    T_full = np.zeros((n, n_std))
    T_full[:, :n_struct] = T
    return c, A, b, x0, T_full, row_map, signs


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    others = np.arange(tab.shape[0]) != row
    tab[others] -= np.outer(tab[others, col], tab[row])


def _run_simplex(tab, basis, n_cols, eps, max_iter):
    """Minimize the objective stored in the last row of ``tab`` (reduced costs)."""
    for _ in range(max_iter):
        reduced = tab[-1, :n_cols]
        entering = np.flatnonzero(reduced < -eps)
        if entering.size == 0:
            return "optimal"
        col = int(entering[0])  # Bland: lowest index
        column = tab[:-1, col]
        positive = column > eps
        if not positive.any():
            return "unbounded"
        ratios = np.full(column.shape, np.inf)
        ratios[positive] = tab[:-1, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + eps * max(1.0, abs(best)))
        row = int(min(ties, key=lambda r: basis[r]))  # Bland: lowest basic index
        _pivot(tab, row, col)
        basis[row] = col
    return "iteration_limit"


def _solve_simplex(lp, eps=1e-10, max_iter=50000):
    c, A, b, x0, T, row_map, signs = _to_standard_form(lp)
    m, n = A.shape
    # Phase I: artificial basis
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -A.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    outcome = _run_simplex(tab, basis, n + m, eps, max_iter)
    if outcome == "iteration_limit":
        return Solution(Status.NUMERICAL, message="phase I iteration limit", backend="simplex")
    if -tab[-1, -1] > 1e-8 * (1.0 + np.abs(b).max(initial=0)):
        return Solution(Status.INFEASIBLE, message="phase I optimum positive", backend="simplex")
    # drive artificial variables out of the basis
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n:
            candidates = np.flatnonzero(np.abs(tab[r, :n]) > 1e-9)
            if candidates.size:
                _pivot(tab, r, int(candidates[0]))
                basis[r] = int(candidates[0])
            else:
                keep[r] = False  # redundant row
    rows = np.flatnonzero(keep)
    tab2 = np.zeros((rows.size + 1, n + 1))
    tab2[:-1, :n] = tab[rows, :n]
    tab2[:-1, -1] = tab[rows, -1]
    basis2 = [basis[r] for r in rows]
    tab2[-1, :n] = c
    for r, j in enumerate(basis2):
        tab2[-1] -= c[j] * tab2[r]
    outcome = _run_simplex(tab2, basis2, n, eps, max_iter)
    if outcome == "unbounded":
        return Solution(Status.UNBOUNDED, message="phase II unbounded", backend="simplex")
    if outcome != "optimal":
        return Solution(Status.NUMERICAL, message="phase II iteration limit", backend="simplex")
    z = np.zeros(n)
    for r, j in enumerate(basis2):
        z[j] = tab2[r, -1]
    x = x0 + T @ z
    # duals y = c_B B^{-1}, recovered by solving B^T y = c_B on the kept rows
    B = A[rows][:, basis2]
    y_kept = np.linalg.lstsq(B.T, c[basis2], rcond=None)[0]
    y = np.zeros(m)
    y[rows] = y_kept
    y *= signs
    m_eq, m_ge = lp.A_eq.shape[0], lp.A_ge.shape[0]
    return Solution(
        Status.OPTIMAL,
        x=x,
        dual_eq=y[:m_eq],
        dual_ge=y[m_eq:m_eq + m_ge],
        message="optimal",
        backend="simplex",
    )


class SubprocessBackend:
    """Delegate solving to an external command speaking the JSON protocol.

    The command receives ``LinearProgram.to_json()`` on stdin and must print a
    ``Solution`` JSON object (``status``, ``x``, optional duals) on stdout.
    """

    def __init__(self, command):
        self.command = list(command)

    def __call__(self, lp):
        proc = subprocess.run(self.command, input=lp.to_json(), capture_output=True, text=True, check=False)
        if proc.returncode != 0:
            return Solution(Status.NUMERICAL, message=proc.stderr.strip(), backend="subprocess")
        sol = Solution.from_dict(json.loads(proc.stdout))
        sol.backend = "subprocess"
        return sol


BACKENDS = {"highs": _solve_highs, "simplex": _solve_simplex}


def solve(lp, backend=None, raise_on_failure=False):
    """Solve ``lp`` and return a :class:`Solution` with residuals attached.

    ``backend`` is a name from :data:`BACKENDS`, a callable taking the LP, or
    ``None`` for the configured default.
    """
    backend = backend or settings.backend
    fn = BACKENDS[backend] if isinstance(backend, str) else backend
    sol = _finish(lp, fn(lp))
    if raise_on_failure and not sol.ok:
        raise SolverError(f"LP {lp.name or '<unnamed>'} ended with status {sol.status.value}: {sol.message}", sol)
    return sol


def solve_optimal(lp, backend=None):
    """:func:`solve` that raises :class:`SolverError` unless the status is Optimal."""
    return solve(lp, backend=backend, raise_on_failure=True)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    backend = argv[0] if argv else "simplex"
    lp = LinearProgram.from_dict(json.load(sys.stdin))
    sol = BACKENDS[backend](lp)
    json.dump(sol.to_dict(), sys.stdout)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
