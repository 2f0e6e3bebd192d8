"""Command-line front end.

Every command prints one JSON report (sorted keys, fixed float formatting) so
that identical inputs and settings give byte-identical output.  Domain errors
exit with code 2 and solver failures with code 3.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import sys

import click
import numpy as np

from . import geometry, polyhedra
from .config import override
from .entropy import relative_entropy
from .exceptions import DomainError, SolverError
from .games import GameSpec, chsh, classical_value, compile_game, seesaw_lower
from .hierarchy import LocalProblem, problem_constants, run_schedule
from .rounding import inner_search

VERSION = "0.1.0"


@dataclasses.dataclass
class RunConfig:
    tol: float = 1e-7
    cap_dim: int = 64
    cap_enum: int = 4096
    n_max: int = 4
    backend: str = "highs"
    cache_dir: str | None = None
    seed: int = 0
    out_dir: str | None = None

    def __post_init__(self):
        if self.cap_dim < 1 or self.cap_enum < 1 or self.n_max < 1:
            raise DomainError("caps and n_max must be positive")
        if self.tol <= 0:
            raise DomainError("tol must be positive")

    def settings(self):
        return override(tol=self.tol, cap_dim=self.cap_dim, cap_enum=self.cap_enum,
                        backend=self.backend, cache_dir=self.cache_dir)

    def to_dict(self):
        # the output and cache locations do not influence results
        return {"tol": self.tol, "cap_dim": self.cap_dim, "cap_enum": self.cap_enum,
                "n_max": self.n_max, "backend": self.backend, "seed": self.seed}


# --------------------------------------------------------------------------
# inputs
# --------------------------------------------------------------------------


def load_space(spec):
    """``simplex:d``, ``square``, ``polygon:n`` or a path to a StateSpace JSON file."""
    if os.path.exists(spec):
        with open(spec) as fh:
            return geometry.StateSpace.from_json(fh.read())
    name, _, arg = spec.partition(":")
    if name == "simplex" and arg:
        return geometry.simplex(int(arg))
    if name == "square" and not arg:
        return geometry.square()
    if name == "polygon" and arg:
        return geometry.polygon(int(arg))
    raise DomainError(f"unknown state space {spec!r}")


def parse_vector(text):
    try:
        vals = json.loads(text) if text.strip().startswith("[") else [float(v) for v in text.split(",")]
        return np.asarray(vals, dtype=float)
    except ValueError as exc:
        raise DomainError(f"cannot parse vector {text!r}") from exc


def pr_box_problem():
    """CHSH-type correlator over two squares; minimized value -4 at level 1, -2 on product states."""
    S = geometry.square()
    P = np.zeros((3, 3))
    P[1, 1] = P[1, 2] = P[2, 1] = -1.0
    P[2, 2] = 1.0
    return LocalProblem(S, S, P, name="pr-box")


def load_problem(spec):
    if spec == "pr-box":
        return pr_box_problem()
    if not os.path.exists(spec):
        raise DomainError(f"no such problem file {spec!r}")
    with open(spec) as fh:
        try:
            return LocalProblem.from_json(fh.read())
        except (KeyError, ValueError) as exc:
            raise DomainError(f"malformed problem: {exc}") from exc


def load_game(spec):
    if spec == "chsh":
        return chsh()
    if not os.path.exists(spec):
        raise DomainError(f"no such game file {spec!r}")
    with open(spec) as fh:
        try:
            return GameSpec.from_json(fh.read())
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"malformed game: {exc}") from exc


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _fmt(v):
    """Floats with 12 significant digits, so reports are stable across platforms."""
    if isinstance(v, dict):
        return {k: _fmt(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_fmt(x) for x in v]
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.12g}") + 0.0
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return _fmt(v.tolist())
    return v


def dumps(report):
    return json.dumps(_fmt(report), sort_keys=True, indent=2) + "\n"


def cmd_entropy(space, x, y, config, method="exact-pwl"):
    with config.settings():
        K = load_space(space)
        res = relative_entropy(K, parse_vector(x), parse_vector(y), method=method)
    return {
        "command": "entropy",
        "version": VERSION,
        "space": K.label,
        "input_hash": polyhedra.content_hash(K.vertices, parse_vector(x), parse_vector(y), extra=method),
        "config": config.to_dict(),
        "result": res.to_dict(),
    }


def cmd_solve(problem_spec, config, do_round=False):
    with config.settings():
        problem = load_problem(problem_spec)
        consts = problem_constants(problem)
        reports = run_schedule(problem, config.n_max, constants=consts)
        rows, incumbent = [], None
        for rep in reports:
            row = {"level": rep.level, "outer": rep.p_n, "bound": rep.error_bound, "inner": None}
            entry = {"outer": rep.to_dict()}
            if do_round:
                inner = inner_search(problem, rep)
                # a certified point from an earlier level stays a valid inner bound
                if incumbent is None or inner.best_value < incumbent:
                    incumbent = inner.best_value
                row["inner"] = incumbent
                entry["inner"] = inner.to_dict()
            rows.append((row, entry))
    return {
        "command": "solve",
        "version": VERSION,
        "problem": problem.name,
        "input_hash": problem.content_hash(),
        "config": config.to_dict(),
        "constants": consts.to_dict(),
        "P_norm": reports[0].P_norm,
        "table": [r for r, _ in rows],
        "levels": [e for _, e in rows],
    }


def cmd_game(game_spec, space, config, restarts=16):
    with config.settings():
        G = load_game(game_spec)
        K = load_space(space)
        prob = compile_game(G, K)
        consts = problem_constants(prob)
        reports = run_schedule(prob, config.n_max, constants=consts)
        see = seesaw_lower(G, K, restarts=restarts, seed=config.seed, compiled=prob)
        try:
            classical = classical_value(G)
        except DomainError:
            classical = None
    return {
        "command": "game",
        "version": VERSION,
        "game": G.to_dict(),
        "space": K.label,
        "free_game": G.is_free,
        "input_hash": polyhedra.content_hash(G.pi, G.V, K.vertices, K.facets, extra="game"),
        "config": config.to_dict(),
        "constants": consts.to_dict(),
        "classical_value": classical,
        "seesaw_lower": see.value,
        "seesaw_exhaustive": see.exhaustive,
        "upper_bounds": [{"level": r.level, "value": -r.p_n, "bound": r.error_bound} for r in reports],
    }


def plot_csv(report):
    """CSV columns ``level, outer, inner, bound`` of a solve report."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "outer", "inner", "bound"])
    for row in _fmt(report["table"]):
        w.writerow([row["level"], row["outer"], "" if row["inner"] is None else row["inner"], row["bound"]])
    return buf.getvalue()


def pretty(report):
    lines = [f"{report['command']}  hash={report['input_hash']}"]
    if "constants" in report:
        c = report["constants"]
        lines.append(f"lambda_A={c['lambda_A']:.6g}  c_A={c['c_A']:.6g}  f_AB={c['f_AB']:.6g}  c_AB={c['c_AB']:.6g}")
    if report["command"] == "entropy":
        r = report["result"]
        lines.append(f"D = {r['value']:.9g} nats  [{r['lower']:.9g}, {r['upper']:.9g}]  mu={r['mu']:.6g} lambda={r['lambda']:.6g}")
    elif report["command"] == "solve":
        lines.append(f"{'level':>5} {'outer':>14} {'inner':>14} {'bound':>14}")
        for row in report["table"]:
            inner = "-" if row["inner"] is None else f"{row['inner']:.9g}"
            lines.append(f"{row['level']:>5} {row['outer']:>14.9g} {inner:>14} {row['bound']:>14.6g}")
    else:
        lines.append(f"classical={report['classical_value']}  seesaw={report['seesaw_lower']:.9g}")
        for row in report["upper_bounds"]:
            lines.append(f"level {row['level']}: upper {row['value']:.9g}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# click wrappers
# --------------------------------------------------------------------------


def _emit(ctx, report, name):
    text = pretty(report) if ctx.obj["pretty"] else dumps(report)
    out = ctx.obj["config"].out_dir
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, f"{name}.json"), "w") as fh:
            fh.write(dumps(report))
        if report["command"] == "solve":
            with open(os.path.join(out, f"{name}.csv"), "w") as fh:
                fh.write(plot_csv(report))
    click.echo(text, nl=False)


def _run(fn):
    try:
        return fn()
    except DomainError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)
    except SolverError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(3)


@click.group(context_settings={"auto_envvar_prefix": "GPTDF"})
@click.option("--tol", type=float, default=1e-7, show_default=True, help="Feasibility tolerance.")
@click.option("--cap-dim", type=int, default=64, show_default=True, help="Largest product dimension d_A*d_B.")
@click.option("--cap-enum", type=int, default=4096, show_default=True, help="Largest enumeration size.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for randomized restarts.")
@click.option("--backend", default="highs", show_default=True, help="LP backend: highs or simplex.")
@click.option("--cache", "cache_dir", default=None, help="Directory for the vertex cache.")
@click.option("--out", "out_dir", default=None, help="Directory for JSON/CSV reports.")
@click.option("--pretty", is_flag=True, help="Human-readable summary instead of JSON.")
@click.pass_context
def main(ctx, tol, cap_dim, cap_enum, seed, backend, cache_dir, out_dir, pretty):
    """Relative entropy, de Finetti hierarchies and game bounds for polytopal state spaces."""
    cfg = _run(lambda: RunConfig(tol=tol, cap_dim=cap_dim, cap_enum=cap_enum, backend=backend,
                                 cache_dir=cache_dir, seed=seed, out_dir=out_dir))
    ctx.obj = {"config": cfg, "pretty": pretty}


@main.command()
@click.option("--space", required=True, help="simplex:d, square, polygon:n or a JSON file.")
@click.option("--x", "x", required=True, help="State x as comma-separated coordinates.")
@click.option("--y", "y", required=True, help="Interior reference state y.")
@click.option("--method", type=click.Choice(["exact-pwl", "adaptive"]), default="exact-pwl")
@click.pass_context
def entropy(ctx, space, x, y, method):
    """Relative entropy D(x||y) in nats."""
    report = _run(lambda: cmd_entropy(space, x, y, ctx.obj["config"], method))
    _emit(ctx, report, "entropy")


@main.command()
@click.argument("problem")
@click.option("--levels", type=int, default=4, show_default=True, help="Highest hierarchy level.")
@click.option("--round", "do_round", is_flag=True, help="Run the rounding search at every level.")
@click.pass_context
def solve(ctx, problem, levels, do_round):
    """Outer (and inner) bounds for PROBLEM (a JSON file or 'pr-box')."""
    cfg = dataclasses.replace(ctx.obj["config"], n_max=levels)
    ctx.obj["config"] = _run(lambda: RunConfig(**dataclasses.asdict(cfg)))
    report = _run(lambda: cmd_solve(problem, ctx.obj["config"], do_round))
    _emit(ctx, report, "solve")


@main.command()
@click.argument("game")
@click.option("--space", default="square", show_default=True, help="Bob's state space.")
@click.option("--levels", type=int, default=1, show_default=True, help="Highest hierarchy level.")
@click.option("--restarts", type=int, default=16, show_default=True, help="Seesaw starting points.")
@click.pass_context
def game(ctx, game, space, levels, restarts):
    """Upper and lower bounds on the assemblage value of GAME (a JSON file or 'chsh')."""
    cfg = dataclasses.replace(ctx.obj["config"], n_max=levels)
    ctx.obj["config"] = _run(lambda: RunConfig(**dataclasses.asdict(cfg)))
    report = _run(lambda: cmd_game(game, space, ctx.obj["config"], restarts))
    _emit(ctx, report, "game")


if __name__ == "__main__":
    main()
