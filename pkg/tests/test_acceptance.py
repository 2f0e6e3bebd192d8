"""The eleven acceptance criteria, each reporting one PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from gpt_definetti import entropy as en
from gpt_definetti import games as gm
from gpt_definetti import geometry as g
from gpt_definetti import hierarchy as h
from gpt_definetti import rounding as r
from gpt_definetti.cli import RunConfig, cmd_solve, dumps, pr_box_problem
from gpt_definetti.tensor import ProductSpace

from conftest import ACCEPTANCE_LINES
from oracles import full_tensor_level, product_optimum, strategy_value


def report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def random_pair(K, rng):
    x = K.random_state(rng, concentration=0.5)
    y = 0.9 * K.random_state(rng) + 0.1 * K.vertices.mean(axis=0)
    return x, y


def test_criterion_01_entropy_matches_kl():
    rng = np.random.default_rng(101)
    worst, start = 0.0, time.perf_counter()
    for d in range(2, 6):
        K = g.simplex(d)
        for i in range(200):
            x = rng.dirichlet(np.full(d, 0.5))
            if i % 10 == 0:
                x = np.eye(d)[rng.integers(d)]
            y = rng.dirichlet(np.ones(d))
            worst = max(worst, abs(en.relative_entropy(K, x, y).value - en.kl_divergence(x, y)))
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-6 and elapsed < 10, f"max |D - KL| = {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_pinsker():
    rng = np.random.default_rng(102)
    spaces = [g.simplex(3), g.square(), g.polygon(5)]
    worst = math.inf
    for i in range(500):
        K = spaces[i % 3]
        x, y = random_pair(K, rng)
        worst = min(worst, en.pinsker_gap(K, x, y))
    report(2, worst >= -1e-9, f"min Pinsker gap = {worst:.3e}")


def test_criterion_03_monogamy():
    rng = np.random.default_rng(103)
    notes, ok = [], True
    for A in (g.square(), g.simplex(3)):
        P = ProductSpace(A, g.square())
        tau, lam = g.optimize_tau(A)
        bound = en.monogamy_constant(lam)
        centre = np.kron(A.vertices.mean(axis=0), g.square().vertices.mean(axis=0))
        V = P.max_vertices
        worst = -math.inf
        for _ in range(100):
            x = rng.dirichlet(np.full(len(V), 0.3)) @ V
            x = 0.95 * x + 0.05 * centre  # interior marginals
            worst = max(worst, en.mutual_information_upper(P, x, tau) - bound)
        ok &= worst <= 1e-6
        notes.append(f"{A.label}: max D - lambda(1 + ln lambda) = {worst:.4f}")
    report(3, ok, "; ".join(notes))


def test_criterion_04_lambda_values():
    errs = [abs(g.optimize_tau(g.simplex(d))[1] - d) for d in range(2, 7)]
    errs.append(abs(g.optimize_tau(g.square())[1] - 2))
    disc = g.optimize_tau(g.polygon(64))[1]
    ok = max(errs) <= 1e-6 and 2 - 1e-9 <= disc <= 2.01
    report(4, ok, f"max |lambda - expected| = {max(errs):.1e}, 64-gon lambda = {disc:.6f}")


def test_criterion_05_pr_box_sandwich():
    prob = pr_box_problem()
    start = time.perf_counter()
    consts = h.problem_constants(prob)
    reps = h.run_schedule(prob, 6, constants=consts)
    sep = product_optimum(prob)
    inner = min(r.inner_search(prob, rep).best_value for rep in reps)
    values = [rep.p_n for rep in reps]
    monotone = all(a <= b + 1e-9 for a, b in zip(values, values[1:]))
    sandwich = values[-1] <= sep + 1e-9 and sep <= inner + 1e-9
    gaps = all(sep - rep.p_n <= rep.error_bound + 1e-6 for rep in reps)
    elapsed = time.perf_counter() - start
    ok = monotone and sandwich and gaps and elapsed < 300
    report(5, ok, f"p = {[round(v, 6) for v in values]}, sep = {sep}, inner = {inner:.6f}, {elapsed:.1f} s")


def test_criterion_06_nuclear_collapse():
    rng = np.random.default_rng(106)
    worst = 0.0
    for k in range(2, 5):
        for A in (g.square(), g.polygon(5), g.simplex(3)):
            for _ in range(4):
                prob = h.LocalProblem(A, g.simplex(k), rng.normal(size=(A.dim, k)))
                worst = max(worst, abs(h.solve_level(prob, 1).p_n - product_optimum(prob)))
    report(6, worst <= 1e-6, f"max |p1 - oracle| = {worst:.2e}")


def test_criterion_07_symmetric_basis():
    rng = np.random.default_rng(107)
    spaces = [g.simplex(2), g.simplex(3), g.square()]
    worst = 0.0
    for i in range(50):
        A, B = spaces[rng.integers(3)], spaces[rng.integers(3)]
        n = 2 + i % 2
        prob = h.LocalProblem(A, B, rng.normal(size=(A.dim, B.dim)))
        worst = max(worst, abs(h.solve_level(prob, n).p_n - full_tensor_level(prob, n)))
    report(7, worst <= 1e-7, f"max |sym - full| = {worst:.2e}")


def constrained_instance(rng):
    """Square x square with ``x_A[1] = c`` and an active cut ``x_B[2] <= t`` on B."""
    S = g.square()
    c, t = rng.uniform(-0.6, 0.6), rng.uniform(-0.5, 0.5)
    P = rng.normal(size=(3, 3))
    P[:, 2] -= 4.0 * S.unit  # rewards large x_B[2], so the cut binds
    return h.LocalProblem(S, S, P, F_A=np.array([[-c, 1.0, 0.0]]), G_B=np.array([[t, 0.0, -1.0]]))


def test_criterion_08_rounding_certification():
    rng = np.random.default_rng(108)
    fails, worst_res, active = [], 0.0, 0
    for i in range(20):
        prob = constrained_instance(rng)
        opt = product_optimum(prob)
        rep = h.solve_level(prob, 4)
        try:
            inner = r.inner_search(prob, rep)
        except Exception as exc:  # noqa: BLE001
            fails.append(f"{i}: {type(exc).__name__}")
            continue
        worst_res = max(worst_res, *inner.residuals.values())
        xb = inner.best_point[1]
        active += abs(prob.G_B @ xb).min() <= 1e-6
        if not (inner.best_value - opt <= inner.certified_bound + 1e-9 and opt - rep.p_n <= rep.error_bound + 1e-6
                and rep.p_n <= opt + 1e-9 <= inner.best_value + 2e-9):
            fails.append(f"{i}: bound")
    ok = not fails and worst_res <= 1e-7
    report(8, ok, f"20 instances, worst residual {worst_res:.1e}, cut active at the rounded point in {active}, "
                  f"failures {fails}")


def test_criterion_09_games():
    chsh = gm.chsh()
    notes, ok = [], True
    # Delta_2: the level-1 relaxation against the 16-strategy oracle
    prob = gm.compile_game(chsh, g.simplex(2))
    up = -h.solve_level(prob, 1).p_n
    see = gm.seesaw_lower(chsh, g.simplex(2), compiled=prob).value
    oracle = strategy_value(chsh)
    ok &= abs(up - 0.75) <= 1e-6 and abs(see - 0.75) <= 1e-6 and abs(oracle - 0.75) <= 1e-12
    notes.append(f"simplex2 level-1 upper {up:.6f}, seesaw {see:.6f}")
    # square gbit: the PR-box strategy wins with certainty
    prob = gm.compile_game(chsh, g.square())
    up2 = -h.solve_level(prob, 2).p_n
    see = gm.seesaw_lower(chsh, g.square(), compiled=prob).value
    ok &= abs(up2 - 1) <= 1e-6 and abs(see - 1) <= 1e-6
    notes.append(f"square level-2 upper {up2:.6f}, seesaw {see:.6f}")
    rng = np.random.default_rng(109)
    ordered = 0
    for _ in range(10):
        G = gm.random_game(rng)
        K = g.square()
        p = gm.compile_game(G, K)
        c, s, u = gm.classical_value(G), gm.seesaw_lower(G, K, compiled=p).value, -h.solve_level(p, 1).p_n
        ordered += c <= s + 1e-9 and s <= u + 1e-9
    ok &= ordered == 10
    notes.append(f"ordering holds on {ordered}/10 random games")
    report(9, ok, "; ".join(notes))


def test_criterion_10_lift_equivalence():
    rng = np.random.default_rng(110)
    A, B = g.simplex(3), g.square()
    worst = 0.0
    for _ in range(10):
        prob = h.LocalProblem(A, B, rng.normal(size=(3, 3)))
        ident, _, _ = h.lift_program(prob, h.LiftData.identity(A), h.LiftData.identity(B))
        proj, _, _ = h.lift_program(prob, h.LiftData.identity(A), h.LiftData.simplex_projection(B))
        worst = max(worst, abs(h.solve_level(ident, 1).p_n - h.solve_level(proj, 1).p_n))
    report(10, worst <= 1e-7, f"max level-1 difference = {worst:.2e}")


def test_criterion_11_determinism():
    a = dumps(cmd_solve("pr-box", RunConfig(n_max=3), True))
    b = dumps(cmd_solve("pr-box", RunConfig(n_max=3), True))
    report(11, a == b, f"{len(a)} bytes, identical = {a == b}")
