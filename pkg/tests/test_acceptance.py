"""Acceptance criteria 1-10, each at its stated tolerance and time limit.

Every test prints one ``criterion N: PASS|FAIL`` line with the measured values.
"""
import itertools
import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from macfb.bounds import (GRID_TOL, closed_form_parallel, d_lb, lower_geometric,
                          lower_three_phase, lower_two_phase, upper_lambda_mixed,
                          upper_three_phase, upper_two_phase)
from macfb.channel import build_additive_mod_m, d_ub, kl
from macfb.driftlab import corpus, run_checks
from macfb.hypotest import ConfirmationDesign, error_curve, exponent_slope
from macfb.infotheory import OutputTree, make_grid, vl_entropy
from macfb.reference import (additive_exponent, parallel_bscs, rate_corpus, stop_at_first_one,
                             ternary_scheme)
from macfb.vlcsim import run_scheme


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {number}: {detail}"
    return emit


def test_criterion_01_additive_tightness(report):
    start = time.perf_counter()
    worst = 0.0
    for m, p in itertools.product((3, 4, 5), (0.05, 0.1, 0.15)):
        ch = build_additive_mod_m(m, p)
        exact = additive_exponent(m, p)
        for value in (d_lb(ch)[0], d_ub(ch)):
            worst = max(worst, abs(value - exact) / exact)
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-6 and elapsed < 5,
           f"max relative error {worst:.2e} (tol 1e-6), {elapsed:.2f} s (limit 5 s)")


def test_criterion_02_two_phase_coincidence(report):
    start = time.perf_counter()
    ch = build_additive_mod_m(3, 0.1)
    lb = lower_two_phase(ch, (0.2, 0.2), refine=True)
    ub = upper_two_phase(ch, (0.2, 0.2), refine=True)
    elapsed = time.perf_counter() - start
    ok = abs(lb - ub) <= 1e-3 and abs(lb - 0.83310) <= 1e-3 and elapsed < 30
    report(2, ok, f"lower {lb:.6f}, upper {ub:.6f}, target 0.83310 (tol 1e-3), {elapsed:.2f} s")


def test_criterion_03_parallel_matching(report):
    start = time.perf_counter()
    ch, d1, c1, d2, c2 = parallel_bscs()
    g = make_grid(ch)
    worst = 0.0
    fracs = (0.1, 0.3, 0.5, 0.7, 0.9)
    for f1, f2 in itertools.product(fracs, fracs):
        r = (f1 * c1, f2 * c2)
        cf = closed_form_parallel(d1, c1, d2, c2, r)
        worst = max(worst, abs(lower_three_phase(ch, r, g).value - cf),
                    abs(upper_three_phase(ch, r, g) - cf))
    r = (0.8 * c1, 0.2 * c2)
    gain = lower_three_phase(ch, r, g).value - lower_two_phase(ch, r, g)
    elapsed = time.perf_counter() - start
    ok = worst <= 0.02 and gain >= 0.2 and elapsed < 120
    report(3, ok, f"max |bound - closed form| {worst:.2e} (tol 0.02), three-phase gain {gain:.4f} "
                  f"(need >= 0.2), {elapsed:.1f} s")


def random_tree(rng):
    y_size, horizon = int(rng.integers(2, 4)), int(rng.integers(1, 6))
    prob, stop = {(): 1.0}, set()
    level = [()]
    for t in range(horizon):
        nxt = []
        for path in level:
            if t > 0 and rng.random() < 0.3:
                stop.add(path)
                continue
            split = rng.dirichlet(np.ones(y_size))
            for y in range(y_size):
                prob[path + (y,)] = prob[path] * split[y]
                nxt.append(path + (y,))
        level = nxt
    return OutputTree(y_size, horizon, prob, stop)


def test_criterion_04_variable_length_entropy(report):
    start = time.perf_counter()
    h = vl_entropy(stop_at_first_one())
    exact = h == (1.75, 1.5, 0.25)
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(500):
        h_yt, h_t, h_cond = vl_entropy(random_tree(rng))
        worst = max(worst, abs(h_yt - h_t - h_cond))
    elapsed = time.perf_counter() - start
    report(4, exact and worst <= 1e-12 and elapsed < 5,
           f"example {tuple(round(v, 15) for v in h)}, decomposition error {worst:.1e} over 500 trees, "
           f"{elapsed:.2f} s")


def test_criterion_05_geometric_equivalence(report):
    worst_corpus = 0.0
    for ch, r in rate_corpus(20):
        g = lower_geometric(ch, r)
        worst_corpus = max(worst_corpus, abs(g.polar - g.lambda_form))
    worst_additive = 0.0
    for m, p in itertools.product((3, 4, 5), (0.05, 0.1, 0.15)):
        ch = build_additive_mod_m(m, p)
        for r in ((0.2, 0.2), (0.05, 0.15)):
            lb2 = lower_two_phase(ch, r)
            g = lower_geometric(ch, r)
            worst_additive = max(worst_additive, abs(g.polar - lb2), abs(g.lambda_form - lb2))
    ok = worst_corpus <= GRID_TOL and worst_additive <= 1e-3
    report(5, ok, f"polar vs lambda form {worst_corpus:.1e} on 20 corpus pairs (tol {GRID_TOL}), "
                  f"vs two-phase on additive MACs {worst_additive:.1e} (tol 1e-3)")


def test_criterion_06_stein_slope(report):
    start = time.perf_counter()
    ch = build_additive_mod_m(3, 0.1)
    design = ConfirmationDesign(1, (0, 1), [1.0, 0.0, 0.0], None, 50, 0, 0.0)
    curve = error_curve(ch, design, [50, 100, 150, 200], lambda n: -0.05 * n)
    slope = exponent_slope(curve)
    target = kl(ch.q[0, 0], ch.q[1, 0])
    alpha200 = curve.points[-1][1]
    elapsed = time.perf_counter() - start
    ok = abs(slope - target) <= 0.05 * target and alpha200 <= 0.1 and elapsed < 30
    report(6, ok, f"slope {slope:.4f} vs KL {target:.4f} (tol 5%), alpha(200) {alpha200:.2e} "
                  f"(need <= 0.1), {elapsed:.2f} s")


def test_criterion_07_drift_corpus(report):
    start = time.perf_counter()
    names = ("linear_drift", "eta_bound", "log_drift", "pruned_submartingale", "doob", "fano")
    violations = {n: 0 for n in names}
    pairs = log_phase = 0
    for ch, code in corpus(100, seed=7):
        reps = run_checks(ch, code, 0.3)
        pairs += 1
        log_phase += reps["log_drift"].checked > 0
        for n in names:
            violations[n] += len(reps[n].violations)
    elapsed = time.perf_counter() - start
    ok = pairs >= 100 and not any(violations.values()) and elapsed < 180
    report(7, ok, f"{pairs} pairs ({log_phase} with log-phase nodes), violations {violations}, "
                  f"{elapsed:.1f} s")


def test_criterion_08_renewal_identity(report):
    start = time.perf_counter()
    ch, cfg = ternary_scheme(n=18, m=8)
    r = run_scheme(ch, cfg, 100_000, seed=8)
    resid, sigma = r.renewal_residual(), r.renewal_sigma()
    blocks, bsig = r.blocks_residual(), r.blocks_sigma()
    elapsed = time.perf_counter() - start
    ok = abs(resid) <= 4 * sigma and abs(blocks) <= 1.959963984540054 * bsig and elapsed < 120
    report(8, ok, f"Pe {r.pe:.5f}, first-block q {r.q_first:.5f}, Peb {r.p_eb_first:.5f}; residual {resid:.2e} "
                  f"(4 sigma = {4 * sigma:.2e}); E[blocks](1-q) - 1 = {blocks:.2e} "
                  f"(95% CI half-width {1.96 * bsig:.2e}); {elapsed:.1f} s")


def test_criterion_09_sandwich(report):
    bad = []
    n = 0
    for ch, r in rate_corpus():
        g = make_grid(ch)
        lb2 = lower_two_phase(ch, r, g)
        lb3 = lower_three_phase(ch, r, g).value
        top = min(upper_three_phase(ch, r, g), upper_two_phase(ch, r, g),
                  upper_lambda_mixed(ch, r, g))
        n += 1
        if not (lb2 <= lb3 + 1e-12 and lb3 <= top + GRID_TOL):
            bad.append((r, lb2, lb3, top))
    report(9, not bad, f"{len(bad)} violations over {n} (channel, rate) pairs")


def _cli(argv, threads):
    env = dict(os.environ, MACFB_THREADS=str(threads), SOURCE_DATE_EPOCH="1700000000")
    out = subprocess.run([sys.executable, "-m", "macfb", *argv], capture_output=True, text=True,
                         env=env, check=True).stdout
    if out.lstrip().startswith("{"):
        return json.dumps(json.loads(out)["result"], sort_keys=True)
    return "\n".join(line for line in out.splitlines() if not line.startswith("# threads_cap"))


def test_criterion_10_determinism(report, tmp_path):
    ch, cfg = ternary_scheme()
    config = tmp_path / "scheme.json"
    config.write_text(json.dumps(cfg.to_dict()))
    _, small = ternary_scheme(n=12, m=4)
    small_cfg = tmp_path / "small.json"
    small_cfg.write_text(json.dumps(small.to_dict()))
    _, pz = d_lb(ch)
    design = tmp_path / "design.json"
    design.write_text(json.dumps({"user": 1, "x_phase2": [0, 1], "p_other": [1, 0, 0],
                                  "pz": pz.ravel().tolist(), "n2": 1, "n3": 1, "lam": 0.0}))
    commands = {
        "simulate": ["simulate", "--channel", "additive:m=3,p=0.1", "--config", str(config),
                     "--trials", "30000", "--seed", "11"],
        "sweep": ["sweep", "--channel", "additive:m=3,p=0.1", "--config", str(small_cfg),
                  "--trials", "3000", "--seed", "12", "--gamma-step", "0.25"],
        "confirm --mc": ["confirm", "--channel", "additive:m=3,p=0.1", "--design", str(design),
                         "--n-sweep", "4:8:2", "--mc", "--trials", "20000", "--seed", "13"],
        "drift corpus": ["drift", "--channel", "corpus", "--count", "5", "--seed", "14"],
    }
    differing = [name for name, argv in commands.items() if _cli(argv, 1) != _cli(argv, 4)]
    report(10, not differing, f"{len(commands)} stochastic commands compared at MACFB_THREADS=1 vs 4; "
                              f"differing: {differing or 'none'}")
