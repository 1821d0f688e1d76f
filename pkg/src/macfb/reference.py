"""Reference instances with closed-form answers, and the checks run against
them by ``macfb example`` and the acceptance tests."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .bounds import (closed_form_parallel, d_lb, lower_three_phase, lower_two_phase,
                     upper_three_phase, upper_two_phase)
from .channel import ChannelModel, bsc, build_additive_mod_m, build_product, d_ub, validate_channel
from .hypotest import ConfirmationDesign
from .infotheory import OutputTree, binary_entropy, make_grid, vl_entropy
from .vlcsim import SchemeConfig

EXAMPLES = ("ternary", "mary", "parallel", "vlentropy")


class Check(NamedTuple):
    name: str
    expected: float
    computed: float
    tol: float
    relative: bool = False

    @property
    def passed(self) -> bool:
        err = abs(self.computed - self.expected)
        if self.relative:
            err /= max(abs(self.expected), 1e-300)
        return err <= self.tol

    def to_dict(self) -> dict:
        return {"name": self.name, "expected": self.expected, "computed": self.computed,
                "tol": self.tol, "relative": self.relative, "passed": self.passed}


class Lower(NamedTuple):
    """A one-sided check: computed >= expected - tol."""

    name: str
    expected: float
    computed: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.computed >= self.expected - self.tol

    def to_dict(self) -> dict:
        return {"name": self.name, "expected": f">= {self.expected}", "computed": self.computed,
                "tol": self.tol, "passed": self.passed}


def additive_exponent(m: int, p: float) -> float:
    """(1 - m p) log2((1 - (m-1) p) / p): d_lb = d_ub of the additive mod-m MAC."""
    return (1 - m * p) * math.log2((1 - (m - 1) * p) / p)


def bsc_divergence(p: float) -> float:
    return (1 - 2 * p) * math.log2((1 - p) / p)


def bsc_capacity(p: float) -> float:
    return 1 - binary_entropy(p)


def parallel_bscs(p1: float = 0.1, p2: float = 0.2) -> tuple[ChannelModel, float, float, float, float]:
    """BSC(p1) x BSC(p2) and its (D1, C1, D2, C2)."""
    ch = build_product(bsc(p1), bsc(p2))
    return ch, bsc_divergence(p1), bsc_capacity(p1), bsc_divergence(p2), bsc_capacity(p2)


def ternary_scheme(n: int = 18, m: int = 8, gammas=(0.6, 0.2, 0.2), m_hybrid: int = 2,
                   lam: float = 0.0):
    """Ternary additive MAC (p=0.1) with a three-phase scheme: user 1 confirms in
    the hybrid phase while user 2 sends part of its message with uniform inputs,
    then both confirm with the d_lb-optimal pz."""
    ch = build_additive_mod_m(3, 0.1)
    _, pz = d_lb(ch)
    n2 = int(math.floor(gammas[1] * n + 1e-9))
    n3 = int(math.floor(gammas[2] * n + 1e-9))
    design = ConfirmationDesign(1, (0, 1), [1 / 3] * 3, pz.ravel().tolist(), n2, n3, lam)
    return ch, SchemeConfig(n, tuple(gammas), m, m, design, m_hybrid=m_hybrid)


def stop_at_first_one(horizon: int = 3) -> OutputTree:
    """Fair output bits, stopping at the first 1 or at the horizon."""
    prob, stop = {(): 1.0}, set()
    level = [()]
    for t in range(horizon):
        nxt = []
        for path in level:
            for y in (0, 1):
                child = path + (y,)
                prob[child] = 0.5 ** (t + 1)
                if y == 1:
                    stop.add(child)
                else:
                    nxt.append(child)
        level = nxt
    return OutputTree(2, horizon, prob, stop)


CORPUS_SHAPES = ((2, 2, 2), (2, 2, 3), (2, 2, 4), (3, 2, 3), (3, 3, 3))
CORPUS_SIZE = 60
CORPUS_SEED = 1


def rate_corpus(count: int = CORPUS_SIZE, seed: int = CORPUS_SEED, rates_per_channel: int = 3):
    """Random (channel, rate pair) cases for cross-checking the bounds.

    Rows are Dirichlet(0.7) draws floored at 0.02. Rate pairs sit strictly
    inside the region of a random grid input, at a random fraction of its
    single-user informations.
    """
    rng = np.random.default_rng(seed)
    made = 0
    k = 0
    while made < count:
        a, b, y = CORPUS_SHAPES[k % len(CORPUS_SHAPES)]
        k += 1
        q = np.maximum(rng.dirichlet(np.full(y, 0.7), size=(a, b)), 0.02)
        ch = validate_channel(q / q.sum(-1, keepdims=True))
        mi = make_grid(ch).mi.reshape(-1, 3)
        for _ in range(min(rates_per_channel, count - made)):
            i = mi[rng.integers(len(mi))]
            f = rng.uniform(0.05, 0.9)
            yield ch, (f * i[0] * rng.uniform(), f * i[1] * rng.uniform())
            made += 1


def ternary_checks() -> list:
    ch = build_additive_mod_m(3, 0.1)
    exact = additive_exponent(3, 0.1)
    r = (0.2, 0.2)
    lb = lower_two_phase(ch, r, refine=True)
    ub = upper_two_phase(ch, r, refine=True)
    return [Check("d_lb", exact, d_lb(ch)[0], 1e-6, True),
            Check("d_ub", exact, d_ub(ch), 1e-6, True),
            Check("lower_two_phase(0.2,0.2)", 0.83310, lb, 1e-3),
            Check("upper_two_phase(0.2,0.2)", 0.83310, ub, 1e-3),
            Check("upper - lower", 0.0, ub - lb, 1e-3)]


def mary_checks() -> list:
    out = []
    for m in (3, 4, 5):
        for p in (0.05, 0.1, 0.15):
            ch = build_additive_mod_m(m, p)
            exact = additive_exponent(m, p)
            out.append(Check(f"d_lb m={m} p={p}", exact, d_lb(ch)[0], 1e-6, True))
            out.append(Check(f"d_ub m={m} p={p}", exact, d_ub(ch), 1e-6, True))
    return out


def parallel_checks(tol: float = 0.02) -> list:
    ch, d1, c1, d2, c2 = parallel_bscs()
    r = (0.8 * c1, 0.2 * c2)
    cf = closed_form_parallel(d1, c1, d2, c2, r)
    lb3 = lower_three_phase(ch, r).value
    ub3 = upper_three_phase(ch, r)
    lb2 = lower_two_phase(ch, r)
    return [Check("lower_three_phase(0.8C1,0.2C2)", cf, lb3, tol),
            Check("upper_three_phase(0.8C1,0.2C2)", cf, ub3, tol),
            Lower("three-phase gain over two-phase", 0.2, lb3 - lb2, 0.0)]


def vlentropy_checks() -> list:
    h_yt, h_t, h_cond = vl_entropy(stop_at_first_one())
    return [Check("H(Y^T)", 1.75, h_yt, 1e-12), Check("H(T)", 1.5, h_t, 1e-12),
            Check("H(Y^T|T)", 0.25, h_cond, 1e-12)]


def example_checks(name: str) -> list:
    table = {"ternary": ternary_checks, "mary": mary_checks, "parallel": parallel_checks,
             "vlentropy": vlentropy_checks}
    if name not in table:
        raise KeyError(name)
    return table[name]()
