"""Confirmation-stage hypothesis tests: per-symbol log-likelihood ratios, exact
error probabilities by lattice convolution, Monte-Carlo estimates and exponent
slopes.

The confirmation transcript has two parts. In the hybrid part (n2 uses) the
confirming user repeats x(Theta_u) while the other user sends data drawn from
p_other, so the receiver sees the effective channel of the confirming user. In
the full part (n3 uses) both users send Z_1(Theta_1), Z_2(Theta_2) with the
quadruple Z drawn i.i.d. from pz. The receiver accepts (declares 00) when, for
every alternative ab != 00, the hybrid LLR plus the full-part LLR against ab is
at least lambda.

Without a full part (n3 = 0) the transcript carries nothing about the other
user's bit, so beta is taken over the alternatives that flip the confirming
user's bit only.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import ALTERNATIVES
from .channel import ChannelModel, effective_channel, prob_vector
from .errors import DegenerateTest, InputError, InsufficientData, SupportOverflow
from .parallel import run_blocks, wilson

LATTICE_BITS = 20
INF_CLIP = 1.0e4  # bits; stands in for an infinite log-likelihood ratio


@dataclass
class ConfirmationDesign:
    user: int
    x_phase2: tuple
    p_other: list
    pz: list | None
    n2: int
    n3: int
    lam: float

    def __post_init__(self):
        self.x_phase2 = tuple(int(v) for v in self.x_phase2)
        if self.user not in (1, 2):
            raise InputError("user must be 1 or 2")
        if self.n2 < 0 or self.n3 < 0 or self.n2 + self.n3 == 0:
            raise InputError("phase lengths must be nonnegative and not both zero")

    def pz_tensor(self, ch: ChannelModel) -> np.ndarray:
        if self.pz is None:
            raise InputError("design has no pz for the full confirmation part")
        pz = np.asarray(self.pz, dtype=float).reshape(ch.x1_size, ch.x2_size, ch.x1_size, ch.x2_size)
        prob_vector(pz.ravel())
        return pz

    def with_lengths(self, n2: int, n3: int, lam: float) -> "ConfirmationDesign":
        return ConfirmationDesign(self.user, self.x_phase2, self.p_other, self.pz, n2, n3, lam)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x_phase2"] = list(self.x_phase2)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConfirmationDesign":
        pz = d.get("pz")
        if pz is not None:
            pz = np.asarray(pz, dtype=float).ravel().tolist()
        return cls(int(d["user"]), tuple(d["x_phase2"]), list(d["p_other"]), pz,
                   int(d.get("n2", 0)), int(d.get("n3", 0)), float(d.get("lam", 0.0)))


@dataclass
class LlrDistribution:
    support: np.ndarray  # (k,) for the hybrid part, (k, 3) for the full part
    probs: np.ndarray  # (k,)


def _truth(design: ConfirmationDesign, truth) -> tuple:
    if truth in ("H0", 0, None):
        return (0, 0)
    if truth == "H1":
        return (1, 0) if design.user == 1 else (0, 1)
    t = tuple(int(v) for v in truth)
    if t not in ((0, 0),) + ALTERNATIVES:
        raise InputError(f"unknown hypothesis {truth!r}")
    return t


def _llr(p, q):
    with np.errstate(divide="ignore"):
        v = np.log2(p) - np.log2(q)
    return np.nan_to_num(v, nan=0.0, posinf=INF_CLIP, neginf=-INF_CLIP)


def _merge(values: np.ndarray, probs: np.ndarray):
    keep = probs > 0
    values, probs = values[keep], probs[keep]
    key = np.round(values, 12)
    if key.ndim == 1:
        u, inv = np.unique(key, return_inverse=True)
    else:
        u, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    out = np.zeros(len(u))
    np.add.at(out, inv, probs)
    first = np.zeros(len(u), dtype=int)
    first[inv[::-1]] = np.arange(len(inv))[::-1]
    return values[first], out


def _hybrid_rows(ch: ChannelModel, design: ConfirmationDesign):
    x0, x1 = design.x_phase2
    rows = effective_channel(ch, design.user, design.p_other).rows
    return rows[x0], rows[x1]


def llr_per_symbol(ch: ChannelModel, design: ConfirmationDesign, phase: int, truth="H0") -> LlrDistribution:
    """Law of one LLR increment under the given hypothesis.

    Hybrid part: log2 Qbar(y|x(0)) / Qbar(y|x(1)). Full part: the vector over
    ab in (01, 10, 11) of log2 Q(y|Z(00)) / Q(y|Z(ab)).
    """
    a = _truth(design, truth)
    if phase == 2:
        r0, r1 = _hybrid_rows(ch, design)
        if design.x_phase2[0] == design.x_phase2[1] or np.allclose(r0, r1, rtol=0, atol=1e-15):
            raise DegenerateTest("hybrid-phase output laws coincide")
        true_row = r1 if a[design.user - 1] == 1 else r0
        return LlrDistribution(*_merge(_llr(r0, r1), true_row.copy()))
    if phase == 3:
        values, probs = _full_symbol_law(ch, design, a)
        return LlrDistribution(*_merge(values, probs))
    raise InputError("phase must be 2 or 3")


def _full_symbol_law(ch: ChannelModel, design: ConfirmationDesign, a: tuple):
    pz = design.pz_tensor(ch)
    q = ch.q
    vals, probs = [], []
    for z in zip(*np.nonzero(pz > 0)):
        z10, z20, z11, z21 = z
        zsym = ((z10, z11), (z20, z21))
        row0 = q[z10, z20]
        alt = [q[zsym[0][b1], zsym[1][b2]] for b1, b2 in ALTERNATIVES]
        true_row = q[zsym[0][a[0]], zsym[1][a[1]]]
        llr = np.stack([_llr(row0, r) for r in alt], axis=1)  # (y, 3)
        vals.append(llr)
        probs.append(pz[z] * true_row)
    values = np.concatenate(vals)
    p = np.concatenate(probs)
    if np.all(np.abs(values) < 1e-15):
        raise DegenerateTest("full-part codewords never separate the hypotheses")
    return values, p


def _symbol_laws(ch: ChannelModel, design: ConfirmationDesign):
    """Per-part (values (k, 3), probs (k, 4)) with columns of probs the truths 00, 01, 10, 11."""
    truths = ((0, 0),) + ALTERNATIVES
    parts = []
    if design.n2 > 0:
        r0, r1 = _hybrid_rows(ch, design)
        if design.x_phase2[0] == design.x_phase2[1] or np.allclose(r0, r1, rtol=0, atol=1e-15):
            raise DegenerateTest("hybrid-phase output laws coincide")
        v = _llr(r0, r1)
        pr = np.stack([(r1 if t[design.user - 1] == 1 else r0) for t in truths], axis=1)
        parts.append((np.repeat(v[:, None], 3, axis=1), pr, design.n2))
    if design.n3 > 0:
        vs, prs = None, []
        for t in truths:
            v, p = _full_symbol_law(ch, design, t)
            vs = v
            prs.append(p)
        parts.append((vs, np.stack(prs, axis=1), design.n3))
    return parts


@dataclass
class ExactErrors:
    alpha: float
    beta: float
    beta_by_alternative: dict
    lattice_error_bits: float
    support_size: int


def tested_alternatives(design: ConfirmationDesign) -> tuple:
    if design.n3 > 0:
        return ALTERNATIVES
    return tuple(a for a in ALTERNATIVES if a[design.user - 1] == 1)


def _beta(beta_by: dict, design: ConfirmationDesign) -> float:
    return max(beta_by[a] for a in tested_alternatives(design))


def _quantize(v: np.ndarray, bits: int) -> np.ndarray:
    return np.rint(v * (1 << bits)).astype(np.int64)


def exact_errors(ch: ChannelModel, design: ConfirmationDesign, lattice_bits: int = LATTICE_BITS,
                 cap: int = 10 ** 7) -> ExactErrors:
    """alpha = P(reject | 00) and beta = max over ab != 00 of P(accept | ab).

    LLR increments are rounded to multiples of 2^-lattice_bits; the reported
    lattice_error_bits bounds how far any summed LLR can be from its exact value.
    """
    lam = design.lam
    if lam == -math.inf:
        return ExactErrors(0.0, 1.0, {a: 1.0 for a in ALTERNATIVES}, 0.0, 1)
    if lam == math.inf:
        return ExactErrors(1.0, 0.0, {a: 0.0 for a in ALTERNATIVES}, 0.0, 1)
    parts = _symbol_laws(ch, design)
    collapse = design.n3 == 0
    states = np.zeros((1, 1 if collapse else 3), dtype=np.int64)
    probs = np.ones((1, 4))
    n_total = 0
    for values, vprobs, n in parts:
        vq = _quantize(values[:, :1] if collapse else values, lattice_bits)
        vq, vp = _merge_lattice(vq, vprobs)
        for _ in range(n):
            states, probs = _step(states, probs, vq, vp, cap)
        n_total += n
    thr = lam * (1 << lattice_bits)
    accept = np.all(states >= thr - 1e-9, axis=1)
    pa = probs[accept].sum(axis=0)
    alpha = float(probs[~accept, 0].sum())
    beta_by = {a: float(min(1.0, pa[i + 1])) for i, a in enumerate(ALTERNATIVES)}
    return ExactErrors(min(1.0, alpha), _beta(beta_by, design), beta_by,
                       n_total * 2.0 ** -(lattice_bits + 1), len(states))


def _merge_lattice(vq: np.ndarray, vp: np.ndarray):
    u, inv = np.unique(vq, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    out = np.zeros((len(u), vp.shape[1]))
    np.add.at(out, inv, vp)
    return u, out


def _step(states, probs, vq, vp, cap):
    s = (states[:, None, :] + vq[None, :, :]).reshape(-1, states.shape[1])
    p = (probs[:, None, :] * vp[None, :, :]).reshape(-1, 4)
    if s.shape[1] == 1:
        u, inv = np.unique(s[:, 0], return_inverse=True)
        u = u[:, None]
    else:
        u, inv = np.unique(s, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    if len(u) > cap:
        raise SupportOverflow(f"{len(u)} lattice points exceed the cap {cap}")
    out = np.zeros((len(u), 4))
    np.add.at(out, inv, p)
    return u, out


def accepts(llr_hybrid: float, llr_full, lam: float) -> bool:
    """Acceptance of 00: hybrid LLR plus full-part LLR against every ab is >= lambda."""
    return all(llr_hybrid + float(v) >= lam for v in np.atleast_1d(llr_full))


def exhaustive_errors(ch: ChannelModel, design: ConfirmationDesign) -> ExactErrors:
    """Exact errors by enumerating every transcript (small n2 + n3 only)."""
    parts = _symbol_laws(ch, design)
    outcomes = []
    for values, vprobs, n in parts:
        outcomes.extend([(values, vprobs)] * n)
    p_acc = np.zeros(4)
    for combo in itertools.product(*[range(len(v)) for v, _ in outcomes]):
        total = np.zeros(3)
        w = np.ones(4)
        for (values, vprobs), k in zip(outcomes, combo):
            total = total + values[k]
            w = w * vprobs[k]
        if np.all(total >= design.lam):
            p_acc += w
    beta_by = {a: float(p_acc[i + 1]) for i, a in enumerate(ALTERNATIVES)}
    return ExactErrors(float(1 - p_acc[0]), _beta(beta_by, design), beta_by, 0.0, 0)


@dataclass
class MonteCarloErrors:
    alpha: float
    beta: float
    alpha_ci: tuple
    beta_ci: tuple
    beta_by_alternative: dict
    trials: int
    seed: int


def monte_carlo_errors(ch: ChannelModel, design: ConfirmationDesign, trials: int, seed: int,
                       workers: int | None = None, block: int = 8192) -> MonteCarloErrors:
    """Sampled alpha and beta with 95% Wilson intervals; each hypothesis gets ``trials`` runs."""
    if trials < 1:
        raise InputError("trials must be >= 1")
    parts = _symbol_laws(ch, design)
    cdfs = [(values, np.cumsum(vprobs, axis=0), n) for values, vprobs, n in parts]

    def work(rng, size, _index):
        counts = np.zeros(4, dtype=np.int64)
        for h in range(4):
            total = np.zeros((size, 3))
            for values, cdf, n in cdfs:
                c = cdf[:, h] / cdf[-1, h]
                idx = np.searchsorted(c, rng.random((size, n)), side="right")
                idx = np.minimum(idx, len(c) - 1)
                total += values[idx].sum(axis=1)
            counts[h] = int(np.sum(np.all(total >= design.lam, axis=1)))
        return counts

    acc = np.sum(run_blocks(work, trials, seed, block, workers), axis=0)
    rej0 = trials - int(acc[0])
    beta_by = {a: float(acc[i + 1] / trials) for i, a in enumerate(ALTERNATIVES)}
    tested = [ALTERNATIVES.index(a) for a in tested_alternatives(design)]
    worst = max(tested, key=lambda i: acc[i + 1])
    return MonteCarloErrors(rej0 / trials, beta_by[ALTERNATIVES[worst]], wilson(rej0, trials),
                            wilson(int(acc[worst + 1]), trials), beta_by, trials, seed)


@dataclass
class ErrorCurve:
    points: list = field(default_factory=list)  # (n, alpha, beta)


def error_curve(ch: ChannelModel, design: ConfirmationDesign, ns, lam_of_n, exact: bool = True,
                trials: int = 0, seed: int = 0) -> ErrorCurve:
    """Errors for total lengths ``ns``, splitting each n between the parts in the
    design's n2 : n3 proportion, with threshold lam_of_n(n)."""
    frac2 = design.n2 / (design.n2 + design.n3)
    pts = []
    for n in ns:
        n2 = int(round(n * frac2))
        d = design.with_lengths(n2, n - n2, float(lam_of_n(n)))
        if exact:
            e = exact_errors(ch, d)
        else:
            e = monte_carlo_errors(ch, d, trials, seed + int(n))
        pts.append((int(n), e.alpha, e.beta))
    return ErrorCurve(pts)


def exponent_slope(curve) -> float:
    """Least-squares slope of -log2 beta(n) against n."""
    pts = curve.points if isinstance(curve, ErrorCurve) else list(curve)
    pts = [(n, b) for n, _, b in pts if b > 0]
    if len(pts) < 3:
        raise InsufficientData("need at least three points with beta > 0")
    n = np.array([p[0] for p in pts], dtype=float)
    y = -np.log2(np.array([p[1] for p in pts]))
    return float(np.polyfit(n, y, 1)[0])
