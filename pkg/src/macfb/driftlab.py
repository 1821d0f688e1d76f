"""Exact enumeration of message posteriors for tiny feedback codes on a MAC, and
checks of the entropy-drift, pruned-time and maximal-inequality statements on the
resulting output trees.

Nodes of a depth-N output tree are numbered breadth first: the node for the
prefix (y_1, ..., y_t) has id ``offset[t] + sum_s y_s * Y**(t-s)``, so the
children of node ``k`` at depth t sit at ``offset[t+1] + (k - offset[t]) * Y + y``.
Encoder tables use the same numbering for the prefixes of length 0..N-1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelModel, d_ub, kl_rows, validate_channel
from .errors import (HypothesisViolated, InputError, NoQualifyingNodes,
                     NotSupermartingale, TooLarge)
from .infotheory import LOG2E, _rows_entropy, binary_entropy, binary_entropy_inverse

TOL = 1e-9
MAX_CELLS = 4_000_000
MAX_MESSAGES = 8
MAX_HORIZON = 8
MU_START = 3
MU_STOP = 60
PROCESSES = (1, 2, 3)


def offsets(y_size: int, horizon: int) -> np.ndarray:
    return np.concatenate([[0], np.cumsum([y_size ** t for t in range(horizon + 1)])]).astype(np.int64)


def prefix_index(path, y_size: int) -> int:
    off = 0
    idx = 0
    for t, y in enumerate(path):
        off += y_size ** t
        idx = idx * y_size + int(y)
    return off + idx


@dataclass(frozen=True, eq=False)
class TinyCode:
    """Deterministic feedback encoders: ``enc1[prefix, w1]`` is user 1's symbol
    after observing the output prefix with that id (same for ``enc2``)."""

    m1: int
    m2: int
    horizon: int
    y_size: int
    enc1: np.ndarray
    enc2: np.ndarray

    def __post_init__(self):
        if not (1 <= self.m1 <= MAX_MESSAGES and 1 <= self.m2 <= MAX_MESSAGES):
            raise InputError(f"message counts must lie in 1..{MAX_MESSAGES}")
        if not 1 <= self.horizon <= MAX_HORIZON:
            raise InputError(f"horizon must lie in 1..{MAX_HORIZON}")
        n_pref = int(offsets(self.y_size, self.horizon)[self.horizon])
        for name, enc, m in (("enc1", self.enc1, self.m1), ("enc2", self.enc2, self.m2)):
            if enc.shape != (n_pref, m):
                raise InputError(f"{name} must have shape {(n_pref, m)}, got {enc.shape}")
            if enc.size and enc.min() < 0:
                raise InputError(f"{name} has negative symbols")

    def check_alphabets(self, ch: ChannelModel):
        if ch.y_size != self.y_size:
            raise InputError("code and channel disagree on the output alphabet")
        if self.enc1.max() >= ch.x1_size or self.enc2.max() >= ch.x2_size:
            raise InputError("encoder symbol outside the input alphabet")

    def symbol(self, user: int, w: int, path) -> int:
        enc = self.enc1 if user == 1 else self.enc2
        return int(enc[prefix_index(path, self.y_size), w])

    @classmethod
    def random(cls, ch: ChannelModel, m1: int, m2: int, horizon: int, rng, feedback: bool = True):
        n_pref = int(offsets(ch.y_size, horizon)[horizon])
        if feedback:
            e1 = rng.integers(0, ch.x1_size, size=(n_pref, m1))
            e2 = rng.integers(0, ch.x2_size, size=(n_pref, m2))
            return cls(m1, m2, horizon, ch.y_size, e1, e2)
        return cls.without_feedback(ch, rng.integers(0, ch.x1_size, size=(m1, horizon)),
                                    rng.integers(0, ch.x2_size, size=(m2, horizon)))

    @classmethod
    def without_feedback(cls, ch: ChannelModel, codewords1, codewords2):
        """Codewords ``(m_i, N)`` sent regardless of the outputs."""
        c1 = np.asarray(codewords1, dtype=np.int64)
        c2 = np.asarray(codewords2, dtype=np.int64)
        horizon = c1.shape[1]
        if c2.shape[1] != horizon:
            raise InputError("codeword lengths differ")
        off = offsets(ch.y_size, horizon)
        depth = np.repeat(np.arange(horizon), np.diff(off[: horizon + 1]))
        return cls(c1.shape[0], c2.shape[0], horizon, ch.y_size, c1[:, depth].T.copy(), c2[:, depth].T.copy())

    @classmethod
    def from_functions(cls, ch: ChannelModel, m1: int, m2: int, horizon: int, f1, f2):
        """Tables from ``f_i(w, prefix_tuple) -> symbol``."""
        n_pref = int(offsets(ch.y_size, horizon)[horizon])
        e1 = np.zeros((n_pref, m1), dtype=np.int64)
        e2 = np.zeros((n_pref, m2), dtype=np.int64)
        for path in _prefixes(ch.y_size, horizon):
            k = prefix_index(path, ch.y_size)
            e1[k] = [f1(w, path) for w in range(m1)]
            e2[k] = [f2(w, path) for w in range(m2)]
        return cls(m1, m2, horizon, ch.y_size, e1, e2)


def _prefixes(y_size: int, horizon: int):
    level = [()]
    for _ in range(horizon):
        yield from level
        level = [p + (y,) for p in level for y in range(y_size)]


@dataclass(eq=False)
class PosteriorTrace:
    ch: ChannelModel
    code: TinyCode
    post: np.ndarray  # (nodes, m1, m2)
    prob: np.ndarray  # (nodes,)
    step: np.ndarray  # (internal, Y): P(y_{t+1} | node)
    hbar: np.ndarray  # (nodes, 3): H(W1|W2,F), H(W2|W1,F), H(W1,W2|F)
    htld: np.ndarray  # (nodes, 3): H(W1|F), H(W2|F), H(W1,W2|F)
    j: np.ndarray  # (internal, 3)
    d: np.ndarray  # (internal, 3)

    @property
    def horizon(self) -> int:
        return self.code.horizon

    @property
    def y_size(self) -> int:
        return self.ch.y_size

    @property
    def offsets(self) -> np.ndarray:
        return offsets(self.y_size, self.horizon)

    @property
    def n_internal(self) -> int:
        return int(self.offsets[self.horizon])

    def depth_slice(self, t: int) -> slice:
        off = self.offsets
        return slice(int(off[t]), int(off[t + 1]))

    def children(self, t: int) -> np.ndarray:
        """Child ids ``(Y**t, Y)`` of the depth-t nodes."""
        off = self.offsets
        base = off[t + 1] + np.arange(self.y_size ** t)[:, None] * self.y_size
        return base + np.arange(self.y_size)[None, :]

    def leaf_nodes(self) -> np.ndarray:
        """``(Y**N, N+1)``: node id at every depth along each full path."""
        n, y = self.horizon, self.y_size
        leaf = np.arange(y ** n)
        cols = [self.offsets[t] + leaf // y ** (n - t) for t in range(n + 1)]
        return np.stack(cols, axis=1)

    def path(self, node: int) -> tuple:
        off = self.offsets
        t = int(np.searchsorted(off, node, side="right")) - 1
        k = node - int(off[t])
        out = []
        for _ in range(t):
            out.append(k % self.y_size)
            k //= self.y_size
        return tuple(reversed(out))

    def expected_child(self, values: np.ndarray) -> np.ndarray:
        """E[v(child) | node] for every internal node; ``values`` indexed by node id."""
        out = np.empty((self.n_internal,) + values.shape[1:])
        for t in range(self.horizon):
            sl = self.depth_slice(t)
            ch = values[self.children(t)]
            out[sl] = np.einsum("ny,ny...->n...", self.step[sl], ch)
        return out

    def parent_values(self, values: np.ndarray) -> np.ndarray:
        """``values`` of each non-root node's parent, aligned with ids 1.."""
        off = self.offsets
        ids = np.arange(1, len(values))
        t = np.searchsorted(off, ids, side="right") - 1
        parent = off[t - 1] + (ids - off[t]) // self.y_size
        return values[parent]

    def entropies(self, node: int) -> tuple:
        return tuple(self.hbar[node]) + tuple(self.htld[node])


def _mass_entropy(p: np.ndarray) -> np.ndarray:
    return _rows_entropy(p)


def _check_positive(ch: ChannelModel):
    if not ch.is_strictly_positive():
        raise InputError("the channel must have strictly positive transition probabilities")


def enumerate_trace(ch: ChannelModel, code: TinyCode) -> PosteriorTrace:
    """Bayes-update the joint message posterior along every output path."""
    _check_positive(ch)
    code.check_alphabets(ch)
    m1, m2, n, ny = code.m1, code.m2, code.horizon, ch.y_size
    off = offsets(ny, n)
    n_nodes = int(off[-1])
    if n_nodes * m1 * m2 * ny > MAX_CELLS:
        raise TooLarge(f"{n_nodes} nodes x {m1 * m2} message pairs is too large to enumerate")
    q = ch.q
    post = np.empty((n_nodes, m1, m2))
    prob = np.empty(n_nodes)
    post[0] = 1.0 / (m1 * m2)
    prob[0] = 1.0
    n_int = int(off[n])
    step = np.empty((n_int, ny))
    j = np.empty((n_int, 3))
    d = np.empty((n_int, 3))
    view1 = q.reshape(-1, ny)
    view2 = ch.user_view(2).reshape(-1, ny)
    for t in range(n):
        sl = slice(int(off[t]), int(off[t + 1]))
        x1 = code.enc1[sl]
        x2 = code.enc2[sl]
        lik = q[x1[:, :, None], x2[:, None, :], :]  # (k, m1, m2, Y)
        p = post[sl]
        joint = p[..., None] * lik
        py = joint.sum(axis=(1, 2))
        step[sl] = py
        child = joint / py[:, None, None, :]
        k = p.shape[0]
        post[off[t + 1]: off[t + 2]] = np.moveaxis(child, 3, 1).reshape(k * ny, m1, m2)
        prob[off[t + 1]: off[t + 2]] = (prob[sl][:, None] * py).reshape(-1)

        h_y = _mass_entropy(py)
        h_y_w = np.einsum("kab,kab->k", p, _mass_entropy(lik))
        # outputs given one message: mixture over the other's posterior
        p1 = p.sum(axis=2)
        p2 = p.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            y_w1 = np.einsum("kab,kaby->kay", p, lik) / p1[..., None]
            y_w2 = np.einsum("kab,kaby->kby", p, lik) / p2[..., None]
        y_w1 = np.nan_to_num(y_w1)
        y_w2 = np.nan_to_num(y_w2)
        h_y_w1 = np.einsum("ka,ka->k", p1, _mass_entropy(y_w1))
        h_y_w2 = np.einsum("kb,kb->k", p2, _mass_entropy(y_w2))
        # the other user's past inputs are a function of its message given the
        # prefix and all messages sharing an input history share a posterior, so
        # conditioning on X_j^r equals conditioning on W_j here
        j[sl, 0] = h_y_w2 - h_y_w
        j[sl, 1] = h_y_w1 - h_y_w
        j[sl, 2] = h_y - h_y_w

        oh1 = np.eye(ch.x1_size)[x1]  # (k, m1, X1)
        oh2 = np.eye(ch.x2_size)[x2]
        pxx = np.einsum("kab,kai,kbj->kij", p, oh1, oh2)
        d[sl, 0] = _vertex_divergence(pxx, q, view1)
        d[sl, 1] = _vertex_divergence(np.swapaxes(pxx, 1, 2), ch.user_view(2), view2)
        pair = kl_rows(view1, view1).max(axis=1).reshape(ch.x1_size, ch.x2_size)
        d[sl, 2] = np.where(pxx > 0, pair[None], -np.inf).reshape(k, -1).max(axis=1)

    hbar = np.empty((n_nodes, 3))
    htld = np.empty((n_nodes, 3))
    h12 = _mass_entropy(post.reshape(n_nodes, -1))
    h1 = _mass_entropy(post.sum(axis=2))
    h2 = _mass_entropy(post.sum(axis=1))
    hbar[:, 0] = np.maximum(h12 - h2, 0.0)
    hbar[:, 1] = np.maximum(h12 - h1, 0.0)
    hbar[:, 2] = h12
    htld[:, 0] = h1
    htld[:, 1] = h2
    htld[:, 2] = h12
    return PosteriorTrace(ch, code, post, prob, step, hbar, htld, j, d)


def _vertex_divergence(pxx: np.ndarray, view: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """max over supported x of D(sum_x' P(x'|x) Q(.|x,x') || Q(.|z,z'))
    maximized over all rows (z, z'); ``pxx[k, x, x']`` is the node's input law."""
    px = pxx.sum(axis=2)
    with np.errstate(invalid="ignore"):
        cond = np.nan_to_num(pxx / px[..., None])
    eff = np.einsum("kij,ijy->kiy", cond, view)
    k, nx, ny = eff.shape
    div = kl_rows(eff.reshape(-1, ny), rows).max(axis=1).reshape(k, nx)
    return np.where(px > 0, div, -np.inf).max(axis=1)


# ---------------------------------------------------------------- reports


@dataclass
class CheckReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)
    worst_margin: float = math.inf
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def record(self, margins: np.ndarray, nodes: np.ndarray, process: int, trace, tol: float = TOL):
        margins = np.asarray(margins, dtype=float)
        if margins.size == 0:
            return
        self.checked += int(margins.size)
        self.worst_margin = min(self.worst_margin, float(margins.min()))
        for idx in np.flatnonzero(margins < -tol):
            self.violations.append({"process": process, "path": list(trace.path(int(nodes[idx]))),
                                    "margin": float(margins[idx])})

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "checked": self.checked,
                "violations": self.violations[:20], "n_violations": len(self.violations),
                "worst_margin": None if math.isinf(self.worst_margin) else self.worst_margin,
                **self.info}


def _active(trace: PosteriorTrace) -> list[int]:
    """Processes with something to learn (a single message gives H = 0)."""
    m = (trace.code.m1, trace.code.m2, trace.code.m1 * trace.code.m2)
    return [i for i in PROCESSES if m[i - 1] > 1]


def check_linear_drift(trace: PosteriorTrace) -> CheckReport:
    rep = CheckReport("linear_drift")
    nodes = np.arange(trace.n_internal)
    drift = trace.expected_child(trace.hbar) - trace.hbar[: trace.n_internal]
    for i in PROCESSES:
        rep.record(drift[:, i - 1] + trace.j[:, i - 1], nodes, i, trace)
    return rep


def eta_constant(ch: ChannelModel) -> float:
    """Largest log-ratio of two transition probabilities to the same output."""
    _check_positive(ch)
    rows = ch.q.reshape(-1, ch.y_size)
    return float(np.max(np.log2(rows.max(axis=0) / rows.min(axis=0))))


def check_eta_bound(trace: PosteriorTrace) -> CheckReport:
    eta = eta_constant(trace.ch)
    rep = CheckReport("eta_bound", info={"eta": eta})
    ids = np.arange(1, len(trace.prob))
    for i in _active(trace):
        h = trace.htld[:, i - 1]
        hp = trace.parent_values(h)
        ok = (h[1:] > 0) & (hp > 0)
        inc = np.abs(np.log2(h[1:][ok]) - np.log2(hp[ok]))
        rep.record(eta - inc, ids[ok], i, trace)
    return rep


def log_drift_slack(eps: float, y_size: int, eta: float, d_max: float) -> float:
    """Finite-eps allowance for the log drift: kappa(eps) + d_max * eta1(eps).

    kappa uses the 2 log2(e) coefficient of the derivation, the larger of the two
    stated forms.
    """
    eta1 = binary_entropy_inverse(eps, tol=1e-13)
    root = math.sqrt(eta1)
    kappa = (2 * LOG2E + d_max) * eta1 + y_size * (binary_entropy(root) + (1 + eta) * root)
    return kappa + d_max * eta1


def _slack(trace: PosteriorTrace, eps: float) -> float:
    return log_drift_slack(eps, trace.y_size, eta_constant(trace.ch), d_ub(trace.ch))


def check_log_drift(trace: PosteriorTrace, eps: float = 0.3) -> CheckReport:
    """Nodes with 0 < H~ < eps only; a point-mass posterior has no logarithm."""
    if not 0 < eps <= 0.5:
        raise InputError("eps must lie in (0, 1/2]")
    slack = _slack(trace, eps)
    rep = CheckReport("log_drift", info={"eps": eps, "slack": slack})
    n_int = trace.n_internal
    h = trace.htld
    with np.errstate(divide="ignore"):
        logs = np.where(h > 0, np.log2(np.where(h > 0, h, 1.0)), -np.inf)
    drift = trace.expected_child(logs) - logs[:n_int]
    nodes = np.arange(n_int)
    for i in _active(trace):
        hi = h[:n_int, i - 1]
        q = (hi > 0) & (hi < eps)
        rep.record(drift[q, i - 1] + trace.d[q, i - 1] + slack, nodes[q], i, trace)
    if rep.checked == 0:
        raise NoQualifyingNodes(f"no node has 0 < H < {eps}")
    return rep


# ----------------------------------------------------- pruned time process


def pruned_times(h: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First entry time, last-exit time and the pruned clock for paths ``h[:, 0..N]``.

    Returns ``(tau_low, tau_high, t)`` with ``t[:, n]`` for n = 0..N.
    """
    h = np.atleast_2d(h)
    n = h.shape[1] - 1
    times = np.arange(1, n + 1)
    below = h[:, 1:] <= eps
    tau_low = np.where(below.any(axis=1), times[np.argmax(below, axis=1)], n)
    above = h[:, :n] >= eps  # H_{t-1} >= eps for t = 1..N
    last = np.where(above.any(axis=1), n - np.argmax(above[:, ::-1], axis=1), 0)
    tau_high = np.minimum(last, n)
    steps = np.arange(n + 1)[None, :]
    t = np.where(steps < tau_low[:, None], steps, np.maximum(steps, tau_high[:, None]))
    return tau_low, tau_high, t


def _z_values(hbar, htld, eps, big_i, big_d, mu):
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log2(htld / eps)
        log_part = y / big_d + (1 - np.exp(mu * y)) / (mu * big_d)
    return np.where(htld >= eps, (hbar - eps) / big_i, log_part)


@dataclass
class PrunedProcess:
    process: int
    tau_low: np.ndarray
    tau_high: np.ndarray
    t: np.ndarray
    z: np.ndarray
    s: np.ndarray
    l: np.ndarray
    margins: np.ndarray
    groups: list


def _pruned_process(trace, i, eps, big_i, big_d, mu, k1, k2, leaves):
    n = trace.horizon
    hb = trace.hbar[leaves, i - 1]
    ht = trace.htld[leaves, i - 1]
    tau_low, tau_high, t = pruned_times(ht, eps)
    k4 = math.log2((trace.code.m1, trace.code.m2, trace.code.m1 * trace.code.m2)[i - 1])
    r = np.arange(1, n + 1)[None, :]
    a1 = k1[leaves[:, :n], i - 1] / big_i  # k_{1,r} lives on the node at depth r-1
    a2 = k2[leaves[:, :n], i - 1] / big_d
    a4 = np.where(ht[:, :n] >= math.sqrt(eps), k4 / big_i, 0.0)
    term = np.where(r <= tau_low[:, None], a1, np.where(r <= tau_high[:, None], a4, a2))
    s = np.concatenate([np.zeros((len(leaves), 1)), np.cumsum(term, axis=1)], axis=1)
    s += math.sqrt(eps) * n / big_i * (np.arange(n + 1)[None, :] >= tau_high[:, None])
    z = _z_values(hb, ht, eps, big_i, big_d, mu)
    rows = np.arange(len(leaves))[:, None]
    l = z[rows, t] + s[rows, t]
    w = trace.prob[leaves[:, -1]]
    margins = []
    groups = []
    for step in range(n):
        key = leaves[np.arange(len(leaves)), t[:, step]]
        uniq, inv = np.unique(key, return_inverse=True)
        mass = np.bincount(inv, weights=w)
        diff = np.bincount(inv, weights=w * (l[:, step + 1] - l[:, step])) / mass
        margins.append((diff, uniq))
        groups.append((inv, uniq))
    return PrunedProcess(i, tau_low, tau_high, t, z, s, l, margins, groups)


def _measurable(trace, proc: PrunedProcess) -> bool:
    """t_n, t_n ^ tau_low and t_n ^ tau_high must be constant on every information set."""
    for step, (inv, uniq) in enumerate(proc.groups):
        for v in (proc.t[:, step], np.minimum(proc.t[:, step], proc.tau_low),
                  np.minimum(proc.t[:, step], proc.tau_high)):
            lo = np.full(len(uniq), np.inf)
            hi = np.full(len(uniq), -np.inf)
            np.minimum.at(lo, inv, v)
            np.maximum.at(hi, inv, v)
            if np.any(lo != hi):
                return False
    return True


def _hypotheses(trace, eps, big_i, big_d, k1, k2, eta):
    """Raise HypothesisViolated naming the first failed condition."""
    if not (big_i >= big_d > 0):
        raise HypothesisViolated(f"need I >= D > 0, got I={big_i}, D={big_d}")
    n_int = trace.n_internal
    hb, ht = trace.hbar, trace.htld
    m = (trace.code.m1, trace.code.m2, trace.code.m1 * trace.code.m2)

    def fail(cond, i, node):
        raise HypothesisViolated(f"{cond} fails for process {i} at path {list(trace.path(int(node)))}")

    bad = np.argwhere(hb > ht + 1e-12)
    if len(bad):
        fail("Hbar <= Htilde", bad[0][1] + 1, bad[0][0])
    drift = trace.expected_child(hb) - hb[:n_int]
    with np.errstate(divide="ignore"):
        logs = np.log2(np.where(ht > 0, ht, np.nan))
    ldrift = trace.expected_child(logs) - logs[:n_int]
    for i in _active(trace):
        c = i - 1
        bad = np.flatnonzero(k1[:, c] > k2[:, c] + 1e-12)
        if len(bad):
            fail("k1 <= k2", i, bad[0])
        bad = np.flatnonzero(drift[:, c] + k1[:, c] < -TOL)
        if len(bad):
            fail("linear drift E[dHbar] >= -k1", i, bad[0])
        q = ht[:n_int, c] < eps
        bad = np.flatnonzero(q & ~(ldrift[:, c] + k2[:, c] >= -TOL))
        if len(bad):
            fail("log drift E[dlog Htilde] >= -k2", i, bad[0])
        inc = np.abs(np.log2(ht[1:, c]) - np.log2(trace.parent_values(ht[:, c])))
        bad = np.flatnonzero(inc > eta + TOL)
        if len(bad):
            fail("|dlog Htilde| <= k3", i, bad[0] + 1)
        bad = np.flatnonzero(np.abs(ht[1:, c] - trace.parent_values(ht[:, c])) > math.log2(m[c]) + TOL)
        if len(bad):
            fail("|dHtilde| <= k4", i, bad[0] + 1)


def check_pruned_submartingale(trace: PosteriorTrace, eps: float = 0.3, big_i: float | None = None,
                               big_d: float | None = None, mu: float | None = None,
                               k1: np.ndarray | None = None, k2: np.ndarray | None = None) -> CheckReport:
    """E[L_{n+1} - L_n | observed pruned prefix] >= 0 for every information set.

    k1 defaults to the mutual-information drift bounds J and k2 to D plus the
    finite-eps log-drift slack. I and D default to the largest k2 on the trace.
    With ``mu=None`` the exponential correction parameter is halved from 2^-3
    until the check passes; the passing value is recorded.
    """
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")
    eta = eta_constant(trace.ch)
    slack = _slack(trace, eps)
    k1 = trace.j if k1 is None else np.asarray(k1, dtype=float)
    k2 = trace.d + slack if k2 is None else np.asarray(k2, dtype=float)
    active = _active(trace)
    top = max((float(k2[:, i - 1].max()) for i in active), default=1.0)
    big_d = top if big_d is None else float(big_d)
    big_i = max(top, big_d) if big_i is None else float(big_i)
    _hypotheses(trace, eps, big_i, big_d, k1, k2, eta)
    leaves = trace.leaf_nodes()
    mus = [mu] if mu is not None else [2.0 ** -k for k in range(MU_START, MU_STOP + 1)]
    rep = CheckReport("pruned_submartingale", info={"eps": eps, "I": big_i, "D": big_d})
    for cand in mus:
        trial = CheckReport(rep.name, info=dict(rep.info, mu=cand))
        measurable = True
        for i in active:
            proc = _pruned_process(trace, i, eps, big_i, big_d, cand, k1, k2, leaves)
            measurable &= _measurable(trace, proc)
            for diff, uniq in proc.margins:
                trial.record(diff, uniq, i, trace)
        trial.info["measurable"] = measurable
        if not measurable:
            trial.violations.append({"process": None, "path": [], "margin": None, "reason": "not measurable"})
        rep = trial
        if trial.passed:
            break
    return rep


# ------------------------------------------------- supermartingale tools


def check_supermartingale(trace: PosteriorTrace, values: np.ndarray, name: str = "supermartingale") -> CheckReport:
    """E[M(child) | node] <= M(node) at every internal node."""
    values = np.asarray(values, dtype=float)
    rep = CheckReport(name)
    n_int = trace.n_internal
    rep.record(values[:n_int] - trace.expected_child(values), np.arange(n_int), 0, trace, tol=1e-12)
    return rep


def check_entropy_supermartingale(trace: PosteriorTrace) -> CheckReport:
    rep = CheckReport("entropy_supermartingale")
    for i in PROCESSES:
        r = check_supermartingale(trace, trace.htld[:, i - 1])
        rep.checked += r.checked
        rep.worst_margin = min(rep.worst_margin, r.worst_margin)
        rep.violations += [dict(v, process=i) for v in r.violations]
    return rep


def check_doob(trace: PosteriorTrace, values, tau=1, c: float = 1.0) -> CheckReport:
    """P(sup_{t >= tau} M_t >= c) <= E[M_tau] / c for a nonnegative supermartingale.

    ``tau`` is a fixed time or a callable ``stop(path) -> bool``; the first prefix
    where it is true (or the horizon) is the stopping time.
    """
    values = np.asarray(values, dtype=float)
    if c <= 0:
        raise InputError("c must be positive")
    if values.min() < -1e-12:
        raise NotSupermartingale("process takes negative values")
    sm = check_supermartingale(trace, values)
    if not sm.passed:
        raise NotSupermartingale(f"conditional mean exceeds the current value at {sm.violations[0]['path']}")
    leaves = trace.leaf_nodes()
    n = trace.horizon
    if callable(tau):
        stops = np.full(len(leaves), n)
        for k, row in enumerate(leaves):
            for s in range(n + 1):
                if tau(trace.path(int(row[s]))):
                    stops[k] = s
                    break
    else:
        if not 0 <= int(tau) <= n:
            raise InputError("tau must lie in 0..horizon")
        stops = np.full(len(leaves), int(tau))
    rows = np.arange(len(leaves))
    w = trace.prob[leaves[:, -1]]
    m = values[leaves]
    after = np.arange(n + 1)[None, :] >= stops[:, None]
    hit = np.any(after & (m >= c), axis=1)
    p_sup = float(np.sum(w[hit]))
    mean = float(np.sum(w * m[rows, stops]))
    bound = mean / c
    rep = CheckReport("doob", info={"p_sup": p_sup, "bound": bound, "mean_at_tau": mean, "c": c})
    rep.record(np.array([bound - p_sup]), np.array([0]), 0, trace, tol=1e-12)
    return rep


def fano_bound(pe: float, m_total: int) -> float:
    if not 0 <= pe <= 1:
        raise InputError("pe must lie in [0, 1]")
    if m_total < 2:
        raise InputError("m_total must be at least 2")
    return binary_entropy(pe) + pe * math.log2(m_total)


def map_error(trace: PosteriorTrace) -> float:
    """Error probability of the joint MAP decoder at the horizon."""
    sl = trace.depth_slice(trace.horizon)
    best = trace.post[sl].reshape(trace.prob[sl].size, -1).max(axis=1)
    return float(max(0.0, 1.0 - np.sum(trace.prob[sl] * best)))


def check_fano(trace: PosteriorTrace) -> CheckReport:
    sl = trace.depth_slice(trace.horizon)
    m_total = trace.code.m1 * trace.code.m2
    pe = map_error(trace)
    mean_h = float(np.sum(trace.prob[sl] * trace.htld[sl, 2]))
    bound = fano_bound(pe, m_total) if m_total >= 2 else 0.0
    rep = CheckReport("fano", info={"pe": pe, "mean_entropy": mean_h, "bound": bound})
    rep.record(np.array([bound - mean_h]), np.array([0]), 3, trace, tol=1e-12)
    return rep


def check_grouping(trace: PosteriorTrace) -> CheckReport:
    """H(W) = h_b(mu*) + (1 - mu*) H(W | W != w*) for the marginal posteriors."""
    rep = CheckReport("grouping")
    for i, marg in ((1, trace.post.sum(axis=2)), (2, trace.post.sum(axis=1))):
        top = marg.argmax(axis=1)
        mu = marg[np.arange(len(marg)), top]
        rest = marg.copy()
        rest[np.arange(len(marg)), top] = 0.0
        ok = mu < 1 - 1e-12
        rest = rest[ok] / (1 - mu[ok])[:, None]
        rhs = np.array([binary_entropy(v) for v in mu[ok]]) + (1 - mu[ok]) * _mass_entropy(rest)
        err = np.abs(trace.htld[ok, i - 1] - rhs)
        rep.record(1e-12 - err, np.flatnonzero(ok), i, trace, tol=0.0)
    return rep


# ------------------------------------------------------------- corpus


def random_positive_channel(x1_size: int, x2_size: int, y_size: int, rng, floor: float = 0.02,
                            concentration: float = 1.0) -> ChannelModel:
    raw = floor + (1 - y_size * floor) * rng.dirichlet(np.full(y_size, concentration), size=(x1_size, x2_size))
    return validate_channel(raw, renormalize=True)


def run_checks(ch: ChannelModel, code: TinyCode, eps: float = 0.3) -> dict:
    """All drift-lab checks on one (channel, code) pair; keyed by check name."""
    trace = enumerate_trace(ch, code)
    out = {}
    out["linear_drift"] = check_linear_drift(trace)
    out["eta_bound"] = check_eta_bound(trace)
    try:
        out["log_drift"] = check_log_drift(trace, eps)
    except NoQualifyingNodes:
        out["log_drift"] = CheckReport("log_drift", info={"eps": eps, "qualifying": 0})
    out["pruned_submartingale"] = check_pruned_submartingale(trace, eps)
    out["doob"] = check_doob(trace, trace.htld[:, 2], tau=1, c=eps)
    out["fano"] = check_fano(trace)
    out["grouping"] = check_grouping(trace)
    out["entropy_supermartingale"] = check_entropy_supermartingale(trace)
    return out


def corpus(count: int, seed: int, messages=(2, 4), horizons=(3, 4, 5, 6)):
    """Random (channel, code) pairs with strictly positive channels."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        x1, x2 = (int(v) for v in rng.integers(2, 4, size=2))
        ny = int(rng.integers(2, 4))
        m1, m2 = (int(rng.choice(messages)) for _ in range(2))
        n = int(rng.choice(horizons))
        while offsets(ny, n)[-1] * m1 * m2 * ny > MAX_CELLS:
            n -= 1
        ch = random_positive_channel(x1, x2, ny, rng, concentration=0.3)
        yield ch, TinyCode.random(ch, m1, m2, n, rng)


def summarize(reports: dict) -> dict:
    return {name: rep.to_dict() for name, rep in reports.items()}
