"""Entropy, MAC mutual-information triples, capacity-region geometry and
variable-length quantities on finite output trees."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .channel import ChannelModel, kl_rows, prob_vector
from .errors import InconsistentLabels, InvalidStoppingTime, NonConvergence, NonStochasticRow

LOG2E = 1.0 / math.log(2.0)


def entropy(p, base=2) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    nz = p[p > 0]
    h = -float(np.sum(nz * np.log(nz)))
    if base == "e" or base == math.e:
        return h
    return h / math.log(base)


def _rows_entropy(a: np.ndarray) -> np.ndarray:
    """Entropy in bits along the last axis."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(a > 0, -a * np.log2(np.where(a > 0, a, 1.0)), 0.0)
    return t.sum(axis=-1)


def binary_entropy(x: float) -> float:
    if x <= 0 or x >= 1:
        return 0.0
    return -(x * math.log2(x) + (1 - x) * math.log2(1 - x))


def binary_entropy_inverse(h: float, tol: float = 1e-14) -> float:
    """Inverse of h_b on [0, 1/2], by bisection."""
    if h <= 0:
        return 0.0
    if h >= 1:
        return 0.5
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < h:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class MiTriple(NamedTuple):
    i1: float  # I(X1;Y|X2)
    i2: float  # I(X2;Y|X1)
    i3: float  # I(X1,X2;Y)


def mac_mi_triple(ch: ChannelModel, p1, p2) -> MiTriple:
    """Mutual informations under independent inputs p1 x p2."""
    p1 = prob_vector(p1, ch.x1_size)
    p2 = prob_vector(p2, ch.x2_size)
    t = mi_triples_batch(ch, p1[None, :], p2[None, :])
    return MiTriple(float(t[0, 0, 0]), float(t[0, 0, 1]), float(t[0, 0, 2]))


def mi_triples_batch(ch: ChannelModel, p1s: np.ndarray, p2s: np.ndarray) -> np.ndarray:
    """Triples for every pair (p1s[a], p2s[b]); returns shape (len(p1s), len(p2s), 3)."""
    q = ch.q
    hq = _rows_entropy(q)  # [x1, x2]
    # H(Y|X1,X2)
    hcond = np.einsum("ai,bj,ij->ab", p1s, p2s, hq)
    # Y | X2=x2 mixes over p1: [a, x2, y]
    out_given_x2 = np.einsum("ai,ijy->ajy", p1s, q)
    h_given_x2 = _rows_entropy(out_given_x2)  # [a, x2]
    hy_x2 = np.einsum("bj,aj->ab", p2s, h_given_x2)
    out_given_x1 = np.einsum("bj,ijy->biy", p2s, q)
    h_given_x1 = _rows_entropy(out_given_x1)  # [b, x1]
    hy_x1 = np.einsum("ai,bi->ab", p1s, h_given_x1)
    out = np.einsum("ajy,bj->aby", out_given_x2, p2s)
    hy = _rows_entropy(out)
    res = np.stack([hy_x2 - hcond, hy_x1 - hcond, hy - hcond], axis=-1)
    return np.maximum(res, 0.0)


def ptp_capacity(kernel, tol: float = 1e-10, max_iter: int = 200000):
    """Capacity in bits of a point-to-point kernel by alternating maximization.

    Stops when the standard upper and lower capacity estimates are within tol.
    """
    w = np.asarray(kernel, dtype=float)
    k = w.shape[0]
    p = np.full(k, 1.0 / k)
    lower = 0.0
    for _ in range(max_iter):
        out = p @ w
        d = kl_rows(w, out[None, :])[:, 0]  # bits
        lower = float(p @ d)
        upper = float(d.max())
        if upper - lower <= tol:
            return max(lower, 0.0), p
        p = p * np.exp2(d)
        p /= p.sum()
    raise NonConvergence(f"capacity iteration did not converge within {max_iter} steps")


# -- input grids --------------------------------------------------------------

def simplex_grid(k: int, resolution: int) -> np.ndarray:
    """All probability vectors with entries in {0, 1/r, ..., 1}, lexicographic order."""
    if k == 1:
        return np.ones((1, 1))
    pts = []
    for c in itertools.product(range(resolution + 1), repeat=k - 1):
        s = sum(c)
        if s <= resolution:
            pts.append(list(c) + [resolution - s])
    return np.array(pts, dtype=float) / resolution


def default_resolution(k: int) -> int:
    return {1: 1, 2: 20, 3: 12, 4: 6, 5: 4}.get(k, 3)


def _with_uniform(g: np.ndarray) -> np.ndarray:
    k = g.shape[1]
    u = np.full(k, 1.0 / k)
    if np.any(np.all(np.abs(g - u) < 1e-12, axis=1)):
        return g
    return np.vstack([g, u])


@dataclass
class InputGrid:
    """Product-input grid with its mutual-information triples precomputed."""

    p1s: np.ndarray
    p2s: np.ndarray
    mi: np.ndarray  # (n1, n2, 3)
    resolution: tuple = field(default=(0, 0))

    def pair(self, a: int, b: int):
        return self.p1s[a], self.p2s[b]

    @property
    def spacing(self) -> float:
        r = [x for x in self.resolution if x > 0]
        return 1.0 / min(r) if r else 1.0


def make_grid(ch: ChannelModel, grid=None) -> InputGrid:
    """Build an InputGrid; ``grid`` may be None, an int resolution, or an InputGrid."""
    if isinstance(grid, InputGrid):
        return grid
    r1 = grid if grid else default_resolution(ch.x1_size)
    r2 = grid if grid else default_resolution(ch.x2_size)
    if ch.x1_size == 1:
        r1 = 1
    if ch.x2_size == 1:
        r2 = 1
    p1s = _with_uniform(simplex_grid(ch.x1_size, r1))
    p2s = _with_uniform(simplex_grid(ch.x2_size, r2))
    return InputGrid(p1s, p2s, mi_triples_batch(ch, p1s, p2s), (r1, r2))


def refine_product_input(ch: ChannelModel, objective, p1, p2, step: float = 0.02,
                         min_step: float = 1e-6, max_rounds: int = 2000):
    """Pattern search on p1 x p2 moving probability mass between two symbols.

    ``objective`` maps an MiTriple-like array (3,) to a scalar to maximize.
    Returns (value, p1, p2).
    """
    p1 = np.array(p1, dtype=float)
    p2 = np.array(p2, dtype=float)

    def value(a, b):
        return float(objective(mi_triples_batch(ch, a[None], b[None])[0, 0]))

    best = value(p1, p2)
    rounds = 0
    while step >= min_step and rounds < max_rounds:
        rounds += 1
        improved = False
        for which in (0, 1):
            base = p1 if which == 0 else p2
            k = base.size
            for i in range(k):
                for j in range(k):
                    if i == j or base[j] <= 0:
                        continue
                    cand = base.copy()
                    d = min(step, cand[j])
                    cand[i] += d
                    cand[j] -= d
                    v = value(cand, p2) if which == 0 else value(p1, cand)
                    if v > best + 1e-15:
                        best = v
                        if which == 0:
                            p1 = cand
                        else:
                            p2 = cand
                        base = cand
                        improved = True
        if not improved:
            step /= 2
    return best, p1, p2


# -- region geometry -----------------------------------------------------------

def lambda_grid(step: float = 0.05) -> np.ndarray:
    n = int(round(1 / step))
    return simplex_grid(3, n)


def c_lambda(ch: ChannelModel, lam, grid=None) -> float:
    """max over product inputs of lam . (i1, i2, i3).

    Time sharing among up to three product inputs cannot raise the maximum of a
    linear functional, so the grid maximum is also the time-shared value.
    """
    g = make_grid(ch, grid)
    lam = np.asarray(lam, dtype=float)
    return float(np.max(g.mi @ lam))


def c_lambda_all(ch: ChannelModel, lams: np.ndarray, grid=None) -> np.ndarray:
    g = make_grid(ch, grid)
    flat = g.mi.reshape(-1, 3)
    return np.max(flat @ np.asarray(lams).T, axis=0)


class RegionSample(NamedTuple):
    theta: float
    radius: float
    r1: float
    r2: float
    lam: tuple


def region_boundary(ch: ChannelModel, theta: float, grid=None, lam_step: float = 0.05,
                    _cl=None) -> RegionSample:
    """Boundary radius along angle theta via supporting hyperplanes."""
    lams = lambda_grid(lam_step)
    cl = c_lambda_all(ch, lams, grid) if _cl is None else _cl
    c, s = math.cos(theta), math.sin(theta)
    denom = lams[:, 0] * c + lams[:, 1] * s + lams[:, 2] * (c + s)
    ok = denom > 1e-12
    ratios = np.full(len(lams), np.inf)
    ratios[ok] = cl[ok] / denom[ok]
    k = int(np.argmin(ratios))
    r = float(ratios[k])
    return RegionSample(theta, r, r * c, r * s, tuple(float(v) for v in lams[k]))


def region_radius_direct(ch: ChannelModel, theta: float, grid=None) -> float:
    """Boundary radius by direct feasibility: largest r with r*(cos, sin) inside
    the convex hull of the per-input pentagons."""
    g = make_grid(ch, grid)
    t = g.mi.reshape(-1, 3)
    i1, i2, i3 = t[:, 0], t[:, 1], t[:, 2]
    a1 = np.minimum(i1, i3)
    corner_a = np.stack([a1, np.minimum(i2, np.maximum(0.0, i3 - a1))], axis=1)
    a2 = np.minimum(i2, i3)
    corner_b = np.stack([np.minimum(i1, np.maximum(0.0, i3 - a2)), a2], axis=1)
    v = np.vstack([corner_a, corner_b])
    n = len(v)
    u = np.array([math.cos(theta), math.sin(theta)])
    # variables: weights (n) and r; maximize r
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    a_ub = np.hstack([-v.T, u[:, None]])
    b_ub = np.zeros(2)
    a_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (n + 1), method="highs")
    if res.status != 0:
        raise NonConvergence(f"feasibility LP failed: {res.message}")
    return float(res.x[-1])


# -- variable-length quantities on output trees --------------------------------

@dataclass
class OutputTree:
    """Output histories up to a horizon with a stopping rule.

    ``prob`` maps each reachable prefix (tuple of outputs) to P(Y^t = prefix);
    ``stop`` holds the prefixes at which T = len(prefix). Prefixes of length
    ``horizon`` stop automatically. ``label`` optionally maps an unstopped
    prefix to a joint pmf ``[x, z, y]`` of the next step given that prefix.
    """

    y_size: int
    horizon: int
    prob: dict
    stop: set
    label: dict | None = None

    def __post_init__(self):
        self.stop = set(self.stop)
        if () not in self.prob:
            self.prob[()] = 1.0
        for path in list(self.prob):
            if len(path) > self.horizon:
                raise InvalidStoppingTime(f"node {path} lies beyond the horizon {self.horizon}")
        for path in self.stop:
            if path not in self.prob:
                raise InvalidStoppingTime(f"stopping node {path} is not in the tree")
        for path, p in self.prob.items():
            if p < 0:
                raise NonStochasticRow(f"negative probability at {path}")
            if path and path[:-1] in self.stop:
                raise InvalidStoppingTime(f"node {path} continues past a stop at {path[:-1]}")
        if abs(self.prob[()] - 1) > 1e-9:
            raise NonStochasticRow("root probability must be 1")
        for path in self.internal_nodes():
            kids = sum(self.prob.get(path + (y,), 0.0) for y in range(self.y_size))
            if abs(kids - self.prob[path]) > 1e-9:
                raise NonStochasticRow(f"children of {path} sum to {kids}, parent has {self.prob[path]}")

    def is_stopped(self, path) -> bool:
        return path in self.stop or len(path) >= self.horizon

    def internal_nodes(self):
        return [p for p in self.prob if not self.is_stopped(p)]

    def leaves(self):
        return [p for p in self.prob if self.is_stopped(p)]

    @classmethod
    def from_nested(cls, obj, y_size: int, horizon: int):
        """Build from nested dicts ``{"p":..., "stop":..., "children": [...], "joint": ...}``."""
        prob, stop, label = {}, set(), {}

        def walk(node, path):
            prob[path] = float(node["p"])
            if node.get("stop"):
                stop.add(path)
            if node.get("joint") is not None:
                label[path] = np.asarray(node["joint"], dtype=float)
            for y, child in enumerate(node.get("children") or []):
                if child is not None:
                    walk(child, path + (y,))

        walk(obj, ())
        return cls(y_size, horizon, prob, stop, label or None)


def vl_entropy(tree: OutputTree):
    """(H(Y^T), H(T), H(Y^T | T)) in bits by leaf enumeration."""
    leaves = [(p, tree.prob[p]) for p in tree.leaves() if tree.prob[p] > 0]
    h_yt = -sum(w * math.log2(w) for _, w in leaves)
    by_t: dict[int, float] = {}
    for path, w in leaves:
        by_t[len(path)] = by_t.get(len(path), 0.0) + w
    h_t = -sum(w * math.log2(w) for w in by_t.values() if w > 0)
    h_cond = -sum(w * math.log2(w / by_t[len(path)]) for path, w in leaves)
    return h_yt, h_t, h_cond


def conditional_mi(joint: np.ndarray) -> float:
    """I(X;Y|Z) in bits for a pmf indexed [x, z, y]."""
    j = np.asarray(joint, dtype=float)
    pz = j.sum(axis=(0, 2))
    pxz = j.sum(axis=2)
    pzy = j.sum(axis=0)
    total = 0.0
    for x, z, y in zip(*np.nonzero(j > 0)):
        total += j[x, z, y] * math.log2(j[x, z, y] * pz[z] / (pxz[x, z] * pzy[z, y]))
    return max(total, 0.0)


def vl_directed_information(tree: OutputTree) -> float:
    """E[sum_{t<=T} I(X^t; Y_t | Z^t, y^{t-1})] from per-node joint labels."""
    if not tree.label:
        raise InconsistentLabels("tree carries no input labels")
    total = 0.0
    for path in tree.internal_nodes():
        w = tree.prob[path]
        if w <= 0:
            continue
        if path not in tree.label:
            raise InconsistentLabels(f"missing label at {path}")
        j = np.asarray(tree.label[path], dtype=float)
        if j.ndim != 3 or j.shape[2] != tree.y_size:
            raise InconsistentLabels(f"label at {path} must be indexed [x, z, y]")
        if np.any(j < 0) or abs(j.sum() - 1) > 1e-9:
            raise InconsistentLabels(f"label at {path} is not a pmf")
        py = j.sum(axis=(0, 1))
        kids = np.array([tree.prob.get(path + (y,), 0.0) for y in range(tree.y_size)]) / w
        if np.max(np.abs(py - kids)) > 1e-9:
            raise InconsistentLabels(f"label at {path} disagrees with the output probabilities")
        total += w * conditional_mi(j)
    return total
