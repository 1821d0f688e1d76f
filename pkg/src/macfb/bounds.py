"""Reliability-function bounds for MACs with feedback, evaluated on single-letter
product-input grids.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .channel import (
    ChannelModel,
    d_bar_j,
    d_single_user,
    d_ub,
    effective_channel,
    kl_rows,
    point_mass,
)
from .errors import NonConvergence
from .infotheory import (
    InputGrid,
    MiTriple,
    _with_uniform,
    c_lambda_all,
    default_resolution,
    lambda_grid,
    make_grid,
    mi_triples_batch,
    ptp_capacity,
    refine_product_input,
    region_boundary,
    simplex_grid,
)

GRID_TOL = 0.02
ALTERNATIVES = ((0, 1), (1, 0), (1, 1))


class RatePair(NamedTuple):
    r1: float
    r2: float

    @property
    def r3(self) -> float:
        return self.r1 + self.r2


def _rates(r) -> RatePair:
    r = RatePair(float(r[0]), float(r[1]))
    if r.r1 < 0 or r.r2 < 0:
        raise ValueError("rates must be nonnegative")
    return r


# -- E_o ----------------------------------------------------------------------

def _ratio(r, i):
    """r / i with 0/0 = 0 and r/0 = inf for r > 0."""
    r = np.asarray(r, dtype=float)
    i = np.asarray(i, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(i > 0, r / np.where(i > 0, i, 1.0), np.where(r > 0, np.inf, 0.0))
    return out


def e_o(mi, r) -> float:
    """1 - max{r1/i1, r2/i2, (r1+r2)/i3}; -inf when a positive rate meets zero information."""
    r = _rates(r)
    m = np.asarray(mi, dtype=float)
    worst = max(float(_ratio(r.r1, m[0])), float(_ratio(r.r2, m[1])), float(_ratio(r.r3, m[2])))
    return 1.0 - worst


def e_o_batch(mi: np.ndarray, r1, r2) -> np.ndarray:
    """E_o for an array of triples (..., 3); r1, r2 broadcast against mi[..., 0]."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    worst = np.maximum(np.maximum(_ratio(r1, mi[..., 0]), _ratio(r2, mi[..., 1])),
                       _ratio(r1 + r2, mi[..., 2]))
    return 1.0 - worst


def sup_e_o(ch: ChannelModel, r, grid=None, refine: bool = False):
    """(sup E_o, p1, p2) over the input grid, optionally polished by local search."""
    r = _rates(r)
    g = make_grid(ch, grid)
    vals = e_o_batch(g.mi, r.r1, r.r2)
    a, b = np.unravel_index(int(np.argmax(vals)), vals.shape)
    best, p1, p2 = float(vals[a, b]), g.p1s[a], g.p2s[b]
    if refine and np.isfinite(best):
        v, q1, q2 = refine_product_input(ch, lambda t: e_o(t, r), p1, p2, step=g.spacing / 2)
        if v > best:
            best, p1, p2 = v, q1, q2
    return best, p1, p2


# -- confirmation divergences and D_lb ------------------------------------------

def confirmation_kernels(ch: ChannelModel) -> np.ndarray:
    """K[ab, z1(0), z2(0), z1(1), z2(1)] = D(Q(.|z(00)) || Q(.|z(ab))) for ab in 01, 10, 11."""
    a, b = ch.x1_size, ch.x2_size
    rows = ch.q.reshape(-1, ch.y_size)
    m = kl_rows(rows, rows).reshape(a, b, a, b)
    i, j, k, l = np.meshgrid(range(a), range(b), range(a), range(b), indexing="ij")
    return np.stack([m[i, j, i, l], m[i, j, k, j], m[i, j, k, l]])


def d_bar_pz(ch: ChannelModel, pz, a) -> float:
    """E_pz[ D(Q(.|Z1(0),Z2(0)) || Q(.|Z1(a1),Z2(a2))) ]."""
    a = tuple(a)
    if a not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}")
    pz = np.asarray(pz, dtype=float).reshape(ch.x1_size, ch.x2_size, ch.x1_size, ch.x2_size)
    k = confirmation_kernels(ch)[ALTERNATIVES.index(a)]
    mask = pz > 0
    if np.any(np.isinf(k[mask])):
        return math.inf
    return float(np.sum(pz[mask] * k[mask]))


def maxmin_lp(funcs: np.ndarray, offsets=None):
    """max over the simplex of min_j (funcs[j] . p + offsets[j]).

    Rows containing +inf entries can be driven to +inf by an arbitrarily small
    mass, so they only constrain the supremum through their finite part being
    irrelevant; they are dropped and a vanishing mass is put on an infinite cell.
    Returns (value, p).
    """
    f = np.asarray(funcs, dtype=float)
    k, n = f.shape
    o = np.zeros(k) if offsets is None else np.asarray(offsets, dtype=float)
    inf_rows = [j for j in range(k) if np.any(np.isinf(f[j]))]
    keep = [j for j in range(k) if j not in inf_rows]
    p_inf = np.zeros(n)
    for j in inf_rows:
        p_inf[int(np.argmax(np.isinf(f[j])))] += 1.0
    if not keep:
        return math.inf, p_inf / p_inf.sum()
    fk = f[keep]
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    a_ub = np.hstack([-fk, np.ones((len(keep), 1))])
    b_ub = o[keep]
    a_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    if res.status != 0:
        raise NonConvergence(f"max-min LP failed: {res.message}")
    p = np.maximum(res.x[:n], 0.0)
    p /= p.sum()
    value = float(np.min(fk @ p + o[keep]))
    if inf_rows:
        delta = 1e-9
        p = (1 - delta) * p + delta * p_inf / p_inf.sum()
    return value, p


def d_lb(ch: ChannelModel):
    """(max over pz of min over ab of Dbar_pz(00||ab), achieving pz tensor)."""
    k = confirmation_kernels(ch)
    value, p = maxmin_lp(k.reshape(3, -1))
    pz = p.reshape(k.shape[1:])
    if math.isfinite(value):
        vals = [d_bar_pz(ch, pz, a) for a in ALTERNATIVES]
        if min(vals) < value - 1e-8:
            raise NonConvergence(f"LP certificate failed: {vals} vs {value}")
    return value, pz


# -- two-phase bounds ----------------------------------------------------------

def _clamp(v: float, raw: bool) -> float:
    return v if raw else max(v, 0.0)


def _scale(d: float, factor: float) -> float:
    """d * factor with inf * 0 = 0 and inf * negative = -inf."""
    if factor == 0:
        return 0.0
    if math.isinf(d):
        return math.inf if factor > 0 else -math.inf
    return d * factor


def lower_two_phase(ch: ChannelModel, r, grid=None, refine: bool = False, raw: bool = False) -> float:
    """d_lb times the best E_o over product inputs."""
    eo, _, _ = sup_e_o(ch, r, grid, refine)
    return _clamp(_scale(d_lb(ch)[0], eo), raw)


def upper_two_phase(ch: ChannelModel, r, grid=None, refine: bool = False, raw: bool = False) -> float:
    """d_ub times the best min_i (1 - R_i/I_i) over product inputs (the same optimum as E_o)."""
    eo, _, _ = sup_e_o(ch, r, grid, refine)
    return _clamp(_scale(d_ub(ch), eo), raw)


# -- three-phase upper bound ---------------------------------------------------

def _pareto(v: np.ndarray) -> np.ndarray:
    """Indices of rows not weakly dominated by another row (ties keep the first)."""
    v = np.asarray(v, dtype=float)
    keep = []
    for i in range(len(v)):
        ge = np.all(v >= v[i], axis=1)
        gt = np.any(v > v[i], axis=1)
        dominated = np.any(ge & gt) or np.any(ge[:i] & ~gt[:i])
        if not dominated:
            keep.append(i)
    return np.array(keep, dtype=int)


def _times(d, factor):
    """d * factor elementwise with 0 * anything = 0."""
    d = np.asarray(d, dtype=float)
    factor = np.asarray(factor, dtype=float)
    with np.errstate(invalid="ignore"):
        out = d * factor
    return np.where((d == 0) | (factor == 0), 0.0, out)


def _own_divergence(ch: ChannelModel, user: int, other_input) -> float:
    """max over x, x' of D(Qbar(.|x) || Qbar(.|x')) with the same other-user law on both sides."""
    rows = effective_channel(ch, user, other_input).rows
    return float(kl_rows(rows, rows).max())


def fraction_grid(step: float) -> np.ndarray:
    """(phi1, phi2, phi3) on a simplex lattice with phi1 > 0."""
    g = simplex_grid(3, int(round(1 / step)))
    return g[g[:, 0] > 0]


def upper_three_phase(ch: ChannelModel, r, grid=None, raw: bool = False, detail: bool = False,
                      fraction_step: float | None = None):
    """Sup of min_i D^i (1 - R_i / I^i) over policies made of three stationary segments.

    Segment 1 sends data with a product input P, segment 2 is a hybrid where one
    user holds a fixed symbol while the other keeps a product input, segment 3
    confirms with point-mass inputs. Each T_i is placed at the end of segment 1
    or 2; I^i averages the per-use information before T_i and D^i averages the
    per-use divergence after it. D^i of a segment is the largest divergence the
    user's own symbol creates under that segment's law of the other user's
    input; D^3 is d_ub throughout. With no hybrid segment this is
    sup_P min{D1 (1 - R1/I1), D2 (1 - R2/I2), d_ub (1 - R3/I3)}.
    """
    r = _rates(r)
    g = make_grid(ch, grid)
    rates = np.array([r.r1, r.r2, r.r3])
    dconf = np.array([d_single_user(ch, 1), d_single_user(ch, 2), d_ub(ch)])
    a = g.mi.reshape(-1, 3)
    front = _pareto(a)
    af = a[front]
    fac_a = 1 - _ratio(rates[None, :], af)  # (n, 3)

    # two segments
    two = np.min(_times(dconf[None, :], fac_a), axis=1)
    k = int(np.argmax(two))
    best_val = float(two[k])
    best = {"p_index": int(front[k]), "hybrid": None, "fractions": None}

    cands = []
    for user in (1, 2):
        for x in range(ch.input_size(user)):
            for po in _other_candidates(ch, user, x, None):
                pm = point_mass(ch.input_size(user), x)
                p1, p2 = (pm, po) if user == 1 else (po, pm)
                h = mi_triples_batch(ch, p1[None], p2[None])[0, 0]
                dh = np.array([_own_divergence(ch, 1, p2), _own_divergence(ch, 2, p1), dconf[2]])
                cands.append((np.concatenate([h, dh]), user, x, po))
    if cands:
        vecs = np.array([c[0] for c in cands])
        keep = _pareto(vecs)
        if fraction_step is None:
            fraction_step = 0.02 if len(front) <= 500 else 0.05
        fr = fraction_grid(fraction_step)
        f1, f2, f3 = fr[:, 0], fr[:, 1], fr[:, 2]
        tail = f2 + f3
        head = f1 + f2
        for ci in keep:
            vec, user, x, po = cands[ci]
            h, dh = vec[:3], vec[3:]
            terms = []
            for i in range(3):
                with np.errstate(invalid="ignore", divide="ignore"):
                    d_tail = np.where(tail > 0, (f2 * dh[i] + f3 * dconf[i]) / np.where(tail > 0, tail, 1), 0.0)
                c1 = _times(d_tail[None, :], fac_a[:, i:i + 1])
                i_head = (f1[None, :] * af[:, i:i + 1] + f2[None, :] * h[i]) / head[None, :]
                c2 = _times(np.where(f3 > 0, dconf[i], 0.0)[None, :], 1 - _ratio(rates[i], i_head))
                terms.append(np.maximum(c1, c2))
            vals = np.minimum(np.minimum(terms[0], terms[1]), terms[2])
            j = int(np.argmax(vals))
            if vals.flat[j] > best_val + 1e-12:
                pi, fi = np.unravel_index(j, vals.shape)
                best_val = float(vals[pi, fi])
                best = {"p_index": int(front[pi]), "hybrid": (user, x, po.tolist()),
                        "fractions": fr[fi].tolist()}
    v = _clamp(best_val, raw)
    if detail:
        pa, pb = np.unravel_index(best["p_index"], g.mi.shape[:2])
        best.update({"d_conf": dconf.tolist(), "p1": g.p1s[pa].tolist(), "p2": g.p2s[pb].tolist()})
        return v, best
    return v


# -- three-phase lower bound ---------------------------------------------------

class _HybridProfile:
    """g(s) = max_pz min of the three confirmation functionals with s added to the
    two that benefit from the hybrid phase, tabulated on a grid of s.

    g is concave and nondecreasing in s; linear interpolation between exact
    LP values therefore never overestimates it.
    """

    def __init__(self, kernels: np.ndarray, boosted: tuple, points: int = 161):
        self.f = kernels.reshape(3, -1)
        self.boosted = boosted
        finite = self.f[np.isfinite(self.f)]
        top = float(finite.max()) if finite.size else 0.0
        self.s_max = max(top, 1e-12)
        self.s = np.linspace(0.0, self.s_max, points)
        self.g = np.array([self.exact(s)[0] for s in self.s])

    def offsets(self, s: float) -> np.ndarray:
        return np.array([s if j in self.boosted else 0.0 for j in range(3)])

    def exact(self, s: float):
        return maxmin_lp(self.f, self.offsets(s))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(self.g)):
            return np.full(s.shape, math.inf)
        inside = np.interp(np.minimum(s, self.s_max), self.s, self.g)
        # beyond s_max only the unboosted functional can bind
        return inside


@dataclass
class ThreePhaseParams:
    value: float
    branch: int | None = None  # user that confirms during the hybrid phase
    x: int | None = None
    gamma2: float = 0.0
    p_other: list | None = None
    p1: list | None = None
    p2: list | None = None
    pz: list | None = None
    e_o_shifted: float | None = None
    hybrid_rate: float | None = None
    hybrid_divergence: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


_PROFILE_CACHE: dict = {}


def _profiles(ch: ChannelModel):
    key = (ch.q.shape, ch.q.tobytes())
    if key not in _PROFILE_CACHE:
        k = confirmation_kernels(ch)
        # user 1 confirming early boosts the 10 and 11 terms; user 2 the 01 and 11 terms
        _PROFILE_CACHE[key] = (k, {1: _HybridProfile(k, (1, 2)), 2: _HybridProfile(k, (0, 2))})
        if len(_PROFILE_CACHE) > 32:
            _PROFILE_CACHE.pop(next(iter(_PROFILE_CACHE)))
    return _PROFILE_CACHE[key]


def _other_candidates(ch: ChannelModel, user: int, x: int, resolution: int | None):
    """Hybrid-phase inputs for the data user: a simplex grid plus the input that
    achieves capacity of the kernel seen with the confirming symbol fixed."""
    view = ch.user_view(user)[x]  # [x_other, y]
    k = view.shape[0]
    grid = _with_uniform(simplex_grid(k, resolution or default_resolution(k)))
    try:
        _, p_star = ptp_capacity(view, tol=1e-9)
        grid = np.vstack([grid, p_star])
    except NonConvergence:
        pass
    return grid


def _hybrid_rate(ch: ChannelModel, user: int, x: int, p_other: np.ndarray) -> float:
    """I(X_other; Y | X_user = x) under p_other."""
    view = ch.user_view(user)[x]
    out = p_other @ view
    d = kl_rows(view, out[None, :])[:, 0]
    d = np.where(p_other > 0, d, 0.0)
    return float(p_other @ d)


def gamma_grid(step: float) -> np.ndarray:
    n = int(round(1 / step))
    return np.arange(n) * step


def lower_three_phase(ch: ChannelModel, r, grid=None, gamma_step: float = 0.02,
                      raw: bool = False, gamma_max: float | None = None) -> ThreePhaseParams:
    """Best of the two-phase bound and both hybrid-phase branches.

    Branch u: user u repeats symbol x for a fraction gamma2 while the other user
    keeps sending data at I(X_other; Y | X_u = x); the remaining error events
    then see (E_o(shifted rates) - gamma2) of full confirmation, and two of the
    three alternatives also gain gamma2 * Dbar(x, P_other).
    """
    r = _rates(r)
    g = make_grid(ch, grid)
    kern, profiles = _profiles(ch)
    dl, pz_lb = d_lb(ch)
    mi_flat = g.mi.reshape(-1, 3)

    eo_vals = e_o_batch(mi_flat, r.r1, r.r2)
    k0 = int(np.argmax(eo_vals))
    eo0 = float(eo_vals[k0])
    a0, b0 = np.unravel_index(k0, g.mi.shape[:2])
    best = ThreePhaseParams(_scale(dl, eo0), None, None, 0.0, None,
                            g.p1s[a0].tolist(), g.p2s[b0].tolist(), pz_lb.ravel().tolist(),
                            eo0, 0.0, 0.0)

    gammas = gamma_grid(gamma_step)
    if gamma_max is not None:
        gammas = gammas[gammas <= gamma_max + 1e-12]
    gammas = gammas[gammas > 0]

    tables = {u: _ShiftedEo(mi_flat, r, u) for u in (1, 2)}

    def evaluate(user, x, p_other, gam):
        """Branch values for an array of gamma2, never above the exact ones."""
        rate = _hybrid_rate(ch, user, x, p_other)
        div = d_bar_j(ch, user, x, p_other)
        eo_star = tables[user].lookup(gam * rate)
        amp = eo_star - gam
        vals = np.full(gam.shape, -math.inf)
        ok = amp > 0
        if np.any(ok):
            if math.isinf(div):
                vals[ok] = math.inf
            else:
                s = gam[ok] * div / amp[ok]
                vals[ok] = amp[ok] * profiles[user](s)
        return vals, rate, div

    def finalize(user, x, p_other, gam, rate, div, approx):
        """Exact E_o and confirmation LP at the chosen parameters."""
        eo_star, idx = tables[user].exact(gam * rate)
        amp = eo_star - gam
        prof = profiles[user]
        if math.isinf(div):
            value, pz = math.inf, None
        else:
            value, pz = maxmin_lp(prof.f * amp, prof.offsets(gam * div))
            value = max(value, approx)
        a, b = np.unravel_index(int(idx), g.mi.shape[:2])
        return ThreePhaseParams(
            float(value), user, int(x), float(gam), np.asarray(p_other).tolist(),
            g.p1s[a].tolist(), g.p2s[b].tolist(), None if pz is None else pz.tolist(),
            float(eo_star), float(rate), float(div))

    if len(gammas):
        for user in (1, 2):
            for x in range(ch.input_size(user)):
                for p_other in _other_candidates(ch, user, x, None):
                    vals, rate, div = evaluate(user, x, p_other, gammas)
                    j = int(np.argmax(vals))
                    if vals[j] > best.value + 1e-12:
                        best = finalize(user, x, p_other, gammas[j], rate, div, float(vals[j]))
        if best.branch is not None:
            # one refinement pass around the best gamma2
            lo = max(best.gamma2 - gamma_step, 0.0)
            fine = lo + np.arange(21) * gamma_step / 10
            fine = fine[(fine > 0) & (fine < 1)]
            if gamma_max is not None:
                fine = fine[fine <= gamma_max + 1e-12]
            p_other = np.asarray(best.p_other)
            vals, rate, div = evaluate(best.branch, best.x, p_other, fine)
            j = int(np.argmax(vals))
            if vals[j] > best.value + 1e-12:
                best = finalize(best.branch, best.x, p_other, fine[j], rate, div, float(vals[j]))
    best.value = _clamp(best.value, raw)
    return best


class _ShiftedEo:
    """Best E_o over the grid when the data user of a hybrid phase has moved
    part of its rate out of the data phase.

    Tabulated on a fine grid of moved rate; lookups round the moved amount
    down, which can only lower E_o, so tabulated values never exceed exact ones.
    """

    def __init__(self, mi_flat: np.ndarray, r: RatePair, confirming_user: int, points: int = 2001):
        self.mi = mi_flat
        self.r = r
        self.user = confirming_user
        self.total = r.r2 if confirming_user == 1 else r.r1
        self.points = points
        self.moved = np.linspace(0.0, self.total, points)
        self.table = np.empty(points)
        for lo in range(0, points, 128):
            m = self.moved[lo:lo + 128]
            self.table[lo:lo + 128] = self._eo(m).max(axis=1)

    def _eo(self, moved: np.ndarray) -> np.ndarray:
        rest = np.maximum(0.0, self.total - moved)[:, None]
        if self.user == 1:
            return e_o_batch(self.mi[None], self.r.r1, rest)
        return e_o_batch(self.mi[None], rest, self.r.r2)

    def lookup(self, moved) -> np.ndarray:
        moved = np.minimum(np.asarray(moved, dtype=float), self.total)
        if self.total <= 0:
            return np.full(moved.shape, self.table[0])
        k = np.floor(moved / self.total * (self.points - 1) + 1e-12).astype(int)
        return self.table[np.clip(k, 0, self.points - 1)]

    def exact(self, moved: float):
        vals = self._eo(np.array([min(float(moved), self.total)]))[0]
        k = int(np.argmax(vals))
        return float(vals[k]), k


# -- lambda-mixed and geometric forms -------------------------------------------

def _lambda_ratios(ch: ChannelModel, r: RatePair, grid, lam_step: float):
    lams = lambda_grid(lam_step)
    cl = c_lambda_all(ch, lams, grid)
    num = lams @ np.array([r.r1, r.r2, r.r3])
    return lams, cl, _ratio(num, cl)


def upper_lambda_mixed(ch: ChannelModel, r, grid=None, lam_step: float = 0.05) -> float:
    """min over lambda of d_ub (1 - sum lambda_i R_i / C_lambda), clamped to [0, d_ub]."""
    r = _rates(r)
    _, _, ratios = _lambda_ratios(ch, r, make_grid(ch, grid), lam_step)
    du = d_ub(ch)
    v = _scale(du, 1 - float(np.max(ratios)))
    return min(max(v, 0.0), du)


@dataclass
class GeometricBound:
    value: float
    polar: float
    lambda_form: float
    radius: float
    theta: float
    outside_region: bool


def lower_geometric(ch: ChannelModel, r, grid=None, lam_step: float = 0.05) -> GeometricBound:
    """d_lb (1 - |R| / C(theta_R)) and its hyperplane form
    min over lambda of d_lb (1 - sum lambda_i R_i / C_lambda)."""
    r = _rates(r)
    g = make_grid(ch, grid)
    dl = d_lb(ch)[0]
    if r.r1 == 0 and r.r2 == 0:
        return GeometricBound(dl, dl, dl, math.nan, math.nan, False)
    lams, cl, ratios = _lambda_ratios(ch, r, g, lam_step)
    theta = math.atan2(r.r2, r.r1)
    sample = region_boundary(ch, theta, g, lam_step, _cl=cl)
    norm = math.hypot(r.r1, r.r2)
    polar_raw = _scale(dl, 1 - norm / sample.radius) if sample.radius > 0 else -math.inf
    lam_raw = _scale(dl, 1 - float(np.max(ratios)))
    outside = norm > sample.radius + 1e-12
    polar, lam_form = max(polar_raw, 0.0), max(lam_raw, 0.0)
    return GeometricBound(polar, polar, lam_form, sample.radius, theta, outside)


def closed_form_parallel(d1: float, c1: float, d2: float, c2: float, r) -> float:
    """min{D1 (1 - R1/C1), D2 (1 - R2/C2)} for two independent channels."""
    r = _rates(r)
    return min(d1 * (1 - r.r1 / c1), d2 * (1 - r.r2 / c2))


# -- report ----------------------------------------------------------------------

@dataclass
class ExponentReport:
    r1: float
    r2: float
    d_lb: float
    d_ub: float
    lb_two_phase: float
    lb_three_phase: float
    ub_two_phase: float
    ub_three_phase: float
    lb_geometric: float
    ub_lambda_mixed: float
    outside_region: bool
    three_phase: dict = field(default_factory=dict)
    d_lb_pz: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def exponent_report(ch: ChannelModel, r, grid=None, gamma_step: float = 0.02,
                    lam_step: float = 0.05) -> ExponentReport:
    r = _rates(r)
    g = make_grid(ch, grid)
    dl, pz = d_lb(ch)
    three = lower_three_phase(ch, r, g, gamma_step)
    geo = lower_geometric(ch, r, g, lam_step)
    return ExponentReport(
        r1=r.r1, r2=r.r2, d_lb=dl, d_ub=d_ub(ch),
        lb_two_phase=lower_two_phase(ch, r, g),
        lb_three_phase=three.value,
        ub_two_phase=upper_two_phase(ch, r, g),
        ub_three_phase=upper_three_phase(ch, r, g),
        lb_geometric=geo.value,
        ub_lambda_mixed=upper_lambda_mixed(ch, r, g, lam_step),
        outside_region=geo.outside_region,
        three_phase=three.to_dict(),
        d_lb_pz=pz.ravel().tolist(),
    )


__all__ = [
    "RatePair", "e_o", "e_o_batch", "sup_e_o", "confirmation_kernels", "d_bar_pz", "maxmin_lp",
    "d_lb", "lower_two_phase", "upper_two_phase", "upper_three_phase", "lower_three_phase",
    "upper_lambda_mixed", "lower_geometric", "closed_form_parallel", "exponent_report",
    "ExponentReport", "ThreePhaseParams", "GeometricBound", "point_mass", "MiTriple",
    "mi_triples_batch", "GRID_TOL",
]
