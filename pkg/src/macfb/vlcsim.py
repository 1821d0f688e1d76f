"""Monte-Carlo simulation of the block-retransmission schemes: a data phase with
fixed random product codebooks and joint ML decoding, an optional hybrid phase
in which one user confirms while the other sends the rest of its message, and a
full confirmation phase driven by pz. A block whose confirmation test rejects is
retransmitted from scratch, up to a cap.

Each block of trials draws from its own spawned seed, so results do not depend
on the number of worker threads.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import ALTERNATIVES
from .channel import ChannelModel, effective_channel, prob_vector
from .errors import ConfigInfeasible, InputError
from .hypotest import INF_CLIP, ConfirmationDesign, _llr
from .infotheory import mac_mi_triple
from .parallel import run_blocks, wilson

MAX_PAIRS = 4096
MAX_LENGTH = 24
TRIAL_BLOCK = 4096


@dataclass
class SchemeConfig:
    """``m_hybrid`` is the part of the data user's message carried in the hybrid
    phase; the data phase carries ``m_data / m_hybrid`` of it. ``force_theta``
    overrides the correctness flags (diagnostics only)."""

    n: int
    gammas: tuple
    m1: int
    m2: int
    design: ConfirmationDesign
    m_hybrid: int = 1
    p1: list | None = None
    p2: list | None = None
    codebook_seed: int = 0
    max_blocks: int = 50
    force_theta: tuple | None = None

    def __post_init__(self):
        g = tuple(float(v) for v in self.gammas)
        if len(g) != 3 or min(g) < 0 or abs(sum(g) - 1) > 1e-9:
            raise InputError("gammas must be three nonnegative fractions summing to 1")
        self.gammas = g
        if self.n < 1 or self.n > MAX_LENGTH:
            raise InputError(f"block length must lie in 1..{MAX_LENGTH}")
        if self.m1 < 1 or self.m2 < 1 or self.m1 * self.m2 > MAX_PAIRS:
            raise InputError(f"need m1, m2 >= 1 and m1*m2 <= {MAX_PAIRS}")
        m_data = self.m2 if self.design.user == 1 else self.m1
        if self.m_hybrid < 1 or m_data % self.m_hybrid:
            raise InputError("m_hybrid must divide the data user's message count")
        n1, n2, _ = self.lengths
        if self.m_hybrid > 1 and n2 == 0:
            raise InputError("a hybrid message part needs a hybrid phase")
        if self.max_blocks < 1:
            raise InputError("max_blocks must be >= 1")

    @property
    def lengths(self) -> tuple[int, int, int]:
        """(n1, n2, n3): floors of gamma*n, remainder to the data phase."""
        n2 = int(math.floor(self.gammas[1] * self.n + 1e-9))
        n3 = int(math.floor(self.gammas[2] * self.n + 1e-9))
        return self.n - n2 - n3, n2, n3

    def to_dict(self) -> dict:
        d = asdict(self)
        d["design"] = self.design.to_dict()
        d["gammas"] = list(self.gammas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SchemeConfig":
        d = dict(d)
        d["design"] = ConfirmationDesign.from_dict(d["design"])
        d["gammas"] = tuple(d["gammas"])
        if d.get("force_theta") is not None:
            d["force_theta"] = tuple(d["force_theta"])
        return cls(**d)


@dataclass
class SimResult:
    pe: float
    pe_ci: tuple
    q: float
    p_eb: float
    mean_blocks: float
    mean_length: float
    exponent: float | None
    trials: int
    seed: int
    blocks: int
    rejected: int
    block_errors: int
    errors: int
    capped: int
    first_rejected: int
    first_block_errors: int

    # Pooled q and p_eb satisfy the renewal identity by construction whenever
    # nothing is capped, so the checks below use the first block of each
    # trial, one i.i.d. draw per trial, against the end-to-end outcomes.

    @property
    def q_first(self) -> float:
        return self.first_rejected / self.trials

    @property
    def p_eb_first(self) -> float:
        return self.first_block_errors / self.trials

    def renewal_residual(self) -> float:
        """pe * (1 - q) - p_eb with q and p_eb from first blocks."""
        return self.pe * (1 - self.q_first) - self.p_eb_first

    def renewal_sigma(self) -> float:
        """Standard error of the renewal residual, ignoring the (positive)
        correlation between pe and p_eb, which only makes it larger."""
        q, eb, n = self.q_first, self.p_eb_first, self.trials
        se_pe = math.sqrt(self.pe * (1 - self.pe) / n)
        se_eb = math.sqrt(eb * (1 - eb) / n)
        se_q = math.sqrt(q * (1 - q) / n)
        return math.sqrt((se_pe * (1 - q)) ** 2 + se_eb ** 2 + (self.pe * se_q) ** 2)

    def blocks_residual(self) -> float:
        """mean_blocks * (1 - q) - 1 with q from first blocks."""
        return self.mean_blocks * (1 - self.q_first) - 1

    def blocks_sigma(self) -> float:
        """Standard error of mean_blocks * (1 - q)."""
        q, n = self.q_first, self.trials
        var_blocks = q / (1 - q) ** 2 if q < 1 else math.inf
        se_mean = math.sqrt(var_blocks / n)
        se_q = math.sqrt(q * (1 - q) / n)
        return math.sqrt((se_mean * (1 - q)) ** 2 + (self.mean_blocks * se_q) ** 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pe_ci"] = list(self.pe_ci)
        return d


class _Scheme:
    """Codebooks and per-block simulation for one configuration."""

    def __init__(self, ch: ChannelModel, cfg: SchemeConfig):
        self.ch = ch
        self.cfg = cfg
        d = cfg.design
        self.u = d.user
        self.n1, self.n2, self.n3 = cfg.lengths
        m_data = cfg.m2 if self.u == 1 else cfg.m1
        self.m_split = (m_data // cfg.m_hybrid, cfg.m_hybrid)
        p1 = prob_vector(cfg.p1 if cfg.p1 is not None else np.full(ch.x1_size, 1 / ch.x1_size), ch.x1_size)
        p2 = prob_vector(cfg.p2 if cfg.p2 is not None else np.full(ch.x2_size, 1 / ch.x2_size), ch.x2_size)
        rng = np.random.default_rng(cfg.codebook_seed)
        # data-phase codebooks: the confirming user's full message, the data
        # user's first part
        m_a = cfg.m1 if self.u == 1 else self.m_split[0]
        m_b = self.m_split[0] if self.u == 1 else cfg.m2
        self.c1 = rng.choice(ch.x1_size, size=(m_a, self.n1), p=p1)
        self.c2 = rng.choice(ch.x2_size, size=(m_b, self.n1), p=p2)
        x_other = ch.x2_size if self.u == 1 else ch.x1_size
        self.p_other = prob_vector(d.p_other, x_other)
        self.hybrid = rng.choice(x_other, size=(cfg.m_hybrid, self.n2), p=self.p_other)
        with np.errstate(divide="ignore"):
            self.logq = np.log2(ch.q)
        self.cdf = np.cumsum(ch.q, axis=-1)
        self.cdf[..., -1] = 1.0
        if self.n2:
            rows = effective_channel(ch, self.u, self.p_other).rows
            x0, x1 = d.x_phase2
            self.hyb_llr = _llr(rows[x0], rows[x1])
        if self.n3:
            pz = d.pz_tensor(ch)
            self.pz_flat = np.cumsum(pz.ravel())
            self.pz_flat[-1] = 1.0
            self.pz_shape = pz.shape

    def _sample(self, rng, x1, x2):
        u = rng.random(x1.shape)
        return np.sum(u[..., None] >= self.cdf[x1, x2][..., :-1], axis=-1)

    def _decode_data(self, y):
        ll = np.zeros((len(y), self.c1.shape[0], self.c2.shape[0]))
        for t in range(self.n1):
            ll += self.logq[self.c1[:, t][None, :, None], self.c2[:, t][None, None, :], y[:, t][:, None, None]]
        flat = ll.reshape(len(y), -1).argmax(axis=1)
        return np.unravel_index(flat, ll.shape[1:])

    def block(self, rng, w_conf, w_data):
        """One block for the given messages; returns (accepted, wrong)."""
        k = len(w_conf)
        cfg = self.cfg
        d_a, d_b = w_data // cfg.m_hybrid, w_data % cfg.m_hybrid
        if self.u == 1:
            a, b = w_conf, d_a
        else:
            a, b = d_a, w_conf
        if self.n1:
            y = self._sample(rng, self.c1[a], self.c2[b])
            ha, hb = self._decode_data(y)
        else:
            ha, hb = np.zeros(k, dtype=int), np.zeros(k, dtype=int)
        if self.u == 1:
            theta_c, data_ok = ha != a, hb == b
        else:
            theta_c, data_ok = hb != b, ha == a
        llr = np.zeros((k, 3))
        if self.n2:
            x_conf = np.asarray(cfg.design.x_phase2)[theta_c.astype(int)]
            xc = np.repeat(x_conf[:, None], self.n2, axis=1)
            xd = self.hybrid[d_b]
            x1, x2 = (xc, xd) if self.u == 1 else (xd, xc)
            y2 = self._sample(rng, x1, x2)
            x0 = cfg.design.x_phase2[0]
            # ML for the hybrid part assuming the confirming symbol is x(0)
            ll = np.zeros((k, cfg.m_hybrid))
            for t in range(self.n2):
                col = self.hybrid[:, t]
                rows = self.logq[x0, col] if self.u == 1 else self.logq[col, x0]
                ll += rows[:, y2[:, t]].T
            data_ok &= ll.argmax(axis=1) == d_b
            llr += self.hyb_llr[y2].sum(axis=1)[:, None]
        theta_d = ~data_ok
        th1, th2 = (theta_c, theta_d) if self.u == 1 else (theta_d, theta_c)
        if cfg.force_theta is not None:
            th1 = np.full(k, bool(cfg.force_theta[0]))
            th2 = np.full(k, bool(cfg.force_theta[1]))
        if self.n3:
            idx = np.searchsorted(self.pz_flat, rng.random((k, self.n3)), side="right")
            z10, z20, z11, z21 = np.unravel_index(np.minimum(idx, len(self.pz_flat) - 1), self.pz_shape)
            x1 = np.where(th1[:, None], z11, z10)
            x2 = np.where(th2[:, None], z21, z20)
            y3 = self._sample(rng, x1, x2)
            base = self.logq[z10, z20, y3]
            zs = ((z10, z11), (z20, z21))
            for j, (b1, b2) in enumerate(ALTERNATIVES):
                alt = self.logq[zs[0][b1], zs[1][b2], y3]
                with np.errstate(invalid="ignore"):
                    v = base - alt
                llr[:, j] += np.nan_to_num(v, nan=0.0, posinf=INF_CLIP, neginf=-INF_CLIP).sum(axis=1)
        if self.n2 or self.n3:
            tested = slice(None) if self.n3 else [j for j, a in enumerate(ALTERNATIVES) if a[self.u - 1] == 1]
            accepted = np.all(llr[:, tested] >= cfg.design.lam, axis=1)
        else:
            accepted = np.ones(k, dtype=bool)
        return accepted, th1 | th2


def _feasibility_warning(ch: ChannelModel, cfg: SchemeConfig):
    n1, n2, _ = cfg.lengths
    p1 = cfg.p1 if cfg.p1 is not None else np.full(ch.x1_size, 1 / ch.x1_size)
    p2 = cfg.p2 if cfg.p2 is not None else np.full(ch.x2_size, 1 / ch.x2_size)
    i1, i2, i3 = mac_mi_triple(ch, p1, p2)
    m_data1 = (cfg.m2 if cfg.design.user == 1 else cfg.m1) // cfg.m_hybrid
    r = (math.log2(cfg.m1 if cfg.design.user == 1 else m_data1),
         math.log2(m_data1 if cfg.design.user == 1 else cfg.m2))
    if n1 and (r[0] / n1 > i1 or r[1] / n1 > i2 or (r[0] + r[1]) / n1 > i3):
        warnings.warn("data-phase rates lie outside the pentagon of the chosen inputs", ConfigInfeasible)
    if n2 and cfg.m_hybrid > 1:
        rows = ch.user_view(cfg.design.user)[cfg.design.x_phase2[0]]
        p = prob_vector(cfg.design.p_other)
        mix = p @ rows
        cap = float(np.sum(p[:, None] * rows * (np.log2(np.where(rows > 0, rows, 1)) -
                                                np.log2(np.where(mix > 0, mix, 1))[None, :])))
        if math.log2(cfg.m_hybrid) / n2 > cap:
            warnings.warn("hybrid-phase rate exceeds I(X_other; Y | x(0))", ConfigInfeasible)


def run_scheme(ch: ChannelModel, cfg: SchemeConfig, trials: int, seed: int,
               workers: int | None = None) -> SimResult:
    if trials < 1:
        raise InputError("trials must be >= 1")
    _feasibility_warning(ch, cfg)
    scheme = _Scheme(ch, cfg)
    m_conf = cfg.m1 if cfg.design.user == 1 else cfg.m2
    m_data = cfg.m2 if cfg.design.user == 1 else cfg.m1

    def work(rng, size, _index):
        w_conf = rng.integers(0, m_conf, size)
        w_data = rng.integers(0, m_data, size)
        active = np.arange(size)
        blocks = rejected = block_err = first_rej = first_err = 0
        n_blocks = np.zeros(size, dtype=np.int64)
        error = np.zeros(size, dtype=bool)
        for _ in range(cfg.max_blocks):
            acc, wrong = scheme.block(rng, w_conf[active], w_data[active])
            blocks += len(active)
            rejected += int(np.sum(~acc))
            block_err += int(np.sum(acc & wrong))
            n_blocks[active] += 1
            if blocks == size:
                first_rej, first_err = int(np.sum(~acc)), int(np.sum(acc & wrong))
            error[active[acc & wrong]] = True
            active = active[~acc]
            if not len(active):
                break
        error[active] = True
        return np.array([blocks, rejected, block_err, int(error.sum()), len(active), int(n_blocks.sum()),
                         first_rej, first_err])

    tot = np.sum(run_blocks(work, trials, seed, TRIAL_BLOCK, workers), axis=0)
    blocks, rejected, block_err, errors, capped, sum_blocks, first_rej, first_err = (int(v) for v in tot)
    pe = errors / trials
    mean_blocks = sum_blocks / trials
    mean_len = cfg.n * mean_blocks
    return SimResult(pe, wilson(errors, trials), rejected / blocks, block_err / blocks, mean_blocks,
                     mean_len, -math.log2(pe) / mean_len if pe > 0 else None, trials, seed,
                     blocks, rejected, block_err, errors, capped, first_rej, first_err)


def gamma_grid(step: float) -> list[tuple]:
    k = int(round(1 / step))
    return [(a / k, b / k, (k - a - b) / k) for a in range(k + 1) for b in range(k + 1 - a)]


def sweep_gamma(ch: ChannelModel, base: SchemeConfig, gammas, trials: int, seed: int,
                workers: int | None = None) -> list[dict]:
    """run_scheme at every gamma triple. Where the hybrid phase is empty, the
    data user's whole message moves to the data phase. Triples leaving no
    confirmation at all are skipped."""
    rows = []
    for g in gammas:
        g = tuple(float(v) for v in g)
        n2 = int(math.floor(g[1] * base.n + 1e-9))
        n3 = int(math.floor(g[2] * base.n + 1e-9))
        if n2 + n3 == 0:
            continue
        cfg = SchemeConfig(**{**base.__dict__, "gammas": g, "m_hybrid": base.m_hybrid if n2 else 1})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConfigInfeasible)
            res = run_scheme(ch, cfg, trials, seed, workers)
        rows.append({"gamma1": g[0], "gamma2": g[1], "gamma3": g[2], "n1": cfg.lengths[0], "n2": n2,
                     "n3": n3, "pe": res.pe, "q": res.q, "mean_length": res.mean_length,
                     "exponent": res.exponent})
    return rows

