"""Finite-alphabet multiple-access channels Q(y|x1,x2) and their divergence constants.

All divergences are in bits unless a base is passed explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AlphabetMismatch,
    InvalidNoise,
    LengthMismatch,
    NegativeEntry,
    NonStochasticRow,
)

ROW_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Transition tensor ``q[x1, x2, y]``; build through :func:`validate_channel`."""

    q: np.ndarray

    @property
    def x1_size(self) -> int:
        return self.q.shape[0]

    @property
    def x2_size(self) -> int:
        return self.q.shape[1]

    @property
    def y_size(self) -> int:
        return self.q.shape[2]

    def input_size(self, user: int) -> int:
        return self.q.shape[0] if user == 1 else self.q.shape[1]

    def user_view(self, user: int) -> np.ndarray:
        """Tensor indexed ``[x_user, x_other, y]``."""
        return self.q if user == 1 else self.q.transpose(1, 0, 2)

    def is_strictly_positive(self) -> bool:
        return bool(np.all(self.q > 0))

    def to_dict(self) -> dict:
        return {
            "x1_size": self.x1_size,
            "x2_size": self.x2_size,
            "y_size": self.y_size,
            "Q": self.q.tolist(),
        }

    def __eq__(self, other) -> bool:
        return isinstance(other, ChannelModel) and np.array_equal(self.q, other.q)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    user: int
    rows: np.ndarray  # [x_user, y]


def validate_channel(raw, x1_size=None, x2_size=None, y_size=None, renormalize=False) -> ChannelModel:
    q = np.array(raw, dtype=float)
    if q.ndim != 3:
        raise LengthMismatch(f"channel tensor must be 3-dimensional, got shape {q.shape}")
    for declared, actual, name in ((x1_size, q.shape[0], "x1_size"),
                                   (x2_size, q.shape[1], "x2_size"),
                                   (y_size, q.shape[2], "y_size")):
        if declared is not None and declared != actual:
            raise LengthMismatch(f"{name}={declared} but tensor has {actual}")
    if min(q.shape) < 1:
        raise LengthMismatch("empty alphabet")
    if not np.all(np.isfinite(q)):
        raise NegativeEntry("channel entries must be finite")
    if np.any(q < 0):
        idx = tuple(int(i) for i in np.argwhere(q < 0)[0])
        raise NegativeEntry(f"negative entry at {idx}")
    sums = q.sum(axis=2)
    if renormalize:
        if np.any(sums <= 0):
            raise NonStochasticRow("cannot renormalize an all-zero row")
        q = q / sums[:, :, None]
    else:
        bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
        if len(bad):
            x1, x2 = (int(i) for i in bad[0])
            raise NonStochasticRow(f"row ({x1},{x2}) sums to {float(sums[x1, x2])!r}")
    q = q.copy()
    q.setflags(write=False)
    return ChannelModel(q)


def prob_vector(p, size: int | None = None) -> np.ndarray:
    """Validate a probability vector (entries >= 0, sum 1 within 1e-9)."""
    v = np.asarray(p, dtype=float).reshape(-1)
    if size is not None and v.size != size:
        raise AlphabetMismatch(f"expected {size} probabilities, got {v.size}")
    if np.any(v < 0):
        raise NegativeEntry("negative probability")
    if abs(v.sum() - 1.0) > ROW_TOL:
        raise NonStochasticRow(f"probabilities sum to {v.sum()!r}")
    return v


def point_mass(size: int, k: int) -> np.ndarray:
    v = np.zeros(size)
    v[k] = 1.0
    return v


def _log(x, base):
    return np.log(x) if base == "e" or base == np.e else np.log(x) / np.log(base)


def kl(p, q, base=2) -> float:
    """Kullback-Leibler divergence D(p||q); 0 log 0 = 0 and p>0, q=0 gives inf."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise LengthMismatch(f"lengths differ: {p.shape} vs {q.shape}")
    return float(kl_rows(p[None, :], q[None, :], base)[0, 0])


def kl_rows(a: np.ndarray, b: np.ndarray, base=2) -> np.ndarray:
    """Pairwise divergences ``out[i, j] = D(a[i] || b[j])``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise LengthMismatch("row lengths differ")
    pa = a[:, None, :]
    pb = b[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pa > 0, pa * (np.log(pa) - np.log(pb)), 0.0)
    terms = np.where((pa > 0) & (pb == 0), np.inf, terms)
    out = terms.sum(axis=-1)
    out = np.maximum(out, 0.0)  # rounding can leave tiny negatives
    if base == "e" or base == np.e:
        return out
    return out / np.log(base)


def d_ub(ch: ChannelModel) -> float:
    """Largest divergence between any two channel rows (ordered pairs)."""
    rows = ch.q.reshape(-1, ch.y_size)
    return float(kl_rows(rows, rows).max())


def effective_channel(ch: ChannelModel, user: int, other_input) -> EffectiveChannel:
    """Rows ``sum_{x_other} P(x_other) Q(y|x_user, x_other)``."""
    other = 2 if user == 1 else 1
    p = np.asarray(other_input, dtype=float).reshape(-1)
    if p.size != ch.input_size(other):
        raise AlphabetMismatch(
            f"other_input has {p.size} entries, user {other} alphabet is {ch.input_size(other)}")
    p = prob_vector(p)
    rows = np.einsum("o,uoy->uy", p, ch.user_view(user))
    return EffectiveChannel(user, rows)


def d_bar_j(ch: ChannelModel, user: int, x: int, other_input) -> float:
    """max over z of D(Qbar(.|x) || Qbar(.|z)) for the user's effective channel."""
    rows = effective_channel(ch, user, other_input).rows
    return float(kl_rows(rows[x:x + 1], rows).max())


def d_star_upper(ch: ChannelModel, user: int, other_input) -> float:
    """max over x, x' and x'_other of D(Qbar(.|x) || Q(.|x', x'_other)).

    The second argument ranges over every mixture of channel rows with the
    confirming symbol x' fixed; KL is convex in its second argument so the
    maximum sits at a pure row, which is what is enumerated here.
    """
    rows = effective_channel(ch, user, other_input).rows
    view = ch.user_view(user)
    cand = view.reshape(-1, ch.y_size)
    return float(kl_rows(rows, cand).max())


def d_single_user(ch: ChannelModel, user: int) -> float:
    """max over x, x' and a common x_other of D(Q(.|x, x_other) || Q(.|x', x_other)).

    The largest divergence the user's own symbol can produce when the other
    user's symbol is the same under both hypotheses; equals
    max over point masses pi of max_x d_bar_j(ch, user, x, pi).
    """
    view = ch.user_view(user)
    best = 0.0
    for o in range(view.shape[1]):
        best = max(best, float(kl_rows(view[:, o], view[:, o]).max()))
    return best


def bsc(p: float) -> np.ndarray:
    return np.array([[1 - p, p], [p, 1 - p]], dtype=float)


def build_additive_mod_m(m: int, p: float) -> ChannelModel:
    """Y = X1 + X2 + N (mod m) with noise row (1-(m-1)p, p, ..., p)."""
    if int(m) != m or m < 2:
        raise InvalidNoise(f"m must be an integer >= 2, got {m}")
    m = int(m)
    if not (0 <= p <= 1.0 / m + 1e-15):
        raise InvalidNoise(f"p={p} outside [0, 1/{m}]")
    q = np.full((m, m, m), p, dtype=float)
    for a in range(m):
        for b in range(m):
            q[a, b, (a + b) % m] = 1 - (m - 1) * p
    return validate_channel(q)


def build_product(k1, k2) -> ChannelModel:
    """MAC with Q((y1,y2)|x1,x2) = K1(y1|x1) K2(y2|x2); y index is y1*|Y2| + y2."""
    a = np.asarray(k1, dtype=float)
    b = np.asarray(k2, dtype=float)
    for k in (a, b):
        if k.ndim != 2:
            raise LengthMismatch("point-to-point kernels must be matrices")
        if np.any(k < 0):
            raise NegativeEntry("negative kernel entry")
        if np.any(np.abs(k.sum(axis=1) - 1) > ROW_TOL):
            raise NonStochasticRow("kernel row does not sum to 1")
    q = np.einsum("ac,bd->abcd", a, b).reshape(a.shape[0], b.shape[0], a.shape[1] * b.shape[1])
    return validate_channel(q)
