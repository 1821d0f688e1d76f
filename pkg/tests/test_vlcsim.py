import math
import warnings

import numpy as np
import pytest

from macfb.bounds import d_lb
from macfb.channel import build_product
from macfb.errors import ConfigInfeasible, InputError
from macfb.hypotest import ConfirmationDesign, exact_errors
from macfb.reference import ternary_scheme
from macfb.vlcsim import SchemeConfig, gamma_grid, run_scheme, sweep_gamma


def confirm_only(ch, n, lam, force_theta=None):
    _, pz = d_lb(ch)
    d = ConfirmationDesign(1, (0, 1), [1 / 3] * 3, pz.ravel().tolist(), 0, n, lam)
    return d, SchemeConfig(n, (0, 0, 1), 1, 1, d, force_theta=force_theta, max_blocks=1)


def test_lengths_floor_with_remainder_to_data_phase():
    _, cfg = ternary_scheme()
    assert cfg.lengths == (12, 3, 3)
    _, cfg = ternary_scheme(n=17, gammas=(0.5, 0.25, 0.25))
    assert cfg.lengths == (9, 4, 4)


def test_config_validation():
    ch, cfg = ternary_scheme()
    with pytest.raises(InputError):
        SchemeConfig(18, (0.5, 0.2, 0.2), 8, 8, cfg.design)
    with pytest.raises(InputError):
        SchemeConfig(30, (0.6, 0.2, 0.2), 8, 8, cfg.design)
    with pytest.raises(InputError):
        SchemeConfig(18, (0.6, 0.2, 0.2), 8, 8, cfg.design, m_hybrid=3)
    with pytest.raises(InputError):
        SchemeConfig(18, (0.8, 0.0, 0.2), 8, 8, cfg.design, m_hybrid=2)


def test_config_round_trip():
    _, cfg = ternary_scheme()
    assert SchemeConfig.from_dict(cfg.to_dict()) == cfg


def test_renewal_identity_ternary():
    ch, cfg = ternary_scheme()
    r = run_scheme(ch, cfg, 30_000, seed=2)
    assert abs(r.renewal_residual()) <= 4 * r.renewal_sigma()
    assert abs(r.blocks_residual()) <= 4 * r.blocks_sigma()
    assert r.capped == 0
    assert r.pe_ci[0] <= r.pe <= r.pe_ci[1]
    assert r.mean_length == pytest.approx(cfg.n * r.mean_blocks)
    # pooled counts satisfy the identity exactly, first blocks only in law
    assert r.pe * (1 - r.q) == pytest.approx(r.p_eb, rel=1e-12)
    assert abs(r.q_first - r.q) <= 4 * math.sqrt(r.q * (1 - r.q) / r.trials)


def test_noiseless_channel_never_errs():
    ch = build_product(np.eye(2), np.eye(2))
    d = ConfirmationDesign(1, (0, 1), [0.5, 0.5], None, 2, 0, 0.0)
    cfg = SchemeConfig(8, (0.75, 0.25, 0.0), 4, 4, d)
    r = run_scheme(ch, cfg, 5_000, seed=1)
    assert (r.pe, r.q) == (0.0, 0.0)
    assert r.mean_length == cfg.n
    assert r.exponent is None


def test_pure_confirmation_matches_exact_errors(ternary):
    """With one message per user the scheme cannot err, so the confirmation
    errors are read off by forcing the correctness flags."""
    d, cfg = confirm_only(ternary, 6, 1.0)
    exact = exact_errors(ternary, d)
    trials = 200_000
    r00 = run_scheme(ternary, confirm_only(ternary, 6, 1.0, (0, 0))[1], trials, seed=3)
    sigma = math.sqrt(exact.alpha * (1 - exact.alpha) / trials)
    assert abs(r00.q - exact.alpha) <= 4 * sigma
    assert r00.p_eb == 0
    for th in ((1, 0), (0, 1), (1, 1)):
        r = run_scheme(ternary, confirm_only(ternary, 6, 1.0, th)[1], trials, seed=4)
        beta = exact.beta_by_alternative[th]
        assert abs(r.p_eb - beta) <= 4 * math.sqrt(beta * (1 - beta) / trials) + 1e-12
        assert r.q == pytest.approx(1 - r.p_eb)
    plain = SchemeConfig(**{**cfg.__dict__, "max_blocks": 50})
    r = run_scheme(ternary, plain, 1_000, seed=5)
    assert r.pe == 0 and r.p_eb == 0


def test_gamma2_zero_row_reproduces_two_phase(ternary):
    ch, base = ternary_scheme()
    two = SchemeConfig(18, (0.6, 0.0, 0.4), 8, 8, base.design)
    direct = run_scheme(ch, two, 4_000, seed=6)
    rows = sweep_gamma(ch, base, [(0.6, 0.0, 0.4)], 4_000, seed=6)
    assert len(rows) == 1
    assert rows[0]["pe"] == direct.pe and rows[0]["q"] == direct.q


def test_sweep_skips_no_confirmation_and_bounded_exponent():
    ch, base = ternary_scheme(n=12, m=4, m_hybrid=2)
    grid = gamma_grid(0.25)
    assert (1.0, 0.0, 0.0) in grid and len(grid) == 15
    rows = sweep_gamma(ch, base, grid, 2_000, seed=7)
    assert all(r["n2"] + r["n3"] > 0 for r in rows)
    exps = [r["exponent"] for r in rows if r["exponent"] is not None]
    assert exps and max(exps) <= 2.1 * 1.5


def test_longer_blocks_at_fixed_rate_lower_error():
    ch, short = ternary_scheme(n=18, m=8)
    _, long = ternary_scheme(n=24, m=16, m_hybrid=2)
    assert math.log2(8) / 18 == pytest.approx(math.log2(16) / 24)
    a = run_scheme(ch, short, 100_000, seed=8)
    b = run_scheme(ch, long, 100_000, seed=8)
    assert b.pe < a.pe


def test_determinism_across_workers(ternary):
    ch, cfg = ternary_scheme()
    a = run_scheme(ch, cfg, 10_000, seed=9, workers=1)
    b = run_scheme(ch, cfg, 10_000, seed=9, workers=4)
    assert a == b
    c = run_scheme(ch, cfg, 10_000, seed=10, workers=1)
    assert c != a


def test_infeasible_rate_warns():
    ch, _ = ternary_scheme()
    _, cfg = ternary_scheme(n=4, m=64, gammas=(0.5, 0.25, 0.25), m_hybrid=1)
    with pytest.warns(ConfigInfeasible):
        run_scheme(ch, cfg, 10, seed=0)


def test_retransmission_cap_counts_errors(ternary):
    d, _ = confirm_only(ternary, 2, 1e6)
    cfg = SchemeConfig(2, (0, 0, 1), 1, 1, d, max_blocks=3)
    r = run_scheme(ternary, cfg, 100, seed=0)
    assert r.capped == 100 and r.pe == 1 and r.mean_blocks == 3
