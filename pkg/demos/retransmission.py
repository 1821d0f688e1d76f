"""Monte-Carlo run of a three-phase scheme with block retransmission on the
ternary MAC. The overall error probability, the per-block rejection rate q and
the per-block undetected-error rate satisfy Pe = Peb / (1 - q), and the mean
number of blocks is 1 / (1 - q). Here q and Peb come from the first block of
each trial, so the two sides are estimated separately.

Run: python3 demos/retransmission.py
"""
from macfb.reference import ternary_scheme
from macfb.vlcsim import run_scheme

for n, m in ((18, 8), (24, 16)):
    ch, cfg = ternary_scheme(n=n, m=m)
    r = run_scheme(ch, cfg, 50_000, seed=1)
    q, eb = r.q_first, r.p_eb_first
    print(f"n={n:2d} M={m:2d}  Pe={r.pe:.4f}  q={q:.4f}  Peb={eb:.4f}  "
          f"Peb/(1-q)={eb / (1 - q):.4f}  E[blocks]={r.mean_blocks:.4f}  1/(1-q)={1 / (1 - q):.4f}")
