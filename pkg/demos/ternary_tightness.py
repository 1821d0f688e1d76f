"""On the additive mod-3 MAC the confirmation divergences from above and below
coincide, so the two-phase lower and upper exponents meet.

Run: python3 demos/ternary_tightness.py
"""
import numpy as np

from macfb.bounds import d_lb, lower_two_phase, upper_two_phase
from macfb.channel import build_additive_mod_m, d_ub
from macfb.reference import additive_exponent

ch = build_additive_mod_m(3, 0.1)
value, pz = d_lb(ch)
print(f"d_lb = {value:.6f}   d_ub = {d_ub(ch):.6f}   closed form = {additive_exponent(3, 0.1):.6f}")

# the max-min confirmation law is a single quadruple: (Z1(0), Z2(0), Z1(1), Z2(1))
print("pz support:", [tuple(int(v) for v in idx) for idx in np.argwhere(pz > 1e-9)])

print("\n  r     lower    upper")
for r in (0.0, 0.1, 0.2, 0.3):
    lb = lower_two_phase(ch, (r, r), refine=True)
    ub = upper_two_phase(ch, (r, r), refine=True)
    print(f"{r:4.1f}  {lb:7.4f}  {ub:7.4f}")
