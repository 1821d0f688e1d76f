"""Exact type-I/type-II errors of a repetition confirmation test on the
ternary MAC, by convolving log-likelihood ratios on a fine lattice.

A threshold that grows like -0.05 n keeps alpha tiny, and beta then decays at
the large-deviation rate of the alternative's LLR at -0.05 bits per symbol.
Thresholds just below the divergence trade alpha for a beta slope near 2.1.

Run: python3 demos/confirmation_exponent.py
"""
from macfb.channel import build_additive_mod_m
from macfb.hypotest import ConfirmationDesign, error_curve, exponent_slope

ch = build_additive_mod_m(3, 0.1)
design = ConfirmationDesign(1, (0, 1), [1.0, 0.0, 0.0], None, 50, 0, 0.0)
ns = [50, 100, 150, 200]

for label, per_symbol in (("-0.05", -0.05), ("1.8", 1.8), ("1.9", 1.9), ("2.0", 2.0)):
    curve = error_curve(ch, design, ns, lambda n: per_symbol * n)
    alpha = curve.points[-1][1]
    print(f"lambda = {label:>5} n   slope {exponent_slope(curve):.4f}   alpha(200) {alpha:.3g}")
