"""Two independent BSCs sharing a receiver. With unequal loads the user that
finishes its data early can start confirming while the other keeps sending,
and that hybrid phase buys a strictly larger exponent than any two-phase
scheme.

Run: python3 demos/parallel_three_phase.py
"""
from macfb.bounds import closed_form_parallel, lower_three_phase, lower_two_phase, upper_three_phase
from macfb.infotheory import make_grid
from macfb.reference import parallel_bscs

ch, d1, c1, d2, c2 = parallel_bscs(0.1, 0.2)
g = make_grid(ch)
print(f"BSC(0.1): C = {c1:.4f}, D = {d1:.4f}    BSC(0.2): C = {c2:.4f}, D = {d2:.4f}\n")
print("R1/C1  R2/C2   two-phase  three-phase  upper  closed form  gamma2")
for f1, f2 in ((0.2, 0.2), (0.5, 0.5), (0.8, 0.2), (0.2, 0.8)):
    r = (f1 * c1, f2 * c2)
    best = lower_three_phase(ch, r, g)
    print(f"{f1:5.1f}  {f2:5.1f}   {lower_two_phase(ch, r, g):9.4f}  {best.value:11.4f}  "
          f"{upper_three_phase(ch, r, g):5.4f}  {closed_form_parallel(d1, c1, d2, c2, r):11.4f}  "
          f"{best.gamma2:6.2f}")
