"""Exhaustive check of the entropy-drift statements on random tiny feedback
codes: every posterior on every output path is enumerated, so each inequality
is tested exactly rather than sampled.

Run: python3 demos/drift_lab.py
"""
import math
from collections import Counter

from macfb.driftlab import corpus, run_checks

failures = Counter()
log_phase = 0
mus = Counter()
for ch, code in corpus(40, seed=1):
    reports = run_checks(ch, code, eps=0.3)
    log_phase += reports["log_drift"].checked > 0
    mus[reports["pruned_submartingale"].info["mu"]] += 1
    for name, rep in reports.items():
        failures[name] += not rep.passed

print("checks failed per kind:", dict(failures))
print(f"pairs whose entropy dipped below 0.3 bits: {log_phase} of 40")
print("passing exponential-correction parameter:",
      {f"2^{round(math.log2(m))}": k for m, k in sorted(mus.items())})
