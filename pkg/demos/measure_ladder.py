"""Excluded parameter measure on [1,2]^2 and its scaling with gamma.

The bundled golden_box fixture runs the full scheme on 1681 points per
gamma (about 4 min).  Here a short real sweep shows the outcomes, and the
scaling is read off the cheap frozen filter (alpha_inf replaced by xi,
which moves by ~1e-8 for this f0) on a larger sample.

Points are Halton nodes rotated by a fixed irrational vector: plain
Halton nodes like (3/2, 4/3) are exactly resonant at every gamma.
"""
import numpy as np

from tamekam import kam
from tamekam import params as pm
from tamekam.fourier import FourierField

golden = (1 + 5 ** 0.5) / 2
box = [[1.0, 2.0], [1.0, 2.0]]
shift = [golden - 1, 2 ** 0.5 - 1]
f0 = FourierField.trig(2, 1, [("sin", (1, 1), [1e-4, 0.0]), ("cos", (1, 0), [0.0, 1e-4])])
c = kam.SchemeConstants(N=2, gamma=4e-2, K0=4, K_box=8)

small = pm.sweep(pm.ParamGrid.halton(box, 300, shift=shift), pm.ConstantBuilder(f0), c)
print("full scheme, 300 points, gamma=4e-2")
for xi, code, alpha, step in small.rows():
    if code != pm.CONVERGED:
        m, k = kam.diophantine_margin(xi, 32, 4)
        print(f"  xi={np.round(xi, 4)}  {pm.OUTCOME_NAMES[code]:<14} step {step}  worst k={k}")
conv = small.outcome == pm.CONVERGED
print(f"  max |alpha_inf - xi| over converged points: {np.max(np.abs(small.alpha_inf[conv] - small.samples[conv])):.1e}")

big = pm.ParamGrid.halton(box, 8000, shift=shift)
gammas = [4e-2, 2e-2, 1e-2, 5e-3]
frac = []
for gam in gammas:
    cg = kam.SchemeConstants(N=2, gamma=gam)
    frac.append(np.mean([not kam.check_final_set(x, cg, 32) for x in big.samples]))
print("frozen filter, 8000 points")
for gam, p in zip(gammas, frac):
    print(f"  gamma={gam:.0e}  excluded fraction {p:.5f}  fraction/gamma {p / gam:.3f}")
print(f"log-log slope {pm.loglog_slope(gammas, frac):.2f}")
