"""Tame and Lipschitz audits: measured constants in place of asymptotic ones."""
import numpy as np

from tamekam import kam
from tamekam import verify as vf
from tamekam.fourier import FourierField

golden = (1 + 5 ** 0.5) / 2
xi = np.array([1.0, golden])
shape = FourierField.trig(2, 1, [("sin", (1, 1), [1.0, 0.0]), ("cos", (1, 0), [0.0, 1.0])])
c = kam.SchemeConstants(N=2)

tame = vf.tame_audit(xi, shape, c, eps_list=(1e-3, 1e-4, 1e-5))
print("||beta||_s gamma / ||f0||_(s+2tau+4), rows eps, columns s")
for eps in (1e-3, 1e-4, 1e-5):
    vals = [r["ratio"] for r in tame["rows"] if r["eps"] == eps]
    print(f"  {eps:.0e}  " + "  ".join(f"{v:.2e}" for v in vals))
print(f"largest spread across eps: {tame['max_stability']:.4f}")

base = 1e-3 * shape
pert = FourierField.trig(2, 1, [("cos", (0, 1), [1.0, 0.0])]).resize(base.K_box)
for amp in (1e-6, 1e-7, 1e-8):
    r = vf.lipschitz_audit(xi, base, base + amp * pert, c)
    print(f"amp {amp:.0e}: C = {r['C']:.4e}, |d alpha| = {r['delta_alpha']:.1e}, "
          f"2|d<f0>| = {2 * r['delta_mean']:.1e}")
