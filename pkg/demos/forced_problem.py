"""Solve omega d_phi b + (zeta + a0) d_x b + f = c for b periodic and c constant."""
import numpy as np

from tamekam import fourier as fr
from tamekam import kam
from tamekam import transport as tp
from tamekam.fourier import FourierField

golden = (1 + 5 ** 0.5) / 2
c = kam.SchemeConstants(N=2)

# without a0 the answer is explicit: b = -sin(phi - x)/(omega - zeta), c = 0
free = tp.TransportOperator(1, 1, [golden], [1.0], FourierField.zeros(2, 1, 1))
f = FourierField.trig(2, 1, [("cos", (1, -1), [1.0])])
sol = tp.forced_solve(free, f, tp.reduce(free, c), c)
print(f"free: b_(1,-1) = {sol.b.mode((1, -1))[0]:.6f}, expected {-1 / (2j * (golden - 1)):.6f}")

a0 = FourierField.trig(2, 1, [("cos", (1, 1), [1e-3])])
op = tp.TransportOperator(1, 1, [golden], [1.0], a0)
f = FourierField.trig(2, 1, [("cos", (1, -1), [1.0]), ("sin", (0, 1), [0.5]), ("cos", (1, 1), [0.3])])
sol = tp.forced_solve(op, f, tp.reduce(op, c), c)
print(f"perturbed: c = {sol.c[0]:.3e}, residual {sol.residual:.1e}, "
      f"|c|/||f||_s0 = {abs(sol.c[0]) / fr.sobolev_norm(f, c.s0):.1e}")
