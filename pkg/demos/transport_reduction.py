"""Quasi-periodic transport u_t + (zeta + a0(omega t, x)) u_x = 0 on T^1.

After the change of variables the equation is a constant-coefficient
transport, so Sobolev norms of the solution stay bounded and norms of
the reduced unknown are exactly conserved.
"""
import numpy as np

from tamekam import kam
from tamekam import transport as tp
from tamekam.fourier import FourierField

golden = (1 + 5 ** 0.5) / 2
a0 = FourierField.trig(2, 1, [("cos", (1, 1), [1e-3])])
op = tp.TransportOperator(nu=1, d=1, omega=[1.0], zeta=[golden], a0=a0)
red = tp.reduce(op, kam.SchemeConstants(N=2))
print(f"m_inf - zeta = {red.m_inf[0] - golden:.4e}, reduction residual {red.reduction_residual():.1e}")

u0 = FourierField.trig(1, 2, [("cos", (1,), [1.0]), ("sin", (2,), [0.5])])
t = np.linspace(0.0, 100.0, 11)
hu, hv = tp.evolve_characteristics(op, u0, t, [0, 1, 2], M=64, reduced=red)
print("   t     ||u||_0    ||u||_2    ||v||_2")
for i in range(len(t)):
    print(f"{t[i]:5.0f}  {hu.norms[i, 0]:.6f}  {hu.norms[i, 2]:.6f}  {hv.norms[i, 2]:.12f}")
print(f"fitted slope of ||u||_2: {hu.slope(2):.1e}")
