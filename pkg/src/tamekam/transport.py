"""
Quasi-periodic transport  d_t u + (zeta + a0(omega t, x)) . d_x u = 0  on T^d.

The characteristic field omega.d_phi + (zeta + a0).d_x on T^(nu+d) is
straightened with the KAM scheme started from xi = (omega, zeta) and
f0 = (0, a0).  The change of variables Psi(phi, x) = (phi, x + beta(phi, x))
then turns the equation into the constant-coefficient one with drift m_inf:
u(t, x) = v(t, x + beta(omega t, x)) with d_t v + m_inf . d_y v = 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fourier as fr
from . import diffeo as df
from . import kam
from . import verify
from .diffeo import TorusDiffeo, VectorFieldOnTorus
from .fourier import FourierField

STRUCTURE_TOL = 1e-12


class StructureError(RuntimeError):
    pass


@dataclass
class TransportOperator:
    nu: int
    d: int
    omega: np.ndarray
    zeta: np.ndarray
    a0: FourierField  # T^(nu+d) -> R^d

    def __post_init__(self):
        self.omega = np.asarray(self.omega, float).reshape(-1)
        self.zeta = np.asarray(self.zeta, float).reshape(-1)
        if self.omega.size != self.nu or self.zeta.size != self.d:
            raise ValueError("omega/zeta sizes do not match (nu, d)")
        if self.a0.N != self.nu + self.d or self.a0.m != self.d:
            raise ValueError("a0 must map T^(nu+d) to R^d")

    @property
    def xi(self) -> np.ndarray:
        return np.concatenate([self.omega, self.zeta])

    def f0(self, K_box: int | None = None) -> FourierField:
        a = self.a0 if K_box is None else self.a0.resize(K_box)
        z = FourierField.zeros(self.nu + self.d, self.nu, a.K_box)
        return FourierField.stack([z, a])

    def field(self) -> VectorFieldOnTorus:
        return VectorFieldOnTorus(self.xi, self.f0())


@dataclass
class ReducedTransport:
    m_inf: np.ndarray
    beta: FourierField  # T^(nu+d) -> R^d
    op: TransportOperator
    result: kam.StraighteningResult

    @property
    def psi(self) -> TorusDiffeo:
        return self.result.psi

    def reduction_residual(self) -> float:
        """sup |omega.d_phi beta + (zeta + a0).(1 + d_x beta) - m_inf| on a grid."""
        r = self.result
        return kam.conjugacy_residual(r.xi, self.op.f0(), r.beta, r.alpha_inf)


def reduce(op: TransportOperator, constants: kam.SchemeConstants):
    """Straighten the characteristic field; returns ReducedTransport or the excluded result."""
    nu = op.nu

    def check(state: kam.KamState):
        # sup norm is bounded by the coefficient l1 norm
        for name, u in (("f", state.f), ("h", state.h)):
            bound = float(np.sum(np.abs(u.coeffs[:nu])))
            if bound > STRUCTURE_TOL:
                raise StructureError(f"{name}_{state.n} has phi-components of size {bound:.3e}")

    res = kam.kam_iterate(op.xi, op.f0(), constants, nu=nu, callback=check)
    if res.status != "converged":
        return res
    alpha = res.alpha_inf
    if np.max(np.abs(alpha[:nu] - op.omega)) > STRUCTURE_TOL:
        raise StructureError("the phi-frequency moved during the iteration")
    beta = FourierField(res.beta.coeffs[nu:], hermitize=False)
    return ReducedTransport(alpha[nu:].copy(), beta, op, res)


# ---------------------------------------------------------- characteristics
@dataclass
class NormHistory:
    t: np.ndarray
    s_list: list
    norms: np.ndarray  # (len(t), len(s_list))

    def slope(self, i: int = 0) -> float:
        return float(np.polyfit(self.t, self.norms[:, i], 1)[0])

    def rows(self):
        for a, t in enumerate(self.t):
            for b, s in enumerate(self.s_list):
                yield float(t), s, float(self.norms[a, b])


def default_step(zeta) -> float:
    return min(2 * np.pi / (8 * float(np.max(np.abs(zeta))) + 1), 0.01)


def foot_points(op: TransportOperator, t: float, x, h: float | None = None) -> np.ndarray:
    """X(0) for characteristics with X(t) = x, integrated backward with RK4."""
    h = default_step(op.zeta) if h is None else h
    x = np.atleast_2d(np.asarray(x, float))
    if t == 0:
        return x.copy()
    start = np.concatenate([np.broadcast_to(op.omega * t, (x.shape[0], op.nu)), x], axis=1)
    n = max(1, int(np.ceil(t / h)))
    tr = verify.flow(op.field(), start, -t, t / n, sample_every=n)
    return tr.trajectory[-1][:, op.nu:]


def _sobolev_from_samples(vals: np.ndarray, s_list) -> list:
    M = vals.shape[1]
    u = fr.analyze(fr.GridSamples(vals), M // 2 - 1)
    return [fr.sobolev_norm(u, s) for s in s_list]


def evolve_characteristics(op: TransportOperator, u0: FourierField, t_grid, s_list,
                           M: int = 64, h: float | None = None,
                           reduced: ReducedTransport | None = None):
    """Norms of u(t) (and of v(t) = u(t) o Psi_t^{-1} when a reduction is given)."""
    if u0.N != op.d or u0.m != 1:
        raise ValueError("u0 must be a scalar field on T^d")
    h = default_step(op.zeta) if h is None else h
    if h <= 1e-12:
        raise FloatingPointError("step size underflow")
    t_grid = np.asarray(t_grid, float)
    nodes = fr.grid_nodes((M,) * op.d)
    inv = None
    if reduced is not None:
        N = op.nu + op.d
        full = FourierField.stack([FourierField.zeros(N, op.nu, reduced.beta.K_box), reduced.beta])
        inv = df.invert(TorusDiffeo(full), K_out=full.K_box).inverse
    un, vn = [], []
    for t in t_grid:
        feet = foot_points(op, t, nodes, h)
        vals = fr.evaluate_at(u0, feet).T.reshape((1,) + (M,) * op.d)
        un.append(_sobolev_from_samples(vals, s_list))
        if inv is not None:
            # v(t, y) = u(t, x) at the point (omega t, x) = Psi^{-1}(omega t, y)
            pts = np.concatenate([np.broadcast_to(op.omega * t, (nodes.shape[0], op.nu)), nodes], axis=1)
            x = pts[:, op.nu:] + fr.evaluate_at(inv, pts)[:, op.nu:]
            feet = foot_points(op, t, x, h)
            vals = fr.evaluate_at(u0, feet).T.reshape((1,) + (M,) * op.d)
            vn.append(_sobolev_from_samples(vals, s_list))
    hist = NormHistory(t_grid, list(s_list), np.array(un))
    if inv is None:
        return hist
    return hist, NormHistory(t_grid, list(s_list), np.array(vn))


# ------------------------------------------------------------ forced problem
@dataclass
class ForcedSolution:
    b: FourierField
    c: np.ndarray
    residual: float


def forced_solve(op: TransportOperator, f: FourierField, reduced: ReducedTransport,
                 constants: kam.SchemeConstants, K_out: int | None = None) -> ForcedSolution:
    """Solve omega.d_phi b + (zeta + a0).d_x b + f = c with c constant.

    With Psi = Id + (0, beta) one has L(w o Psi) = (L_inf w) o Psi for
    L_inf = omega.d_phi + m_inf.d_x, so c = <f o Psi^{-1}> and b = w o Psi
    where L_inf w = c - f o Psi^{-1}.
    """
    nu, d = op.nu, op.d
    N = nu + d
    if f.N != N or f.m != 1:
        raise ValueError("f must be a scalar field on T^(nu+d)")
    c_ = constants
    K = max(f.K_box, reduced.beta.K_box) if K_out is None else K_out
    full = FourierField.stack([FourierField.zeros(N, nu, reduced.beta.K_box), reduced.beta])
    psi = df.invert(TorusDiffeo(full), K_out=full.K_box, alias_tol=c_.alias_tol)
    fp = df.compose_function(f, psi, K_out=K, use_inverse=True, alias_tol=c_.alias_tol,
                             chop=c_.chop_tol)
    c = fr.average(fp)
    g = FourierField.constant(c, N, 0) - fp
    freq = np.concatenate([op.omega, reduced.m_inf])
    div = kam._box_divisors(freq, N, g.K_box)
    w8 = kam._box_weights(N, g.K_box, nu)
    nz = fr.l1_index(N, g.K_box) > 0
    small = nz & (np.abs(div) * w8 ** c_.tau <= 2 * c_.gamma)
    if np.any(small):
        k = tuple(int(x) - g.K_box for x in np.argwhere(small)[0])
        raise kam.SmallDivisorError(f"divisor below 2 gamma / <l,j>^tau at (l,j)={k}", k)
    w = FourierField(np.where(nz[None], g.coeffs / np.where(nz, 1j * div, 1.0)[None], 0.0),
                     hermitize=False)
    b = df.compose_function(w, psi, K_out=K, alias_tol=c_.alias_tol, chop=c_.chop_tol)
    return ForcedSolution(b, c, forced_residual(op, b, f, c))


def forced_residual(op: TransportOperator, b: FourierField, f: FourierField, c) -> float:
    """sup over a grid of |omega.d_phi b + (zeta + a0).d_x b + f - c|."""
    nu, d = op.nu, op.d
    N = nu + d
    M = 2 * (op.a0.K_box + max(b.K_box, f.K_box)) + 2
    r = fr._synth_values(f.coeffs, M)[0] - np.asarray(c, float)[0]
    for j in range(N):
        db = fr._synth_values(fr.differentiate(b, j).coeffs, M)[0]
        if j < nu:
            r = r + op.omega[j] * db
        else:
            a = op.zeta[j - nu] + fr._synth_values(op.a0.component(j - nu).coeffs, M)[0]
            r = r + a * db
    return float(np.max(np.abs(r)))
