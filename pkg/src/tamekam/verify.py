"""
Independent oracles: RK4 flows of X = alpha + f(theta), rotation vectors,
the trajectory form of the conjugacy, and tame / Lipschitz audits.

The flow integrator only evaluates the trigonometric sum
f(theta) = c_0 + sum_{k in half box} 2 Re(c_k e^{ik.theta}) mode by mode;
it does not touch transforms, compositions or inverses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import fourier as fr
from . import kam
from .diffeo import VectorFieldOnTorus
from .fourier import FourierField


@dataclass
class FlowTrace:
    theta0: np.ndarray
    times: np.ndarray
    trajectory: np.ndarray  # (n_samples, P, N), unwrapped
    dt: float
    n_steps: int


def _half_modes(f: FourierField):
    """Mode list (ks, re, im) over k >= 0 lexicographically, weights folded in."""
    ks, vals = f.nonzero_modes()
    keep = [i for i, k in enumerate(ks) if tuple(k) >= (0,) * f.N]
    ks = ks[keep].astype(float)
    vals = vals[keep]
    w = np.where(np.all(ks == 0, axis=1), 1.0, 2.0)[:, None]
    vals = vals * w
    return (np.ascontiguousarray(ks), np.ascontiguousarray(vals.real),
            np.ascontiguousarray(vals.imag))


@numba.njit(cache=True)
def _field(theta, alpha, ks, cr, ci, out):
    N = theta.shape[0]
    for i in range(N):
        out[i] = alpha[i]
    for q in range(ks.shape[0]):
        ph = 0.0
        for j in range(N):
            ph += ks[q, j] * theta[j]
        c = np.cos(ph)
        s = np.sin(ph)
        for i in range(N):
            out[i] += cr[q, i] * c - ci[q, i] * s


@numba.njit(cache=True)
def _rk4(theta0, alpha, ks, cr, ci, dt, n_steps, stride):
    P, N = theta0.shape
    n_out = n_steps // stride + 1
    traj = np.empty((n_out, P, N))
    k1 = np.empty(N)
    k2 = np.empty(N)
    k3 = np.empty(N)
    k4 = np.empty(N)
    tmp = np.empty(N)
    for p in range(P):
        th = theta0[p].copy()
        traj[0, p] = th
        for n in range(1, n_steps + 1):
            _field(th, alpha, ks, cr, ci, k1)
            for i in range(N):
                tmp[i] = th[i] + 0.5 * dt * k1[i]
            _field(tmp, alpha, ks, cr, ci, k2)
            for i in range(N):
                tmp[i] = th[i] + 0.5 * dt * k2[i]
            _field(tmp, alpha, ks, cr, ci, k3)
            for i in range(N):
                tmp[i] = th[i] + dt * k3[i]
            _field(tmp, alpha, ks, cr, ci, k4)
            for i in range(N):
                th[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if n % stride == 0:
                traj[n // stride, p] = th
    return traj


def flow(X: VectorFieldOnTorus, theta0, T: float, dt: float, sample_every: int = 1) -> FlowTrace:
    """RK4 for d theta/dt = alpha + f(theta), integrated in R^N (no wrapping).

    Negative T integrates backward.  theta0 may hold several starting points.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    th0 = np.atleast_2d(np.asarray(theta0, dtype=float))
    n_steps = int(round(abs(T) / dt))
    h = np.sign(T) * abs(T) / n_steps if n_steps > 0 else 0.0
    stride = max(1, int(sample_every))
    ks, cr, ci = _half_modes(X.f)
    traj = _rk4(th0, X.alpha, ks, cr, ci, float(h), n_steps, stride)
    if not np.all(np.isfinite(traj)):
        raise FloatingPointError("non-finite values in flow")
    times = np.arange(traj.shape[0]) * stride * h
    return FlowTrace(th0, times, traj, float(h), n_steps)


def rotation_vector(X: VectorFieldOnTorus, theta0, T: float = 1e4, dt: float = 1e-2) -> np.ndarray:
    """(theta(T) - theta0)/T; one row per starting point if several are given."""
    tr = flow(X, theta0, T, dt, sample_every=max(1, int(round(T / dt))))
    rv = (tr.trajectory[-1] - tr.trajectory[0]) / T
    return rv[0] if np.ndim(theta0) == 1 else rv


def torus_distance(a, b) -> np.ndarray:
    d = np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2 * np.pi) - np.pi
    return np.linalg.norm(d, axis=-1)


def conjugacy_flow_check(result: kam.StraighteningResult, X0: VectorFieldOnTorus, theta0,
                         T: float = 100.0, dt: float = 1e-2, n_samples: int = 200) -> float:
    """sup_t dist(Psi(theta(t)), Psi(theta0) + alpha_inf t) along an X0 trajectory.

    Psi_* X0 = alpha_inf means Psi carries X0 trajectories to straight lines.
    """
    if result.status != "converged":
        raise ValueError("conjugacy check needs a converged result")
    th0 = np.atleast_2d(np.asarray(theta0, dtype=float))
    n_steps = int(round(T / dt))
    stride = max(1, n_steps // n_samples)
    tr = flow(X0, th0, T, dt, sample_every=stride)
    beta = result.beta
    dev = 0.0
    start = th0 + fr.evaluate_at(beta, th0)
    for t, pts in zip(tr.times, tr.trajectory):
        img = pts + fr.evaluate_at(beta, pts)
        line = start + result.alpha_inf[None, :] * t
        dev = max(dev, float(np.max(torus_distance(img, line))))
    return dev


# ------------------------------------------------------------------- audits
def tame_audit(xi, shape: FourierField, constants: kam.SchemeConstants,
               eps_list=(1e-3, 1e-4, 1e-5), s_range=None, nu=None) -> dict:
    """Ratios ||beta||_s gamma / ||eps f||_{s+2tau+4} over an amplitude ladder."""
    c = constants
    if s_range is None:
        s_range = range(int(c.s0), int(c.s0) + 7)
    s_range = list(s_range)
    loss = 2 * c.tau + 4
    rows = []
    partial = False
    for eps in eps_list:
        f0 = eps * shape
        try:
            res = kam.kam_iterate(xi, f0, c, nu=nu, final_check=False)
        except kam.DivergenceError:
            res = None
        if res is None or res.status != "converged":
            partial = True
            continue
        for s in s_range:
            den = fr.sobolev_norm(f0, s + loss)
            if den == 0:
                continue
            rows.append({"eps": eps, "s": s,
                         "ratio": fr.sobolev_norm(res.beta, s) * c.gamma / den})
    by_s = {}
    for r in rows:
        by_s.setdefault(r["s"], []).append(r["ratio"])
    stability = {s: (max(v) / min(v) if min(v) > 0 else float("inf")) for s, v in by_s.items()}
    return {
        "rows": rows,
        "max_ratio": max((r["ratio"] for r in rows), default=0.0),
        "stability": stability,
        "max_stability": max(stability.values(), default=1.0),
        "partial": partial,
    }


def lipschitz_audit(xi, f0_a: FourierField, f0_b: FourierField,
                    constants: kam.SchemeConstants, nu=None, slack: float = 1e-9) -> dict:
    """Paired runs at the same xi: compare |d alpha| and ||d beta||_{s0-1} with the data change."""
    c = constants
    ra = kam.kam_iterate(xi, f0_a, c, nu=nu, final_check=False)
    rb = kam.kam_iterate(xi, f0_b, c, nu=nu, final_check=False)
    if ra.status != "converged" or rb.status != "converged":
        return {"comparable": False, "reason": "not comparable at this xi"}
    dalpha = float(np.linalg.norm(ra.alpha_inf - rb.alpha_inf))
    dmean = float(np.linalg.norm(fr.average(f0_a) - fr.average(f0_b)))
    dbeta = fr.sobolev_norm(ra.beta - rb.beta, c.s0 - 1)
    df0 = fr.sobolev_norm(f0_a - f0_b, c.s0 + c.b)
    C = dbeta * c.gamma / df0 if df0 > 0 else 0.0
    return {
        "comparable": True,
        "delta_alpha": dalpha,
        "delta_mean": dmean,
        "alpha_ok": dalpha <= 2 * dmean + slack,
        "delta_beta": dbeta,
        "delta_f0": df0,
        "C": C,
    }
