"""
KAM straightening of a perturbed constant vector field (xi + f0) on T^N.

One step solves the homological equation

    alpha . d_theta g + Pi_K f = <f>,     g_k = -f_k / (i alpha.k),

sets Phi = Id + g and pushes the field forward:

    alpha_+ = alpha + <f>,   f_+ = (Pi_K^perp f + sum_j f_j d_j g) o Phi^{-1}.

The iteration runs this with the truncation schedule K_n = K0^(chi^n) and
accumulates Psi_{n+1} = Phi_{n+1} o Psi_n, so that Psi_* (xi + f0) = alpha_inf.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from . import fourier as fr
from . import diffeo as df
from .fourier import FourierField, AliasingError
from .diffeo import TorusDiffeo, DiffeoError, InversionError


class ConfigError(ValueError):
    pass


class SmallDivisorError(ValueError):
    def __init__(self, msg, k=None):
        super().__init__(msg)
        self.k = k


class SmallnessError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, msg, steps=None):
        super().__init__(msg)
        self.steps = steps or []


@dataclass
class SchemeConstants:
    N: int
    gamma: float = 1e-2
    K0: int = 8
    tau: float | None = None
    s0: float | None = None
    chi: float = 1.5
    mu: float | None = None
    rho: float | None = None
    kappa: float | None = None
    b: float | None = None
    s1: float | None = None
    max_steps: int = 12
    convergence_tol: float = 1e-11
    divergence_guard: float = 10.0
    K_box: int | None = None
    # smallness thresholds: None means report only (see notes on calibration)
    step_delta: float | None = None
    eta_star: float | None = None
    chop_tol: float = 1e-14
    alias_tol: float = fr.ALIAS_TOL
    inverse_tol: float = df.INVERSE_TOL
    residual_tol: float = 1e-8
    K_check: int | None = None

    def __post_init__(self):
        N = self.N
        if self.tau is None:
            self.tau = N + 2
        if self.s0 is None:
            self.s0 = N // 2 + 3
        t, s0 = self.tau, self.s0
        if self.mu is None:
            self.mu = 4 * t + 2 * s0 + 5
        if self.rho is None:
            self.rho = 2 * t + 2 * s0 + 2
        if self.kappa is None:
            self.kappa = 8 * t + 2 * s0 + 5
        if self.b is None:
            self.b = math.floor(self.chi * self.mu + self.kappa + 1) + 1
        if self.s1 is None:
            self.s1 = math.floor(self.chi * self.mu + s0) + 1
        if self.K_box is None:
            self.K_box = 4 * self.K0

    def violations(self) -> list:
        """Failed inequalities among the scheme constraints, as readable strings."""
        N, t, s0, chi = self.N, self.tau, self.s0, self.chi
        checks = [
            (t == N + 2, f"tau = N + 2 (tau={t}, N={N})"),
            (s0 >= N // 2 + 3, f"s0 >= floor(N/2) + 3 (s0={s0}, bound={N // 2 + 3})"),
            (0 < self.gamma < 1, f"0 < gamma < 1 (gamma={self.gamma})"),
            (self.mu > 4 * t + 2 * s0 + 4, f"mu > 4*tau + 2*s0 + 4 (mu={self.mu}, bound={4 * t + 2 * s0 + 4})"),
            (self.rho > 2 * t + 2 * s0 + 1, f"rho > 2*tau + 2*s0 + 1 (rho={self.rho}, bound={2 * t + 2 * s0 + 1})"),
            (self.s1 > chi * self.mu + s0, f"s1 > chi*mu + s0 (s1={self.s1}, bound={chi * self.mu + s0})"),
            (self.kappa > 8 * t + 2 * s0 + 4, f"kappa > 8*tau + 2*s0 + 4 (kappa={self.kappa}, bound={8 * t + 2 * s0 + 4})"),
            (self.b > self.mu * chi + self.kappa + 1, f"b > mu*chi + kappa + 1 (b={self.b}, bound={self.mu * chi + self.kappa + 1})"),
            (self.K0 >= 2, f"K0 >= 2 (K0={self.K0})"),
            (self.K_box >= 1, f"K_box >= 1 (K_box={self.K_box})"),
            (self.max_steps >= 0, f"max_steps >= 0 (max_steps={self.max_steps})"),
        ]
        return [msg for ok, msg in checks if not ok]

    def validate(self) -> "SchemeConstants":
        bad = self.violations()
        if bad:
            raise ConfigError("constraint violated: " + "; ".join(bad))
        return self

    def K_schedule(self, n: int) -> int:
        x = (self.chi ** n) * math.log(self.K0)
        if x > 700:
            return 2 ** 62
        return int(math.ceil(math.exp(x) - 1e-9))

    def effective_K(self, K_n: int) -> int:
        """Truncation actually applied: beyond the box the projector is total."""
        return K_n if K_n < self.K_box else self.N * self.K_box

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- divisors
def _weights(ks: np.ndarray, nu: int | None) -> np.ndarray:
    if nu is None:
        return np.maximum(1, np.abs(ks).sum(axis=1))
    return np.maximum(1, np.maximum(np.abs(ks[:, :nu]).sum(axis=1), np.abs(ks[:, nu:]).sum(axis=1)))


def _half_ball_chunks(N: int, K: int):
    """Nonzero k with |k|_1 <= K and first nonzero entry positive, in chunks."""
    if N == 1:
        yield np.arange(1, K + 1).reshape(-1, 1)
        return
    for k1 in range(0, K + 1):
        R = K - k1
        r = np.arange(-R, R + 1)
        rest = np.stack(np.meshgrid(*([r] * (N - 1)), indexing="ij"), axis=-1).reshape(-1, N - 1)
        rest = rest[np.abs(rest).sum(axis=1) <= R]
        if k1 == 0:
            # keep the lexicographically positive half
            for sub in _half_ball_chunks(N - 1, K):
                yield np.concatenate([np.zeros((len(sub), 1), dtype=int), sub], axis=1)
            continue
        yield np.concatenate([np.full((len(rest), 1), k1), rest], axis=1)


def diophantine_margin(alpha, K: int, tau: float, nu: int | None = None):
    """min over 0 < |k|_1 <= K of |alpha.k| <k>^tau, and the minimizing k."""
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    best, kbest = np.inf, None
    for ks in _half_ball_chunks(alpha.size, int(K)):
        r = np.abs(ks @ alpha) * _weights(ks, nu).astype(float) ** tau
        i = int(np.argmin(r))
        if r[i] < best:
            best, kbest = float(r[i]), tuple(int(x) for x in ks[i])
    return best, kbest


def diophantine_ok(alpha, gamma: float, tau: float, K: int, nu: int | None = None) -> bool:
    """|alpha.k| > gamma / <k>^tau for all 0 < |k|_1 <= K (exhaustive)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    best, _ = diophantine_margin(alpha, K, tau, nu)
    return best > gamma


def check_final_set(alpha_inf, constants: SchemeConstants, K_check: int, nu: int | None = None) -> bool:
    """Membership in the 2 gamma diophantine set truncated at |k|_1 <= K_check."""
    return diophantine_ok(alpha_inf, 2 * constants.gamma, constants.tau, K_check, nu)


def _box_divisors(alpha, N: int, K_box: int):
    axes = fr._index_axes(N, K_box)
    out = 0.0
    for a, ax in zip(alpha, axes):
        out = out + a * ax
    return np.broadcast_to(out, (2 * K_box + 1,) * N)


def _box_weights(N: int, K_box: int, nu: int | None):
    if nu is None:
        return fr.bracket(N, K_box)
    axes = fr._index_axes(N, K_box)
    l = sum(np.abs(a) for a in axes[:nu])
    j = sum(np.abs(a) for a in axes[nu:])
    return np.maximum(1, np.maximum(l, j)).astype(float)


def solve_homological(f: FourierField, alpha, K: int, gamma: float, tau: float,
                      nu: int | None = None) -> FourierField:
    """g_k = -f_k / (i alpha.k) for 0 < |k|_1 <= K, zero elsewhere."""
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    N, Kb = f.N, f.K_box
    if alpha.size != N:
        raise ValueError("alpha has wrong length")
    ad = _box_divisors(alpha, N, Kb)
    l1 = fr.l1_index(N, Kb)
    mask = (l1 <= K) & (l1 > 0)
    w = _box_weights(N, Kb, nu)
    small = mask & (np.abs(ad) * w ** tau <= gamma)
    if np.any(small):
        k = tuple(int(x) - Kb for x in np.argwhere(small)[0])
        raise SmallDivisorError(f"small divisor at k={k}", k)
    div = np.where(mask, 1j * ad, 1.0)
    g = np.where(mask[None], -f.coeffs / div[None], 0.0)
    return FourierField(g, hermitize=False)


def homological_residual(f: FourierField, g: FourierField, alpha, K: int) -> float:
    """||alpha.dg + Pi_K f - <f>||_0."""
    r = fr.project(f, K) - FourierField.constant(fr.average(f), f.N, 0)
    for j, a in enumerate(np.asarray(alpha, float)):
        r = r + a * fr.differentiate(g, j)
    return fr.sobolev_norm(r, 0)


# --------------------------------------------------------------------- step
@dataclass
class KamStep:
    alpha_plus: np.ndarray
    f_plus: FourierField
    g: FourierField
    phi: TorusDiffeo
    diagnostics: dict


def kam_step(alpha, f: FourierField, constants: SchemeConstants, K: int,
             nu: int | None = None) -> KamStep:
    c = constants
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    Kb = max(c.K_box, f.K_box)
    smallness = float(K) ** (2 * c.tau + 2 * c.s0 + 1) * fr.sobolev_norm(f, c.s0) / c.gamma
    if c.step_delta is not None and smallness > c.step_delta:
        raise SmallnessError(f"step smallness {smallness:.3e} exceeds delta={c.step_delta}")
    K_div = min(K, f.N * f.K_box)
    if not diophantine_ok(alpha, c.gamma, c.tau, max(1, K_div), nu):
        raise SmallDivisorError(f"alpha={alpha} fails the diophantine check at K={K_div}")
    g = solve_homological(f, alpha, K, c.gamma, c.tau, nu)
    phi = df.invert(TorusDiffeo(g), tol=c.inverse_tol, K_out=Kb, alias_tol=c.alias_tol,
                    chop=c.chop_tol)
    F = fr.project_complement(f, K).resize(2 * Kb) + df.transport_term(f, g)
    f_plus = df.compose_function(F, phi, K_out=Kb, use_inverse=True, alias_tol=c.alias_tol,
                                 chop=c.chop_tol)
    alpha_plus = alpha + fr.average(f)
    diag = {
        "smallness": smallness,
        "g_c1": phi.c1_norm,
        "inverse_residual": phi.inverse_residual,
        "homological_residual": homological_residual(f, g, alpha, K),
        "norm_s0": fr.sobolev_norm(f_plus, c.s0),
        "norm_s1": fr.sobolev_norm(f_plus, c.s1),
    }
    return KamStep(alpha_plus, f_plus, g, phi, diag)


# ---------------------------------------------------------------- iteration
@dataclass
class KamState:
    n: int
    alpha: np.ndarray
    f: FourierField
    h: FourierField
    K_n: int
    K_eff: int
    delta: dict
    survived: bool = True


@dataclass
class StraighteningResult:
    status: str  # converged | excluded | not_converged
    xi: np.ndarray
    alpha_inf: np.ndarray | None
    psi: TorusDiffeo | None
    steps: list = field(default_factory=list)
    iterations: int = 0
    excluded_step: int | None = None
    residual: float | None = None
    final_set: bool | None = None
    K_check: int | None = None

    @property
    def beta(self) -> FourierField | None:
        return None if self.psi is None else self.psi.h

    def to_dict(self) -> dict:
        return {
            "xi": [float(x) for x in self.xi],
            "status": self.status,
            "alpha_inf": None if self.alpha_inf is None else [float(x) for x in self.alpha_inf],
            "iterations": self.iterations,
            "excluded_step": self.excluded_step,
            "residual": self.residual,
            "final_set": self.final_set,
            "K_check": self.K_check,
            "steps": self.steps,
            "beta": None if self.beta is None else self.beta.to_dict(),
        }


def conjugacy_residual(xi, f0: FourierField, beta: FourierField, alpha_inf) -> float:
    """sup over a grid of |xi + f0 + (xi + f0).d beta - alpha_inf|.

    The grid is fine enough for the product to be sampled exactly.
    """
    xi = np.asarray(xi, float).reshape(-1)
    N = xi.size
    M = 2 * (f0.K_box + beta.K_box) + 2
    X = fr._synth_values(f0.coeffs, M) + xi.reshape((N,) + (1,) * N)
    r = X - np.asarray(alpha_inf, float).reshape((N,) + (1,) * N)
    for j in range(N):
        r = r + X[j][None] * fr._synth_values(fr.differentiate(beta, j).coeffs, M)
    return float(np.max(np.abs(r)))


def kam_iterate(xi, f0: FourierField, constants: SchemeConstants, nu: int | None = None,
                callback: Callable[[KamState], None] | None = None,
                final_check: bool = True) -> StraighteningResult:
    """Run the quadratic scheme at a single parameter xi.

    Returns a result with status 'converged', 'excluded' (a diophantine check
    failed before step n) or 'not_converged' (max_steps reached).  Raises
    DivergenceError when delta_n(s0) grows by more than divergence_guard or
    the change of variables leaves the near-identity regime.
    """
    c = constants
    xi = np.asarray(xi, dtype=float).reshape(-1)
    N = xi.size
    if f0.N != N or f0.m != N:
        raise ValueError("f0 must map T^N to R^N with N = len(xi)")
    if f0.K_box > c.K_box:
        raise ValueError(f"f0 K_box={f0.K_box} exceeds working K_box={c.K_box}")
    delta0_s1 = fr.sobolev_norm(f0, c.s1) / c.gamma
    if c.eta_star is not None and delta0_s1 > c.eta_star:
        raise SmallnessError(f"gamma^-1 ||f0||_s1 = {delta0_s1:.3e} exceeds eta_star={c.eta_star}")

    alpha = xi.copy()
    f = f0.resize(c.K_box)
    psi = TorusDiffeo.identity(N, c.K_box)
    steps = []
    K_max_exec = 1
    prev = None
    for n in range(c.max_steps + 1):
        K_n = c.K_schedule(n)
        K_eff = c.effective_K(K_n)
        d0 = fr.sobolev_norm(f, c.s0) / c.gamma
        d1 = fr.sobolev_norm(f, c.s1) / c.gamma
        entry = {"n": n, "K_n": K_n, "K_eff": K_eff, "delta_s0": d0, "delta_s1": d1,
                 "alpha_n": [float(a) for a in alpha]}
        steps.append(entry)
        state = KamState(n, alpha.copy(), f, psi.h, K_n, K_eff, {"s0": d0, "s1": d1})
        if prev is not None and prev > 0 and d0 > c.divergence_guard * prev:
            raise DivergenceError(f"delta_s0 grew from {prev:.3e} to {d0:.3e} at step {n}", steps)
        if not np.isfinite(d0):
            raise DivergenceError(f"non-finite delta at step {n}", steps)
        if d0 < c.convergence_tol:
            if callback:
                callback(state)
            return _finish(xi, f0, alpha, psi, steps, n, c, nu, K_max_exec, final_check)
        if n == c.max_steps:
            if callback:
                callback(state)
            return StraighteningResult("not_converged", xi, alpha, psi, steps, n)
        if not diophantine_ok(alpha, c.gamma, c.tau, max(1, min(K_eff, N * c.K_box)), nu):
            state.survived = False
            if callback:
                callback(state)
            return StraighteningResult("excluded", xi, None, None, steps, n, excluded_step=n)
        if callback:
            callback(state)
        try:
            st = kam_step(alpha, f, c, K_eff, nu)
            psi = df.compose_diffeos(st.phi, psi, K_out=c.K_box, alias_tol=c.alias_tol,
                                     chop=c.chop_tol)
        except (DiffeoError, InversionError, AliasingError) as exc:
            raise DivergenceError(f"step {n}: {exc}", steps) from exc
        entry["g_c1"] = st.diagnostics["g_c1"]
        entry["homological_residual"] = st.diagnostics["homological_residual"]
        K_max_exec = max(K_max_exec, K_eff)
        prev = d0
        alpha, f = st.alpha_plus, st.f_plus
    raise AssertionError("unreachable")


def _finish(xi, f0, alpha, psi, steps, n, c, nu, K_max_exec, final_check):
    res = StraighteningResult("converged", xi, alpha, psi, steps, n)
    res.residual = conjugacy_residual(xi, f0, psi.h, alpha)
    if final_check:
        res.K_check = c.K_check if c.K_check is not None else 4 * K_max_exec
        res.final_set = check_final_set(alpha, c, res.K_check, nu)
    return res
