"""
Parameter sweeps over a box O_0 in R^N, Cantor-set filtering and estimates
of the excluded Lebesgue measure.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from . import kam

CONVERGED = 0
EXCLUDED = 1
EXCLUDED_FINAL = 2
DIVERGED = 3
NOT_CONVERGED = 4
PENDING = -1

OUTCOME_NAMES = {CONVERGED: "converged", EXCLUDED: "excluded", EXCLUDED_FINAL: "excluded_final",
                 DIVERGED: "diverged", NOT_CONVERGED: "not_converged", PENDING: "pending"}


@dataclass
class ParamGrid:
    box: np.ndarray  # (N, 2) per-axis intervals
    samples: np.ndarray  # (P, N)
    gamma: float | None = None
    outcome: np.ndarray = None
    alpha_inf: np.ndarray = None
    excluded_step: np.ndarray = None
    K_check: np.ndarray = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.box = np.asarray(self.box, float).reshape(-1, 2)
        self.samples = np.atleast_2d(np.asarray(self.samples, float))
        P, N = self.samples.shape
        if N != self.box.shape[0]:
            raise ValueError("samples and box dimensions differ")
        lo, hi = self.box[:, 0], self.box[:, 1]
        if np.any(self.samples < lo - 1e-12) or np.any(self.samples > hi + 1e-12):
            raise ValueError("samples outside the domain box")
        if self.outcome is None:
            self.outcome = np.full(P, PENDING, dtype=int)
            self.alpha_inf = np.full((P, N), np.nan)
            self.excluded_step = np.full(P, -1, dtype=int)
            self.K_check = np.zeros(P, dtype=int)

    @property
    def N(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return self.samples.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.box[:, 1] - self.box[:, 0]))

    # -------------------------------------------------------- constructors
    @classmethod
    def uniform(cls, box, shape, offsets=None) -> "ParamGrid":
        """Tensor grid with cells of width w and nodes at lo + (i + offset) w.

        offsets None gives the closed grid lo + i (hi - lo)/(n - 1).
        """
        box = np.asarray(box, float).reshape(-1, 2)
        shape = tuple(int(n) for n in np.broadcast_to(shape, (box.shape[0],)))
        axes = []
        for a, ((lo, hi), n) in enumerate(zip(box, shape)):
            if offsets is None:
                axes.append(np.linspace(lo, hi, n))
            else:
                axes.append(lo + (np.arange(n) + offsets[a]) * (hi - lo) / n)
        mesh = np.meshgrid(*axes, indexing="ij")
        return cls(box, np.stack([m.ravel() for m in mesh], axis=1))

    @classmethod
    def halton(cls, box, n: int, skip: int = 1, shift=None) -> "ParamGrid":
        """Unscrambled Halton points (deterministic); the origin point is skipped.

        Plain Halton nodes are rationals with small denominators, some exactly
        resonant; shift adds a fixed vector mod 1 (Cranley-Patterson rotation).
        """
        box = np.asarray(box, float).reshape(-1, 2)
        eng = qmc.Halton(d=box.shape[0], scramble=False)
        eng.fast_forward(skip)
        u = eng.random(n)
        if shift is not None:
            u = np.mod(u + np.asarray(shift, float), 1.0)
        return cls(box, qmc.scale(u, box[:, 0], box[:, 1]))

    @classmethod
    def random(cls, box, n: int, seed: int) -> "ParamGrid":
        box = np.asarray(box, float).reshape(-1, 2)
        rng = np.random.default_rng(seed)
        u = rng.random((n, box.shape[0]))
        return cls(box, box[:, 0] + u * (box[:, 1] - box[:, 0]))

    def copy_empty(self) -> "ParamGrid":
        return ParamGrid(self.box.copy(), self.samples.copy(), warnings=list(self.warnings))

    def rows(self):
        for i in range(len(self)):
            yield (self.samples[i], int(self.outcome[i]), self.alpha_inf[i], int(self.excluded_step[i]))


@dataclass
class FrequencyMap:
    """omega -> m0(omega) in R^d, with the lower bound c and Lipschitz ratio C."""
    m0: Callable
    c: float = 0.0
    C: float = np.inf

    def __call__(self, omega) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.m0(np.asarray(omega, float)), float))

    def check(self, omegas) -> list:
        """Warnings for violated hypotheses over the samples (empty if fine)."""
        omegas = np.atleast_2d(np.asarray(omegas, float))
        vals = np.array([self(w) for w in omegas])
        norms = np.linalg.norm(vals, axis=1)
        out = []
        if norms.min() < self.c:
            out.append(f"inf |m0| = {norms.min():.4g} below c = {self.c}")
        lip = 0.0
        order = np.lexsort(omegas.T[::-1])
        for a, b in zip(order[:-1], order[1:]):
            dist = np.linalg.norm(omegas[a] - omegas[b])
            if dist > 0:
                lip = max(lip, np.linalg.norm(vals[a] - vals[b]) / dist)
        if lip > self.C * norms.max():
            out.append(f"|m0|^lip = {lip:.4g} exceeds C |m0|^sup = {self.C * norms.max():.4g}")
        return out


def restrict_to_curve(omega_grid: ParamGrid, m0: FrequencyMap) -> ParamGrid:
    """xi = (omega, m0(omega)) samples; hypothesis violations become warnings."""
    om = omega_grid.samples
    vals = np.array([m0(w) for w in om])
    xi = np.concatenate([om, vals], axis=1)
    lo = np.minimum(vals.min(axis=0), vals.max(axis=0))
    hi = vals.max(axis=0)
    box = np.concatenate([omega_grid.box, np.stack([lo, hi], axis=1)], axis=0)
    g = ParamGrid(box, xi)
    g.warnings = m0.check(om)
    return g


# -------------------------------------------------------------------- sweep
class ConstantBuilder:
    """f0 independent of xi; picklable, so usable with worker processes."""

    def __init__(self, f0):
        self.f0 = f0

    def __call__(self, xi):
        return self.f0


def run_point(xi, f0, constants: kam.SchemeConstants, nu=None):
    """(outcome, alpha_inf, excluded_step, K_check) for one parameter."""
    N = len(xi)
    try:
        res = kam.kam_iterate(xi, f0, constants, nu=nu)
    except kam.DivergenceError as exc:
        return DIVERGED, np.full(N, np.nan), len(exc.steps) - 1, 0
    if res.status == "excluded":
        return EXCLUDED, np.full(N, np.nan), res.excluded_step, 0
    if res.status == "not_converged":
        return NOT_CONVERGED, np.full(N, np.nan), -1, 0
    if not res.final_set:
        return EXCLUDED_FINAL, res.alpha_inf, res.iterations, res.K_check
    return CONVERGED, res.alpha_inf, -1, res.K_check


def _work(args):
    xi, builder, constants, nu = args
    return run_point(xi, builder(xi), constants, nu)


def sweep(grid: ParamGrid, f0_builder: Callable, constants: kam.SchemeConstants,
          nu: int | None = None, workers: int = 1) -> ParamGrid:
    """Run the scheme at every sample; results are stored in sample order."""
    out = grid.copy_empty()
    out.gamma = constants.gamma
    jobs = [(xi, f0_builder, constants, nu) for xi in out.samples]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_work, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [_work(j) for j in jobs]
    for i, (code, alpha, step, kc) in enumerate(results):
        out.outcome[i] = code
        out.alpha_inf[i] = alpha
        out.excluded_step[i] = step
        out.K_check[i] = kc
    return out


@dataclass
class MeasureEstimate:
    value: float
    half_width: float
    fraction: float
    n: int
    n_excluded: int


def measure_excluded(grid: ParamGrid, z: float = 1.96) -> MeasureEstimate:
    """Excluded fraction times box volume, with a normal-approximation binomial half-width."""
    n = len(grid)
    if n == 0:
        raise ValueError("empty grid")
    if np.any(grid.outcome == PENDING):
        raise ValueError("sweep not done")
    k = int(np.sum(grid.outcome != CONVERGED))
    p = k / n
    vol = grid.volume
    return MeasureEstimate(p * vol, z * math.sqrt(p * (1 - p) / n) * vol, p, n, k)


def loglog_slope(gammas, values) -> float:
    g = np.log(np.asarray(gammas, float))
    v = np.log(np.asarray(values, float))
    return float(np.polyfit(g, v, 1)[0])


def gamma_ladder(grid: ParamGrid, f0_builder: Callable, constants: kam.SchemeConstants,
                 gammas=(4e-2, 2e-2, 1e-2), nu=None, workers: int = 1) -> dict:
    """Sweep at each gamma; table of excluded measures and the log-log slope."""
    rows = []
    grids = []
    for gam in gammas:
        c = kam.SchemeConstants(**{**constants.to_dict(), "gamma": gam})
        g = sweep(grid, f0_builder, c, nu=nu, workers=workers)
        m = measure_excluded(g)
        grids.append(g)
        rows.append({"gamma": gam, "measure": m.value, "half_width": m.half_width,
                     "fraction": m.fraction, "n_excluded": m.n_excluded, "n": m.n})
    vals = [r["measure"] for r in rows]
    slope = loglog_slope(gammas, vals) if all(v > 0 for v in vals) else float("nan")
    order = np.argsort(gammas)
    sorted_vals = np.asarray(vals)[order]
    return {
        "rows": rows,
        "slope": slope,
        "monotone": bool(np.all(np.diff(sorted_vals) >= 0)),
        "grids": grids,
    }


def extend_nearest(grid: ParamGrid) -> np.ndarray:
    """alpha_inf on every sample, filled from the nearest converged sample."""
    ok = grid.outcome == CONVERGED
    out = grid.alpha_inf.copy()
    if not np.any(ok):
        return out
    src = grid.samples[ok]
    for i in np.flatnonzero(~ok):
        j = int(np.argmin(np.linalg.norm(src - grid.samples[i], axis=1)))
        out[i] = grid.alpha_inf[ok][j]
    return out


def resonant_width(ell: int, j: int, omegas, m_inf, gamma: float, tau: float) -> float:
    """Measured length of {omega : |omega ell - m_inf j| <= 2 gamma / <ell>^tau} on a 1-d sample."""
    omegas = np.asarray(omegas, float).reshape(-1)
    m_inf = np.broadcast_to(np.asarray(m_inf, float).reshape(-1), omegas.shape)
    thr = 2 * gamma / max(1, abs(ell)) ** tau
    inside = np.abs(omegas * ell - m_inf * j) <= thr
    return float(inside.mean() * (omegas.max() - omegas.min()))
