"""
Truncated Fourier series on the torus T^N = [0, 2pi)^N with values in R^m.

A field is stored densely on the l-infinity box |k_i| <= K_box with the
centered index convention: ``coeffs[c, k_1 + K, ..., k_N + K]`` is the
coefficient of e^{i k.theta} in range component c.  Real-valuedness is the
Hermitian symmetry u_{-k} = conj(u_k), enforced at construction.

Weights use <k> = max(1, |k|_1), so that

    ||u||_s^2 = sum_k <k>^{2s} |u_k|^2 .
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import signal

DEBUG = False

# default threshold for the energy fraction allowed outside the output box
ALIAS_TOL = 1e-10


class AliasingError(RuntimeError):
    pass


class ConsistencyError(RuntimeError):
    pass


@functools.lru_cache(maxsize=64)
def _index_axes(N: int, K: int) -> tuple:
    k = np.arange(-K, K + 1)
    return tuple(np.meshgrid(*([k] * N), indexing="ij", sparse=True))


@functools.lru_cache(maxsize=64)
def l1_index(N: int, K: int) -> np.ndarray:
    """|k|_1 on the centered box, shape (2K+1,)*N."""
    out = np.zeros((2 * K + 1,) * N, dtype=np.int64)
    for ax in _index_axes(N, K):
        out = out + np.abs(ax)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=64)
def bracket(N: int, K: int) -> np.ndarray:
    """<k> = max(1, |k|_1) on the centered box."""
    w = np.maximum(1, l1_index(N, K)).astype(float)
    w.setflags(write=False)
    return w


def _hermitize(c: np.ndarray) -> np.ndarray:
    N = c.ndim - 1
    flipped = np.conj(np.flip(c, axis=tuple(range(1, N + 1))))
    return 0.5 * (c + flipped)


def hermitian_defect(c: np.ndarray) -> float:
    N = c.ndim - 1
    flipped = np.conj(np.flip(c, axis=tuple(range(1, N + 1))))
    return float(np.max(np.abs(c - flipped), initial=0.0))


class FourierField:
    """Real map T^N -> R^m as a truncated, Hermitian Fourier series.

    Instances are immutable; every operation returns a new field.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs, hermitize: bool = True):
        c = np.array(coeffs, dtype=complex)
        if c.ndim < 2:
            raise ValueError("coeffs must have shape (m, 2K+1, ..., 2K+1)")
        n = c.shape[1]
        if n % 2 != 1 or any(s != n for s in c.shape[1:]):
            raise ValueError(f"coefficient box must be square and odd, got {c.shape[1:]}")
        if hermitize:
            c = _hermitize(c)
        elif DEBUG and hermitian_defect(c) > 1e-13 * (np.max(np.abs(c), initial=0.0) + 1e-300):
            raise ConsistencyError("Hermitian symmetry violated")
        c.setflags(write=False)
        self._c = c

    # ------------------------------------------------------------ shape
    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def m(self) -> int:
        return self._c.shape[0]

    @property
    def N(self) -> int:
        return self._c.ndim - 1

    @property
    def K_box(self) -> int:
        return (self._c.shape[1] - 1) // 2

    def __repr__(self):
        return f"FourierField(N={self.N}, m={self.m}, K_box={self.K_box})"

    # ------------------------------------------------------ constructors
    @classmethod
    def zeros(cls, N: int, m: int, K_box: int) -> "FourierField":
        return cls(np.zeros((m,) + (2 * K_box + 1,) * N, dtype=complex), hermitize=False)

    @classmethod
    def constant(cls, value, N: int, K_box: int = 0) -> "FourierField":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        c = np.zeros((value.size,) + (2 * K_box + 1,) * N, dtype=complex)
        c[(slice(None),) + (K_box,) * N] = value
        return cls(c, hermitize=False)

    @classmethod
    def from_modes(cls, N: int, m: int, K_box: int, modes: Iterable) -> "FourierField":
        """Build from (k, amplitude) pairs, amplitude a complex m-vector.

        Each pair adds a_k e^{ik.theta} + conj(a_k) e^{-ik.theta} (for k != 0),
        so a real cosine cos(k.theta) is ``(k, 0.5)`` and sin(k.theta) is
        ``(k, -0.5j)``.  At k = 0 the real part of the amplitude is added.
        """
        c = np.zeros((m,) + (2 * K_box + 1,) * N, dtype=complex)
        for k, amp in modes:
            k = tuple(int(x) for x in k)
            if len(k) != N:
                raise ValueError(f"mode {k} has wrong length for N={N}")
            if max(abs(x) for x in k) > K_box:
                raise ValueError(f"mode {k} outside box K_box={K_box}")
            amp = np.broadcast_to(np.asarray(amp, dtype=complex), (m,))
            idx = tuple(x + K_box for x in k)
            nidx = tuple(-x + K_box for x in k)
            if all(x == 0 for x in k):
                c[(slice(None),) + idx] += amp.real
            else:
                c[(slice(None),) + idx] += amp
                c[(slice(None),) + nidx] += np.conj(amp)
        return cls(c, hermitize=False)

    @classmethod
    def trig(cls, N: int, K_box: int, terms: Iterable) -> "FourierField":
        """Build from real terms (kind, k, amplitude vector), kind in {'cos', 'sin'}."""
        terms = list(terms)
        m = None
        modes = []
        for kind, k, amp in terms:
            amp = np.atleast_1d(np.asarray(amp, dtype=float))
            m = amp.size if m is None else m
            if kind == "cos":
                a = 0.5 * amp if any(k) else amp
            elif kind == "sin":
                a = -0.5j * amp if any(k) else 0.0 * amp
            else:
                raise ValueError(f"unknown term kind {kind!r}")
            modes.append((k, a))
        if m is None:
            raise ValueError("need at least one term")
        return cls.from_modes(N, m, K_box, modes)

    @classmethod
    def random(cls, N: int, m: int, K_box: int, rng, decay: float = 0.0,
               K_modes: int | None = None, scale: float = 1.0) -> "FourierField":
        """Random field with amplitudes ~ scale * <k>^{-decay}, supported on |k|_1 <= K_modes."""
        shape = (m,) + (2 * K_box + 1,) * N
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        c *= scale * bracket(N, K_box) ** (-decay)
        if K_modes is not None:
            c[:, l1_index(N, K_box) > K_modes] = 0.0
        return cls(c)

    # ------------------------------------------------------- arithmetic
    def _check_like(self, other: "FourierField"):
        if self.N != other.N or self.m != other.m:
            raise ValueError(f"shape mismatch: {self!r} vs {other!r}")

    def __add__(self, other):
        if isinstance(other, FourierField):
            self._check_like(other)
            K = max(self.K_box, other.K_box)
            return FourierField(self.resize(K)._c + other.resize(K)._c, hermitize=False)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, FourierField):
            return self + (-other)
        return NotImplemented

    def __neg__(self):
        return FourierField(-self._c, hermitize=False)

    def __mul__(self, a):
        if np.isscalar(a):
            return FourierField(float(a) * self._c, hermitize=False)
        return NotImplemented

    __rmul__ = __mul__

    def scale_components(self, factors) -> "FourierField":
        factors = np.asarray(factors, dtype=float).reshape((self.m,) + (1,) * self.N)
        return FourierField(self._c * factors, hermitize=False)

    def resize(self, K: int) -> "FourierField":
        """Zero-pad or box-truncate to K_box = K."""
        K0 = self.K_box
        if K == K0:
            return self
        if K > K0:
            c = np.zeros((self.m,) + (2 * K + 1,) * self.N, dtype=complex)
            sl = (slice(None),) + (slice(K - K0, K + K0 + 1),) * self.N
            c[sl] = self._c
        else:
            sl = (slice(None),) + (slice(K0 - K, K0 + K + 1),) * self.N
            c = self._c[sl]
        return FourierField(c, hermitize=False)

    def component(self, i: int) -> "FourierField":
        return FourierField(self._c[i:i + 1], hermitize=False)

    @staticmethod
    def stack(fields: Sequence["FourierField"]) -> "FourierField":
        K = max(f.K_box for f in fields)
        return FourierField(np.concatenate([f.resize(K)._c for f in fields], axis=0), hermitize=False)

    def chop(self, rel_tol: float) -> "FourierField":
        """Zero coefficients below rel_tol times the largest one (roundoff floor)."""
        if rel_tol <= 0:
            return self
        amax = np.max(np.abs(self._c), initial=0.0)
        if amax == 0:
            return self
        c = np.where(np.abs(self._c) < rel_tol * amax, 0.0, self._c)
        return FourierField(c, hermitize=False)

    def mode(self, k) -> np.ndarray:
        K = self.K_box
        if max(abs(int(x)) for x in k) > K:
            return np.zeros(self.m, dtype=complex)
        return self._c[(slice(None),) + tuple(int(x) + K for x in k)].copy()

    def is_hermitian(self, tol: float = 1e-13) -> bool:
        scale = np.max(np.abs(self._c), initial=0.0)
        return hermitian_defect(self._c) <= tol * max(scale, 1e-300)

    def nonzero_modes(self):
        """(ks, coeffs) for stored modes with nonzero amplitude, ks shape (n, N)."""
        mask = np.any(self._c != 0, axis=0)
        idx = np.argwhere(mask)
        ks = idx - self.K_box
        vals = self._c[(slice(None),) + tuple(idx.T)].T
        return ks, vals

    # --------------------------------------------------------------- io
    def to_dict(self) -> dict:
        ks, vals = self.nonzero_modes()
        modes = []
        for k, v in zip(ks, vals):
            k = tuple(int(x) for x in k)
            if k < (0,) * self.N:
                continue
            modes.append({"k": list(k), "re": [float(x) for x in v.real],
                          "im": [float(x) for x in v.imag]})
        return {"N": self.N, "m": self.m, "K_box": self.K_box, "modes": modes}

    @classmethod
    def from_dict(cls, d: dict) -> "FourierField":
        N, m, K = int(d["N"]), int(d["m"]), int(d["K_box"])
        c = np.zeros((m,) + (2 * K + 1,) * N, dtype=complex)
        for mode in d["modes"]:
            k = tuple(int(x) for x in mode["k"])
            v = np.asarray(mode["re"], dtype=float) + 1j * np.asarray(mode["im"], dtype=float)
            c[(slice(None),) + tuple(x + K for x in k)] = v
            c[(slice(None),) + tuple(-x + K for x in k)] = np.conj(v)
        return cls(c, hermitize=False)


@dataclass(frozen=True)
class GridSamples:
    """Values of a map T^N -> R^m on the uniform grid theta_j = 2 pi j / M."""
    values: np.ndarray  # shape (m, M_1, ..., M_N)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.ndim - 1

    @property
    def resolution(self) -> tuple:
        return self.values.shape[1:]

    def nodes(self) -> np.ndarray:
        """Grid nodes, shape (M_1*...*M_N, N), C order matching values.reshape(m, -1)."""
        return grid_nodes(self.resolution)


def grid_nodes(M) -> np.ndarray:
    axes = [2 * np.pi * np.arange(n) / n for n in M]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


@dataclass(frozen=True)
class LipschitzNorm:
    sup_part: float
    lip_part: float
    gamma: float

    @property
    def value(self) -> float:
        return self.sup_part + self.gamma * self.lip_part


# ------------------------------------------------------------------ norms
def sobolev_norm(u: FourierField, s: float) -> float:
    w = bracket(u.N, u.K_box) ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.sum(np.abs(u.coeffs) ** 2, axis=0))))


def lipschitz_norm(samples, s: float, gamma: float) -> LipschitzNorm:
    """Sup/Lipschitz norm of a parameter family from finitely many (xi, u) samples."""
    samples = [(np.atleast_1d(np.asarray(xi, dtype=float)), u) for xi, u in samples]
    if not samples:
        raise ValueError("need at least one sample")
    sup = max(sobolev_norm(u, s) for _, u in samples)
    lip = 0.0
    for (x1, u1), (x2, u2) in itertools.combinations(samples, 2):
        dist = float(np.linalg.norm(x1 - x2))
        diff = sobolev_norm(u1 - u2, s - 1)
        if dist == 0.0:
            if diff > 0.0:
                raise ValueError(f"duplicate parameter {x1} with distinct fields")
            continue
        lip = max(lip, diff / dist)
    return LipschitzNorm(sup, lip, gamma)


def lipschitz_norm_vector(samples, gamma: float) -> LipschitzNorm:
    """Same quotient for vector-valued functions of the parameter (e.g. alpha_inf)."""
    samples = [(np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(v, float)))
               for x, v in samples]
    sup = max(float(np.linalg.norm(v)) for _, v in samples)
    lip = 0.0
    for (x1, v1), (x2, v2) in itertools.combinations(samples, 2):
        dist = float(np.linalg.norm(x1 - x2))
        if dist > 0:
            lip = max(lip, float(np.linalg.norm(v1 - v2)) / dist)
    return LipschitzNorm(sup, lip, gamma)


# ------------------------------------------------------------ projections
def project(u: FourierField, K: int) -> FourierField:
    mask = l1_index(u.N, u.K_box) <= K
    return FourierField(u.coeffs * mask, hermitize=False)


def project_complement(u: FourierField, K: int) -> FourierField:
    mask = l1_index(u.N, u.K_box) > K
    return FourierField(u.coeffs * mask, hermitize=False)


def average(u: FourierField) -> np.ndarray:
    c0 = u.coeffs[(slice(None),) + (u.K_box,) * u.N]
    if np.max(np.abs(c0.imag), initial=0.0) > 1e-13 * max(1.0, float(np.max(np.abs(c0)))):
        raise ConsistencyError("mean has an imaginary part")
    return c0.real.copy()


def differentiate(u: FourierField, axis: int) -> FourierField:
    if not 0 <= axis < u.N:
        raise ValueError(f"axis {axis} out of range for N={u.N}")
    k = _index_axes(u.N, u.K_box)[axis]
    return FourierField(u.coeffs * (1j * k)[None], hermitize=False)


def gradient(u: FourierField) -> list:
    return [differentiate(u, j) for j in range(u.N)]


# --------------------------------------------------------------- products
def multiply(u: FourierField, v: FourierField, mode: str = "pointwise",
             method: str = "grid") -> FourierField:
    """Exact product with output K_box = K_u + K_v.

    mode 'pointwise': componentwise, with broadcasting when one side is scalar.
    mode 'dot': sum over range components (m_u == m_v), scalar result.
    method 'grid' uses an unaliased transform grid, 'direct' a convolution sum.
    """
    if u.N != v.N:
        raise ValueError("domain dimensions differ")
    if mode not in ("pointwise", "dot"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "dot" and u.m != v.m:
        raise ValueError(f"dot product needs equal range dims, got {u.m} and {v.m}")
    if mode == "pointwise" and not (u.m == v.m or u.m == 1 or v.m == 1):
        raise ValueError(f"incompatible range dims {u.m} and {v.m}")
    K = u.K_box + v.K_box
    if method == "grid":
        M = 2 * K + 2
        a = _synth_values(u.resize(K).coeffs, M)
        b = _synth_values(v.resize(K).coeffs, M)
        prod = a * b
        if mode == "dot":
            prod = prod.sum(axis=0, keepdims=True)
        return FourierField(_analyze_values(prod, K), hermitize=True)
    if method == "direct":
        m = max(u.m, v.m)
        cu = np.broadcast_to(u.coeffs, (m,) + u.coeffs.shape[1:])
        cv = np.broadcast_to(v.coeffs, (m,) + v.coeffs.shape[1:])
        out = np.stack([signal.convolve(cu[i], cv[i], mode="full", method="direct")
                        for i in range(m)])
        if mode == "dot":
            out = out.sum(axis=0, keepdims=True)
        return FourierField(out, hermitize=True)
    raise ValueError(f"unknown method {method!r}")


# -------------------------------------------------------------- transforms
def _as_resolution(M, N: int) -> tuple:
    if np.isscalar(M):
        return (int(M),) * N
    M = tuple(int(x) for x in M)
    if len(M) != N:
        raise ValueError("resolution has wrong length")
    return M


def _synth_values(c: np.ndarray, M) -> np.ndarray:
    """Real grid values from centered coefficients (caller checked M >= 2K+2)."""
    N = c.ndim - 1
    K = (c.shape[1] - 1) // 2
    M = _as_resolution(M, N)
    buf = np.zeros((c.shape[0],) + M, dtype=complex)
    idx = np.arange(-K, K + 1)
    sl = np.ix_(*[idx % n for n in M])
    buf[(slice(None),) + sl] = c
    vals = np.fft.ifftn(buf, axes=tuple(range(1, N + 1))) * np.prod(M)
    return vals.real


def _analyze_values(values: np.ndarray, K: int) -> np.ndarray:
    N = values.ndim - 1
    M = values.shape[1:]
    hat = np.fft.fftn(values, axes=tuple(range(1, N + 1))) / np.prod(M)
    idx = np.arange(-K, K + 1)
    sl = np.ix_(*[idx % n for n in M])
    return hat[(slice(None),) + sl]


def synthesize(u: FourierField, M) -> GridSamples:
    M = _as_resolution(M, u.N)
    if min(M) < 2 * u.K_box + 2:
        raise AliasingError(f"resolution {M} too small for K_box={u.K_box}")
    return GridSamples(_synth_values(u.coeffs, M))


def analyze(g: GridSamples, K_box: int, check_tail: float | None = None) -> FourierField:
    """Coefficients on the box |k_i| <= K_box from grid values.

    With check_tail set, the energy outside the box (up to the grid Nyquist
    frequency) must be below that fraction of the total, else AliasingError.
    """
    if min(g.resolution) < 2 * K_box + 2:
        raise AliasingError(f"resolution {g.resolution} too small for K_box={K_box}")
    if check_tail is not None:
        frac = tail_fraction(g.values, K_box)
        if frac > check_tail:
            raise AliasingError(f"energy fraction {frac:.3e} outside K_box={K_box}")
    return FourierField(_analyze_values(g.values, K_box), hermitize=True)


def tail_fraction(values: np.ndarray, K_box: int) -> float:
    N = values.ndim - 1
    hat = np.fft.fftn(values, axes=tuple(range(1, N + 1)))
    energy = np.sum(np.abs(hat) ** 2, axis=0)
    total = float(energy.sum())
    if total == 0.0:
        return 0.0
    inside = np.ones(energy.shape, dtype=bool)
    for ax, n in enumerate(energy.shape):
        f = np.abs(np.fft.fftfreq(n, 1.0 / n))
        shape = [1] * N
        shape[ax] = n
        inside &= (f <= K_box).reshape(shape)
    return float(energy[~inside].sum()) / total


def evaluate_at(u: FourierField, points) -> np.ndarray:
    """Direct summation of the series at arbitrary points; returns shape (P, m)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != u.N:
        raise ValueError(f"points must have {u.N} columns")
    K, N, m = u.K_box, u.N, u.m
    n = 2 * K + 1
    k = np.arange(-K, K + 1)
    c = u.coeffs
    P = pts.shape[0]
    out = np.empty((P, m))
    # keep the (chunk, m, n^(N-1)) intermediate around 4M entries
    chunk = max(1, int(4_000_000 // max(1, m * n ** (N - 1))))
    resid = 0.0
    for start in range(0, P, chunk):
        p = pts[start:start + chunk]
        E = np.exp(1j * p[:, 0:1] * k[None, :])
        T = np.tensordot(E, c, axes=([1], [1]))  # (p, m, n, ..., n)
        for j in range(1, N):
            Ej = np.exp(1j * p[:, j:j + 1] * k[None, :])
            T = np.einsum("pmk...,pk->pm...", T, Ej)
        out[start:start + chunk] = T.real
        resid = max(resid, float(np.max(np.abs(T.imag), initial=0.0)))
    scale = float(np.sqrt(np.sum(np.abs(c) ** 2)))
    if resid > 1e-12 * max(scale, 1e-300) and resid > 1e-300:
        raise ConsistencyError(f"imaginary residue {resid:.3e} in point evaluation")
    return out


def is_even(u: FourierField, tol: float) -> bool:
    """sup |u(theta) - u(-theta)| < tol on the natural grid."""
    M = 2 * u.K_box + 2
    a = _synth_values(u.coeffs, M)
    b = _synth_values(np.flip(u.coeffs, axis=tuple(range(1, u.N + 1))), M)
    return float(np.max(np.abs(a - b), initial=0.0)) < tol


def is_odd(u: FourierField, tol: float) -> bool:
    M = 2 * u.K_box + 2
    a = _synth_values(u.coeffs, M)
    b = _synth_values(np.flip(u.coeffs, axis=tuple(range(1, u.N + 1))), M)
    return float(np.max(np.abs(a + b), initial=0.0)) < tol


def sup_norm_grid(u: FourierField, oversample: int = 4) -> float:
    """Max over range-Euclidean norms on an oversampled grid."""
    M = max(2 * u.K_box + 2, oversample * (2 * u.K_box + 1))
    vals = _synth_values(u.coeffs, M)
    return float(np.max(np.sqrt(np.sum(vals ** 2, axis=0)), initial=0.0))
