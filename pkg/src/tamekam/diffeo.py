"""
Torus diffeomorphisms theta -> theta + h(theta) and their action on
functions and vector fields.

Composition and inversion are done by direct evaluation of the series at
displaced grid points followed by a transform back to coefficients.  The
output box is checked for aliasing: if the energy outside it exceeds
``alias_tol`` the grid is doubled once, then an AliasingError is raised.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fourier as fr
from .fourier import FourierField, AliasingError

INVERSE_TOL = 1e-12
INVERSE_MAX_ITERS = 200
# residual allowed for the truncated series of the inverse
INVERSE_CHECK_TOL = 1e-10


class DiffeoError(RuntimeError):
    pass


class InversionError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


def c1_norm(h: FourierField, oversample: int = 4) -> float:
    """|h|_{1,inf} = sup|h| + sum_j sup|d_j h| on an oversampled grid."""
    out = fr.sup_norm_grid(h, oversample)
    for j in range(h.N):
        out += fr.sup_norm_grid(fr.differentiate(h, j), oversample)
    return out


def _work_resolution(K_out: int, oversample: float = 1.5) -> int:
    M = int(np.ceil(oversample * (2 * K_out + 2)))
    return M + (M % 2)


class TorusDiffeo:
    """theta -> theta + h(theta) with h: T^N -> R^N, |h|_{1,inf} <= 1/2."""

    def __init__(self, displacement: FourierField, inverse: FourierField | None = None,
                 max_c1: float = 0.5):
        h = displacement
        if h.m != h.N:
            raise ValueError(f"displacement must map T^{h.N} to R^{h.N}, got m={h.m}")
        self.h = h
        self.c1_norm = c1_norm(h)
        if self.c1_norm > max_c1:
            raise DiffeoError(f"|h|_1,inf = {self.c1_norm:.4g} exceeds {max_c1}")
        self.inverse = inverse
        self.inverse_residual = None

    @classmethod
    def identity(cls, N: int, K_box: int = 0) -> "TorusDiffeo":
        z = FourierField.zeros(N, N, K_box)
        return cls(z, inverse=z)

    @property
    def N(self) -> int:
        return self.h.N

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts + fr.evaluate_at(self.h, pts)

    def apply_inverse(self, points) -> np.ndarray:
        if self.inverse is None:
            raise DiffeoError("inverse not computed; call invert() first")
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts + fr.evaluate_at(self.inverse, pts)

    def to_dict(self) -> dict:
        return {"displacement": self.h.to_dict(),
                "inverse": None if self.inverse is None else self.inverse.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "TorusDiffeo":
        inv = d.get("inverse")
        return cls(FourierField.from_dict(d["displacement"]),
                   None if inv is None else FourierField.from_dict(inv))


@dataclass
class VectorFieldOnTorus:
    """X = (alpha + f(theta)) . d/dtheta."""
    alpha: np.ndarray
    f: FourierField

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        if self.f.N != self.alpha.size or self.f.m != self.alpha.size:
            raise ValueError("periodic part must map T^N to R^N with N = len(alpha)")

    @property
    def N(self) -> int:
        return self.alpha.size

    def combined(self) -> FourierField:
        return self.f + FourierField.constant(self.alpha, self.N, 0)

    def __call__(self, points) -> np.ndarray:
        return self.alpha[None, :] + fr.evaluate_at(self.f, points)


# ------------------------------------------------------------------ inversion
def invert(d: TorusDiffeo, tol: float = INVERSE_TOL, max_iters: int = INVERSE_MAX_ITERS,
           K_out: int | None = None, alias_tol: float = fr.ALIAS_TOL,
           chop: float = 0.0, check_tol: float = INVERSE_CHECK_TOL) -> TorusDiffeo:
    """Fixed point h~ <- -h o (Id + h~) on a working grid, starting from -h."""
    h = d.h
    K_out = h.K_box if K_out is None else K_out
    if d.c1_norm > 0.5:
        raise DiffeoError(f"|h|_1,inf = {d.c1_norm:.4g} exceeds 1/2")
    if not np.any(h.coeffs):
        out = TorusDiffeo(h, inverse=FourierField.zeros(h.N, h.N, K_out))
        out.inverse_residual = 0.0
        return out
    M = _work_resolution(K_out)
    for attempt in range(2):
        y = fr.grid_nodes((M,) * h.N)
        ht = -fr.evaluate_at(h, y)
        resid = np.inf
        for _ in range(max_iters):
            new = -fr.evaluate_at(h, y + ht)
            resid = float(np.max(np.abs(new - ht)))
            ht = new
            if resid < tol:
                break
        else:
            raise InversionError(f"fixed point did not converge, residual {resid:.3e}", resid)
        vals = ht.T.reshape((h.N,) + (M,) * h.N)
        if fr.tail_fraction(vals, K_out) <= alias_tol:
            break
        if attempt == 1:
            raise AliasingError(f"inverse spills outside K_box={K_out}")
        M *= 2
    inv = fr.analyze(fr.GridSamples(vals), K_out).chop(chop)
    out = TorusDiffeo(h, inverse=inv)
    out.inverse_residual = inverse_residual(h, inv)
    if out.inverse_residual > check_tol:
        raise InversionError(f"inverse series residual {out.inverse_residual:.3e}",
                             out.inverse_residual)
    return out


def inverse_residual(h: FourierField, ht: FourierField, M: int | None = None) -> float:
    """sup over a grid of |theta + h(theta) + h~(theta + h(theta)) - theta|."""
    if M is None:
        M = _work_resolution(max(h.K_box, ht.K_box))
    th = fr.grid_nodes((M,) * h.N)
    hv = fr.evaluate_at(h, th)
    r = hv + fr.evaluate_at(ht, th + hv)
    return float(np.max(np.abs(r), initial=0.0))


# ---------------------------------------------------------------- composition
def compose_values(u: FourierField, displacement_values: np.ndarray, M: int) -> np.ndarray:
    """Values of u(theta + h(theta)) at the grid nodes, shape (m, M, ..., M)."""
    th = fr.grid_nodes((M,) * u.N)
    vals = fr.evaluate_at(u, th + displacement_values)
    return vals.T.reshape((u.m,) + (M,) * u.N)


def compose_function(u: FourierField, d: TorusDiffeo | FourierField, K_out: int | None = None,
                     use_inverse: bool = False, alias_tol: float = fr.ALIAS_TOL,
                     chop: float = 0.0, M: int | None = None) -> FourierField:
    """Fourier field of theta -> u(theta + h(theta)).

    ``d`` may be a TorusDiffeo or a bare displacement field.  With
    use_inverse the inverse displacement is used, giving u o Phi^{-1}.
    """
    if isinstance(d, TorusDiffeo):
        h = d.inverse if use_inverse else d.h
        if h is None:
            raise DiffeoError("inverse not computed")
    else:
        h = d
    if h.N != u.N:
        raise ValueError("domain dimension mismatch")
    K_out = u.K_box if K_out is None else K_out
    if not np.any(h.coeffs):
        return u.resize(K_out)
    if M is None:
        # modes of u beyond the output box must not fold back into it
        M = max(_work_resolution(max(K_out, h.K_box)), u.K_box + K_out + 2)
        M += M % 2
    for attempt in range(2):
        hv = fr._synth_values(h.coeffs, M).reshape(h.N, -1).T
        vals = compose_values(u, hv, M)
        if fr.tail_fraction(vals, K_out) <= alias_tol:
            return fr.analyze(fr.GridSamples(vals), K_out).chop(chop)
        M *= 2
    raise AliasingError(f"composition spills outside K_box={K_out} at resolution {M // 2}")


def compose_diffeos(outer: TorusDiffeo, inner: TorusDiffeo, K_out: int | None = None,
                    alias_tol: float = fr.ALIAS_TOL, chop: float = 0.0) -> TorusDiffeo:
    """outer o inner, displacement inner.h + outer.h o (Id + inner.h)."""
    K_out = max(outer.h.K_box, inner.h.K_box) if K_out is None else K_out
    part = compose_function(outer.h, inner, K_out=K_out, alias_tol=alias_tol, chop=chop)
    disp = inner.h.resize(K_out) + part
    try:
        return TorusDiffeo(disp)
    except DiffeoError as exc:
        raise DiffeoError(f"composed map left the near-identity regime: {exc}") from exc


# --------------------------------------------------------------- pushforward
def transport_term(a: FourierField, g: FourierField) -> FourierField:
    """sum_j a_j d_j g for vector fields a, g (exact product)."""
    out = None
    for j in range(g.N):
        term = fr.multiply(a.component(j), fr.differentiate(g, j))
        out = term if out is None else out + term
    return out


def pushforward(X: VectorFieldOnTorus, d: TorusDiffeo, K_out: int | None = None,
                alias_tol: float = fr.ALIAS_TOL, chop: float = 0.0) -> VectorFieldOnTorus:
    """Phi_* X = (alpha + f + (alpha + f).dg) o Phi^{-1} for Phi = Id + g."""
    if d.inverse is None:
        raise DiffeoError("pushforward needs the inverse; call invert() first")
    g = d.h
    K_out = max(X.f.K_box, g.K_box) if K_out is None else K_out
    a = X.combined()
    G = a + transport_term(a, g)
    Y = compose_function(G, d, K_out=K_out, use_inverse=True, alias_tol=alias_tol, chop=chop)
    mean = fr.average(Y)
    periodic = Y - FourierField.constant(mean, X.N, 0)
    return VectorFieldOnTorus(mean, periodic)


# ------------------------------------------------------------- reversibility
def is_reversible(X: VectorFieldOnTorus, tol: float = 1e-12) -> bool:
    return fr.is_even(X.f, tol)


def is_reversibility_preserving(d: TorusDiffeo, tol: float = 1e-12) -> bool:
    return fr.is_odd(d.h, tol)
