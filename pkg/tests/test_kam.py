from __future__ import annotations

import re

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import GOLDEN, problem, straightened
from tamekam import diffeo as df
from tamekam import fourier as fr
from tamekam import kam
from tamekam.fourier import FourierField

ALPHA = np.array([1.0, GOLDEN])
C2 = kam.SchemeConstants(N=2)


def two_mode(eps):
    return FourierField.trig(2, 1, [("sin", (1, 1), [eps, 0.0]), ("cos", (1, 0), [0.0, eps])])


# ------------------------------------------------------------- constants
def test_default_constants_n2():
    c = C2
    assert (c.tau, c.s0, c.mu, c.rho, c.kappa, c.b, c.s1) == (4, 4, 29, 18, 45, 90, 48)
    assert c.violations() == []


def test_schedule():
    assert [C2.K_schedule(n) for n in range(4)] == [8, 23, 108, 1117]
    assert [C2.effective_K(C2.K_schedule(n)) for n in range(4)] == [8, 23, 64, 64]


@pytest.mark.parametrize("kw, needle", [
    ({"tau": 5}, "tau = N + 2"),
    ({"s0": 2}, "s0 >= floor(N/2) + 3"),
    ({"mu": 20}, "mu > 4*tau + 2*s0 + 4"),
    ({"rho": 10}, "rho > 2*tau + 2*s0 + 1"),
    ({"kappa": 40}, "kappa > 8*tau + 2*s0 + 4"),
    ({"b": 50}, "b > mu*chi + kappa + 1"),
    ({"s1": 40}, "s1 > chi*mu + s0"),
    ({"gamma": 1.5}, "0 < gamma < 1"),
])
def test_violations_name_the_inequality(kw, needle):
    c = kam.SchemeConstants(N=2, **kw)
    with pytest.raises(kam.ConfigError, match=re.escape(needle)):
        c.validate()


# -------------------------------------------------------------- divisors
def test_diophantine_examples():
    assert kam.diophantine_ok(ALPHA, 1e-2, 4, 64)
    assert not kam.diophantine_ok([1.0, 1.0], 1e-2, 4, 2)
    m, k = kam.diophantine_margin([1.0, 1.0], 4, 4)
    assert m == 0.0 and abs(k[0]) == abs(k[1])
    # 3/2 is resonant at k = (3, -2)
    assert not kam.diophantine_ok([1.0, 1.5], 1e-2, 4, 5)
    assert kam.diophantine_ok([1.0, 1.5], 1e-2, 4, 4)


def test_diophantine_requires_positive_K():
    with pytest.raises(ValueError):
        kam.diophantine_ok(ALPHA, 1e-2, 4, 0)


def test_homological_single_mode():
    k = np.array([2, -1])
    f = FourierField.from_modes(2, 2, 4, [(tuple(k), [0.3 + 0.1j, 0.0])])
    g = kam.solve_homological(f, ALPHA, 8, 1e-2, 4)
    expect = -(0.3 + 0.1j) / (1j * ALPHA @ k)
    assert g.mode(tuple(k))[0] == pytest.approx(expect, abs=1e-16)
    assert g.is_hermitian()


@given(st.integers(0, 2 ** 31 - 1))
def test_homological_residual_random(seed):
    f = FourierField.random(2, 2, 16, np.random.default_rng(seed), decay=1.0)
    g = kam.solve_homological(f, ALPHA, 16, 1e-2, 4)
    assert kam.homological_residual(f, g, ALPHA, 16) < 1e-12 * fr.sobolev_norm(f, 0)
    # modes beyond the truncation are untouched by g
    assert not np.any(g.coeffs[:, fr.l1_index(2, 16) > 16])


def test_homological_rejects_small_divisor():
    f = FourierField.trig(2, 1, [("cos", (1, -1), [1.0, 0.0])])
    with pytest.raises(kam.SmallDivisorError) as exc:
        kam.solve_homological(f, [1.0, 1.0 + 1e-5], 4, 1e-2, 4)
    assert abs(exc.value.k[0]) == abs(exc.value.k[1]) == 1


# ------------------------------------------------------------------ step
def test_step_constant_field():
    f = FourierField.constant([1e-3, -2e-3], 2, 4)
    st_ = kam.kam_step(ALPHA, f, C2, 8)
    assert np.array_equal(st_.alpha_plus, ALPHA + [1e-3, -2e-3])
    assert fr.sobolev_norm(st_.f_plus, 0) == 0.0
    assert fr.sobolev_norm(st_.g, 0) == 0.0


def test_step_is_quadratic():
    ratios = []
    for eps in (1e-3, 1e-4, 1e-5):
        f = two_mode(eps).resize(32)
        st_ = kam.kam_step(ALPHA, f, C2, 8)
        ratios.append(fr.sobolev_norm(st_.f_plus, 4) / fr.sobolev_norm(f, 4) ** 2)
    assert max(ratios) / min(ratios) < 1.01


def test_step_conjugates():
    # Phi_* (alpha + f) = alpha_+ + f_+ pointwise, checked through the pushforward
    f = two_mode(1e-3).resize(32)
    st_ = kam.kam_step(ALPHA, f, C2, 8)
    Y = df.pushforward(df.VectorFieldOnTorus(ALPHA, f), st_.phi, K_out=32)
    Z = df.VectorFieldOnTorus(st_.alpha_plus, st_.f_plus)
    assert fr.sup_norm_grid(Y.combined() - Z.combined()) < 1e-15


def test_step_rejects_nondiophantine():
    with pytest.raises(kam.SmallDivisorError):
        kam.kam_step([1.0, 1.0], two_mode(1e-3), C2, 8)


def test_step_smallness_threshold():
    c = kam.SchemeConstants(N=2, step_delta=1.0)
    with pytest.raises(kam.SmallnessError):
        kam.kam_step(ALPHA, two_mode(1e-3), c, 8)


# ------------------------------------------------------------- iteration
GOLDEN_ALPHA_INF = np.array([0.9999998090169712, 1.6180339887498523])


def test_golden2d_frozen():
    r = straightened("golden2d")
    assert r.status == "converged" and r.final_set and r.K_check == 256
    assert r.iterations == 3
    assert np.allclose(r.alpha_inf, GOLDEN_ALPHA_INF, rtol=0, atol=1e-15)
    d = [s["delta_s0"] for s in r.steps]
    assert d[-1] < 1e-11
    for a, b in zip(d[:-1], d[1:]):
        if a < 1e-4:
            assert b <= a ** 1.3
    assert r.residual < 1e-12


def test_golden2d_frequency_shift_is_mean_sum():
    xi, f0, _ = problem("golden2d")
    r = straightened("golden2d")
    # the first step shifts alpha by <f0> = 0, so the shift is second order
    assert np.max(np.abs(r.alpha_inf - xi)) < 10 * fr.sobolev_norm(f0, 0) ** 2 / 1e-2


def test_zero_perturbation():
    xi, f0, c = problem("zero2d")
    r = kam.kam_iterate(xi, f0, c)
    assert r.status == "converged" and r.iterations == 0
    assert np.array_equal(r.alpha_inf, xi)
    assert not np.any(r.beta.coeffs)


def test_constant_perturbation():
    f0 = FourierField.constant([1e-3, 2e-3], 2, 1)
    r = kam.kam_iterate(ALPHA, f0, C2)
    assert r.status == "converged" and r.iterations == 1
    assert np.array_equal(r.alpha_inf, ALPHA + [1e-3, 2e-3])


def test_resonant_parameter_excluded():
    f0 = two_mode(1e-3)
    r = kam.kam_iterate([1.0, 1.0], f0, C2)
    assert r.status == "excluded" and r.excluded_step == 0 and r.alpha_inf is None


def test_large_perturbation_diverges():
    with pytest.raises(kam.DivergenceError):
        kam.kam_iterate(ALPHA, two_mode(0.3), C2)


def test_not_converged_when_steps_exhausted():
    c = kam.SchemeConstants(N=2, max_steps=1)
    r = kam.kam_iterate(ALPHA, two_mode(1e-3), c)
    assert r.status == "not_converged" and r.iterations == 1


def test_eta_star_threshold():
    c = kam.SchemeConstants(N=2, eta_star=1.0)
    with pytest.raises(kam.SmallnessError):
        kam.kam_iterate(ALPHA, two_mode(1e-3), c)


def test_reversible_fixture_gives_odd_beta():
    r = straightened("golden2d_even")
    assert r.status == "converged"
    assert fr.is_odd(r.beta, tol=1e-10)
    th = fr.grid_nodes((32, 32))
    b = fr.evaluate_at(r.beta, th) + fr.evaluate_at(r.beta, -th)
    assert np.max(np.abs(b)) < 1e-10


def test_result_json_round_trip():
    r = straightened("golden2d")
    d = r.to_dict()
    assert d["status"] == "converged"
    assert np.array_equal(FourierField.from_dict(d["beta"]).coeffs, r.beta.coeffs)
