from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import GOLDEN, reduced, transport_problem
from tamekam import fourier as fr
from tamekam import kam
from tamekam import transport as tp
from tamekam.fourier import FourierField

U0 = FourierField.trig(1, 2, [("cos", (1,), [1.0]), ("sin", (2,), [0.5])])


def op_free(omega=1.0, zeta=GOLDEN):
    return tp.TransportOperator(1, 1, [omega], [zeta], FourierField.zeros(2, 1, 1))


def test_operator_shapes():
    with pytest.raises(ValueError):
        tp.TransportOperator(1, 1, [1.0, 2.0], [GOLDEN], FourierField.zeros(2, 1, 1))
    with pytest.raises(ValueError):
        tp.TransportOperator(1, 1, [1.0], [GOLDEN], FourierField.zeros(2, 2, 1))
    op, _, _ = transport_problem("transport_golden")
    f0 = op.f0()
    assert f0.m == 2 and not np.any(f0.coeffs[0])


def test_free_operator_is_already_reduced():
    r = reduced("transport_free")
    assert isinstance(r, tp.ReducedTransport)
    assert np.array_equal(r.m_inf, [GOLDEN])
    assert not np.any(r.beta.coeffs)


def test_golden_reduction():
    op, _, _ = transport_problem("transport_golden")
    r = reduced("transport_golden")
    assert isinstance(r, tp.ReducedTransport)
    assert r.result.final_set
    assert r.m_inf[0] - GOLDEN == pytest.approx(-1.9098e-7, rel=1e-3)
    assert r.reduction_residual() < 1e-12
    assert r.beta.N == 2 and r.beta.m == 1
    # the phi-components of the full change of variables vanish
    assert not np.any(r.psi.h.coeffs[0])


def test_resonant_operator_excluded():
    op = tp.TransportOperator(1, 1, [1.0], [1.0],
                              FourierField.trig(2, 1, [("cos", (1, 1), [1e-3])]))
    r = tp.reduce(op, kam.SchemeConstants(N=2))
    assert isinstance(r, kam.StraighteningResult) and r.status == "excluded"


@given(st.floats(0.0, 50.0), st.floats(0.0, 6.28))
def test_free_foot_points_are_translations(t, x):
    op = op_free()
    foot = tp.foot_points(op, t, [[x]])
    assert foot[0, 0] == pytest.approx(x - GOLDEN * t, abs=1e-9)


def test_free_transport_norms_constant():
    op = op_free()
    hist = tp.evolve_characteristics(op, U0, np.linspace(0, 20, 5), [0, 1, 2], M=32)
    assert np.max(np.ptp(hist.norms, axis=0)) < 1e-10
    assert hist.norms[0, 0] == pytest.approx(np.sqrt(2 * 0.25 + 2 * 0.0625), rel=1e-14)


def test_golden_reduced_norms_constant():
    op, _, _ = transport_problem("transport_golden")
    r = reduced("transport_golden")
    hu, hv = tp.evolve_characteristics(op, U0, np.linspace(0, 20, 5), [0, 1], M=32, reduced=r)
    assert np.max(np.ptp(hv.norms, axis=0)) < 1e-10
    assert np.max(np.ptp(hu.norms, axis=0)) < 1e-2


def test_u0_shape_checked():
    with pytest.raises(ValueError):
        tp.evolve_characteristics(op_free(), FourierField.zeros(2, 1, 1), [0.0], [0])


def test_forced_single_closed_form():
    op, c, cfg = transport_problem("forced_single")
    f = FourierField.trig(2, 1, [("cos", (1, -1), [1.0])])
    sol = tp.forced_solve(op, f, reduced("forced_single"), c)
    # b = -sin(phi - x) / (omega - zeta), c = 0
    expect = FourierField.trig(2, 1, [("sin", (1, -1), [-1.0 / (GOLDEN - 1.0)])])
    assert np.allclose(sol.b.resize(1).coeffs, expect.coeffs, atol=1e-15)
    assert np.all(np.asarray(sol.c) == 0.0)
    assert sol.residual < 1e-14


def test_forced_constant_forcing():
    op, c, _ = transport_problem("forced_golden")
    f = FourierField.constant([0.7], 2, 1)
    sol = tp.forced_solve(op, f, reduced("forced_golden"), c)
    assert sol.c[0] == pytest.approx(0.7, abs=1e-15)
    assert fr.sobolev_norm(sol.b, 0) < 1e-15


def test_forced_golden_residual():
    op, c, cfg = transport_problem("forced_golden")
    from tamekam import cli

    f = cli.field_from_terms(cfg["forced"]["f"], 2, 1)
    sol = tp.forced_solve(op, f, reduced("forced_golden"), c)
    assert sol.residual < 1e-12
    assert tp.forced_residual(op, sol.b, f, sol.c) == sol.residual


def test_forced_rejects_resonance():
    op = op_free(1.0, 1.0 + 1e-6)
    r = tp.reduce(op, kam.SchemeConstants(N=2, K0=2))
    f = FourierField.trig(2, 1, [("cos", (1, -1), [1.0])])
    with pytest.raises(kam.SmallDivisorError):
        tp.forced_solve(op, f, r, kam.SchemeConstants(N=2))
