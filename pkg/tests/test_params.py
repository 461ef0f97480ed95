from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import GOLDEN
from tamekam import kam
from tamekam import params as pm
from tamekam.fourier import FourierField

BOX = [[1.0, 2.0], [1.0, 2.0]]
SMALL_F0 = FourierField.trig(2, 1, [("sin", (1, 1), [1e-4, 0.0]), ("cos", (1, 0), [0.0, 1e-4])])
FAST = kam.SchemeConstants(N=2, K0=4, K_box=8)


ZERO_BUILDER = pm.ConstantBuilder(FourierField.zeros(2, 2, 1))
SMALL_BUILDER = pm.ConstantBuilder(SMALL_F0)


def test_uniform_grid_nodes():
    g = pm.ParamGrid.uniform(BOX, 3)
    assert len(g) == 9 and g.volume == 1.0
    assert np.array_equal(g.samples[1], [1.0, 1.5])
    h = pm.ParamGrid.uniform(BOX, (2, 4), offsets=[0.5, 0.5])
    assert np.allclose(np.unique(h.samples[:, 1]), [1.125, 1.375, 1.625, 1.875])


def test_halton_deterministic_and_inside():
    a, b = pm.ParamGrid.halton(BOX, 50), pm.ParamGrid.halton(BOX, 50)
    assert np.array_equal(a.samples, b.samples)
    assert np.all((a.samples > 1.0) & (a.samples < 2.0))


def test_samples_must_lie_in_box():
    with pytest.raises(ValueError):
        pm.ParamGrid(BOX, [[0.5, 1.5]])


def test_zero_perturbation_only_final_filter():
    # with f0 = 0 the scheme stops at step 0 with alpha_inf = xi and only the
    # final 2 gamma check can exclude (here: the rational nodes of a closed grid)
    g = pm.sweep(pm.ParamGrid.uniform(BOX, 5), ZERO_BUILDER, FAST)
    assert set(g.outcome) <= {pm.CONVERGED, pm.EXCLUDED_FINAL}
    assert np.array_equal(g.alpha_inf, g.samples)
    for xi, code in zip(g.samples, g.outcome):
        assert (code == pm.CONVERGED) == kam.check_final_set(xi, FAST, 4)
    h = pm.sweep(pm.ParamGrid(BOX, [[1.0, GOLDEN], [np.sqrt(2), np.sqrt(3)]]), ZERO_BUILDER, FAST)
    m = pm.measure_excluded(h)
    assert m.value == 0.0 and m.half_width == 0.0


def test_resonant_diagonal_excluded():
    # the diagonal alpha_1 = alpha_2 is resonant at k = (1, -1)
    g = pm.ParamGrid(BOX, [[1.5, 1.5], [1.2, 1.2], [1.0, GOLDEN]])
    out = pm.sweep(g, SMALL_BUILDER, FAST)
    assert list(out.outcome) == [pm.EXCLUDED, pm.EXCLUDED, pm.CONVERGED]
    assert list(out.excluded_step) == [0, 0, -1]
    assert np.all(np.isnan(out.alpha_inf[:2]))


def test_measure_extremes():
    g = pm.ParamGrid(BOX, [[1.5, 1.5], [1.2, 1.2]])
    out = pm.sweep(g, SMALL_BUILDER, FAST)
    m = pm.measure_excluded(out)
    assert m.value == 1.0 and m.half_width == 0.0 and m.n_excluded == 2


def test_measure_requires_finished_sweep():
    with pytest.raises(ValueError):
        pm.measure_excluded(pm.ParamGrid.uniform(BOX, 2))


def test_sweep_parallel_matches_serial():
    g = pm.ParamGrid.halton(BOX, 12)
    a = pm.sweep(g, SMALL_BUILDER, FAST, workers=1)
    b = pm.sweep(g, SMALL_BUILDER, FAST, workers=2)
    assert np.array_equal(a.outcome, b.outcome)
    assert np.array_equal(a.alpha_inf, b.alpha_inf, equal_nan=True)


@given(st.floats(0.1, 3.0), st.floats(-3, 3))
def test_loglog_slope_power_law(p, logc):
    g = np.array([4e-2, 2e-2, 1e-2])
    assert pm.loglog_slope(g, np.exp(logc) * g ** p) == pytest.approx(p, rel=1e-9)


SHIFT = [GOLDEN - 1, 2 ** 0.5 - 1]


def frozen_counts(samples, gammas=(4e-2, 2e-2, 1e-2)):
    """Samples failing the 2 gamma check at K = 32 with alpha frozen at xi."""
    out = []
    for gam in gammas:
        c = kam.SchemeConstants(N=2, gamma=gam)
        out.append(sum(not kam.check_final_set(x, c, 32) for x in samples))
    return out


def test_frozen_alpha_ladder():
    g = pm.ParamGrid.halton(BOX, 1681, shift=SHIFT)
    counts = frozen_counts(g.samples)
    assert counts == [19, 10, 4]
    assert 0.5 <= pm.loglog_slope([4e-2, 2e-2, 1e-2], counts) <= 1.5


def test_plain_halton_has_exact_resonances():
    # early unshifted nodes such as (3/2, 4/3) sit on resonant lines at every gamma
    g = pm.ParamGrid.halton(BOX, 1681)
    exact = [x for x in g.samples if kam.diophantine_margin(x, 32, 4)[0] == 0.0]
    assert len(exact) == 4
    assert frozen_counts(g.samples) == [22, 11, 7]
    shifted = pm.ParamGrid.halton(BOX, 1681, shift=SHIFT)
    assert all(kam.diophantine_margin(x, 32, 4)[0] > 0 for x in shifted.samples)


def test_halton_shift_stays_in_box():
    g = pm.ParamGrid.halton([[1.0, 3.0], [-1.0, 0.0]], 200, shift=SHIFT)
    assert np.all((g.samples[:, 0] >= 1) & (g.samples[:, 0] < 3))
    assert np.all((g.samples[:, 1] >= -1) & (g.samples[:, 1] < 0))


def test_restrict_to_curve_constant_map():
    om = pm.ParamGrid.uniform([[1.0, 2.0]], 5)
    m0 = pm.FrequencyMap(lambda w: np.ones(1), c=0.5, C=1.0)
    g = pm.restrict_to_curve(om, m0)
    assert g.N == 2 and np.all(g.samples[:, 1] == 1.0)
    assert g.warnings == []
    bad = pm.FrequencyMap(lambda w: 0.1 * np.ones(1), c=0.5, C=1.0)
    assert any("below c" in w for w in pm.restrict_to_curve(om, bad).warnings)
    steep = pm.FrequencyMap(lambda w: 10 * w, c=0.0, C=0.1)
    assert any("exceeds" in w for w in pm.restrict_to_curve(om, steep).warnings)


def test_resonant_width_single_strip():
    om = np.linspace(1.0, 2.0, 400001)
    gam, tau = 1e-2, 4
    # |2 omega - 3| <= 2 gamma / 2^tau has length 2 gamma / 2^tau
    w = pm.resonant_width(2, 3, om, 1.0, gam, tau)
    assert w == pytest.approx(2 * gam / 2 ** tau, abs=2 * (om[1] - om[0]))


def test_one_dimensional_excluded_measure_linear_in_gamma():
    om = np.linspace(1.0, 2.0, 100001)
    ratios = []
    for gam in (4e-2, 2e-2, 1e-2):
        ex = np.zeros_like(om, dtype=bool)
        for l in range(1, 11):
            for j in range(-20, 21):
                thr = 2 * gam / max(l, abs(j)) ** 4
                ex |= np.abs(om * l - GOLDEN * j) <= thr
        ratios.append(ex.mean() / gam)
    assert max(ratios) / min(ratios) < 1.05
    assert max(ratios) < 5


def test_extend_nearest():
    g = pm.ParamGrid(BOX, [[1.5, 1.5], [1.0, GOLDEN], [1.1, GOLDEN]])
    out = pm.sweep(g, SMALL_BUILDER, FAST)
    ext = pm.extend_nearest(out)
    assert not np.any(np.isnan(ext))
    assert np.array_equal(ext[1], out.alpha_inf[1])
