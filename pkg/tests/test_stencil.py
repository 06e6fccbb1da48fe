import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nonlocal_isaacs import (Grid, SchemeParams, StencilAssembler, canonical_problem, cfl_check,
                             check_coefficients, drift_weights, effective_drift, gamma_factor, named_problem,
                             nonlocal_weights, truncated_mass)
from nonlocal_isaacs.checks import negate_one_weight


def one_sided(p):
    return p.with_(eta=lambda t, x, a, b, z: np.where(z > 0, z, 0.0) + 0.0 * x[..., :1])


class TestDriftWeights:
    def test_positive_drift(self):
        assert drift_weights([2.0], 0.5) == {(1,): 4.0}

    def test_zero_drift(self):
        assert drift_weights([0.0], 0.5) == {}

    def test_componentwise_split(self):
        assert drift_weights([-1.0, 3.0], 1.0) == {(-1, 0): 1.0, (0, 1): 3.0}

    @settings(max_examples=40, deadline=None)
    @given(b=st.lists(st.floats(-5, 5), min_size=1, max_size=2), dx=st.floats(0.01, 1.0))
    def test_weights_nonnegative_and_consistent(self, b, dx):
        w = drift_weights(b, dx)
        assert all(v >= 0 for v in w.values())
        assert sum(v for v in w.values()) == pytest.approx(sum(abs(x) for x in b) / dx)


class TestEffectiveDrift:
    def test_symmetric_jumps_need_no_compensation(self):
        p = canonical_problem("fractional_linear", sigma=1.5, drift=0.7)
        bd, bt = effective_drift(p, 0.0, np.zeros((1, 1)), 0, 0, 0.1)
        assert abs(bd[0]) < 1e-10 and bt[0] == pytest.approx(0.7)

    def test_no_jumps(self):
        bd, _ = effective_drift(canonical_problem("linear_advection"), 0.0, np.zeros((1, 1)), 0, 0, 0.25)
        assert bd[0] == 0.0

    def test_one_sided_jumps(self):
        p = one_sided(canonical_problem("fractional_linear", sigma=0.5))
        bd, bt = effective_drift(p, 0.0, np.zeros((1, 1)), 0, 0, 0.25)
        assert bd[0] == pytest.approx(1.0, rel=1e-10)
        assert bt[0] == pytest.approx(-1.0, rel=1e-10)


class TestNonlocalWeights:
    def test_zero_amplitude_puts_all_mass_at_centre(self):
        p = canonical_problem("fractional_linear", sigma=0.5).with_(eta=lambda t, x, a, b, z: 0 * z)
        w = nonlocal_weights(p, 0.0, [0.0], 0, 0, 0.25, 0.125)
        assert list(w) == [(0,)]
        assert w[(0,)] == pytest.approx(truncated_mass(p.measure, 0.25), rel=1e-12)

    def test_grid_aligned_jumps_are_exact(self):
        dx = 0.125
        p = canonical_problem("fractional_linear", sigma=0.5).with_(
            eta=lambda t, x, a, b, z: dx * np.round(z / dx))
        w = nonlocal_weights(p, 0.0, [0.0], 0, 0, 0.25, dx)
        for k in range(2, 9):
            lo, hi = max(0.25, (k - 0.5) * dx), min(1.0, (k + 0.5) * dx)
            mass, _ = integrate.quad(lambda z: z**-1.5, lo, hi, epsabs=1e-14)
            assert w[(k,)] == pytest.approx(mass, rel=1e-12)
            assert w[(-k,)] == pytest.approx(mass, rel=1e-12)

    def test_sum_is_truncated_mass(self):
        p = canonical_problem("fractional_linear", sigma=0.5)
        w = nonlocal_weights(p, 0.0, [0.0], 0, 0, 0.25, 0.25)
        assert sum(w.values()) == pytest.approx(4.0, abs=1e-8)
        assert all(v >= 0 for v in w.values())

    @pytest.mark.parametrize("sigma", [0.5, 1.0, 1.5])
    def test_off_centre_sum_bounded_by_gamma(self, sigma):
        p = canonical_problem("fractional_linear", sigma=sigma)
        ratios = []
        for dx in (1 / 8, 1 / 16, 1 / 32, 1 / 64):
            w = nonlocal_weights(p, 0.0, [0.0], 0, 0, dx, dx)
            off = sum(v for k, v in w.items() if k != (0,))
            ratios.append(off * dx / gamma_factor(sigma, dx))
        # with delta = dx the measured K_N stays below 2/sigma at every level
        assert max(ratios) <= 2.0 / sigma


class TestCFL:
    def test_implicit_without_discount_is_unconditional(self):
        p = canonical_problem("fractional_linear", sigma=1.5)
        g = Grid.create(1 / 16, 1.0, 2.0, steps=1)
        assert cfl_check(p, g, SchemeParams()).satisfied

    def test_explicit_single_drift(self):
        g = Grid.create(0.1, 0.2, 1.0, steps=1)
        rep = cfl_check(canonical_problem("linear_advection", horizon=0.2), g, SchemeParams(theta=0, vartheta=0))
        assert not rep.satisfied
        assert rep.worst_ratio == pytest.approx(2.0)
        assert rep.suggested_dt == pytest.approx(0.1)

    def test_explicit_all_zero(self):
        g = Grid.create(0.25, 1.0, 1.0, steps=2)
        rep = cfl_check(named_problem("stationary"), g, SchemeParams(theta=0, vartheta=0))
        assert rep.satisfied and rep.worst_ratio == 0.0


class TestAssembler:
    def test_coefficients_nonnegative_under_cfl(self):
        p = canonical_problem("two_player_nonconvex", sigma=0.5)
        g = Grid.create(1 / 8, 1.0, 2.0, steps=64)
        params = SchemeParams(theta=0.0, vartheta=0.5)
        asm = StencilAssembler(p, g, 1 / 8)
        assert cfl_check(p, g, params, asm).satisfied
        for ia, ib in p.pairs:
            lvl = asm.level(ia, ib, 0)
            assert check_coefficients(lvl, lvl, g.dt, 0.0, 0.5).nonnegative

    def test_fault_injection_is_detected(self):
        p = canonical_problem("fractional_linear", sigma=0.5)
        g = Grid.create(1 / 8, 1.0, 2.0, steps=8)
        asm = StencilAssembler(p, g, 1 / 8, stencil_hook=negate_one_weight)
        lvl = asm.level(0, 0, 0)
        assert not check_coefficients(lvl, lvl, g.dt, 1.0, 1.0).nonnegative

    def test_thread_count_does_not_change_operators(self):
        p = canonical_problem("two_player_nonconvex", sigma=1.5)
        g = Grid.create(1 / 8, 1.0, 2.0, steps=4)
        a1 = StencilAssembler(p, g, 1 / 8, threads=1).level(1, 0, 0)
        a4 = StencilAssembler(p, g, 1 / 8, threads=4).level(1, 0, 0)
        assert (a1.J != a4.J).nnz == 0
        assert np.array_equal(a1.drift_sum, a4.drift_sum)

    def test_operator_is_exact_on_linear_data(self):
        p = canonical_problem("two_player_nonconvex", sigma=0.5)
        g = Grid.create(1 / 8, 1.0, 2.0, steps=4)
        lvl = StencilAssembler(p, g, 1 / 4).level(0, 1, 0)
        u = g.axis()
        # jumps plus compensated drift reproduce the physical drift on linear data
        inner = np.abs(g.axis()) <= 0.5
        bt_total = (lvl.D @ u + lvl.J @ u)[inner]
        b = p.eval_b(0.0, g.nodes(), 0, 1)[inner, 0]
        assert np.allclose(bt_total, b, atol=1e-10)
