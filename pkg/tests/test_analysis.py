import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cos_fractional_factor
from nonlocal_isaacs import (ConfigurationError, Coupling, Grid, ModulusSpec, SeparableTarget, canonical_problem,
                             consistency_order, fit_rate, manufactured_source, named_problem, omega_bar,
                             refinement_study, theoretical_rate, truncation_distance)
from nonlocal_isaacs.problem import SmoothFunction


class TestTheory:
    def test_high_order_rough_data(self):
        r = theoretical_rate(1.5, "constant", False)
        assert (r.time, r.space) == pytest.approx((1 / 3, 0.25))

    @pytest.mark.parametrize("dep", ["constant", "x_only", "xt_dependent"])
    def test_low_order(self, dep):
        r = theoretical_rate(0.5, dep, False)
        assert (r.time, r.space) == (0.5, 0.5)

    def test_high_order_smooth_data(self):
        r = theoretical_rate(1.5, "constant", True)
        assert (r.time, r.space) == pytest.approx((0.5, 0.25))

    def test_critical_order_has_log(self):
        assert theoretical_rate(1.0, "constant", True).log_factor

    def test_rejects_out_of_range(self):
        with pytest.raises(ConfigurationError):
            theoretical_rate(2.0, "constant", True)

    def test_modulus_branches(self):
        assert ModulusSpec(0.5).branch == "linear"
        assert omega_bar(0.25, 0.5) == pytest.approx(0.25)
        assert omega_bar(0.25, 1.0) == pytest.approx(0.25 * (1 + math.log(4)))
        assert omega_bar(0.125, 1.5) == pytest.approx(0.125 ** (2 / 3))
        assert omega_bar(0.0, 1.5) == 0.0


@settings(max_examples=40, deadline=None)
@given(slope=st.floats(0.1, 3.0), scale=st.floats(1e-3, 1e3))
def test_fit_rate_recovers_power_laws(slope, scale):
    h = 2.0 ** -np.arange(3, 8)
    fitted, resid = fit_rate(h, scale * h**slope)
    assert fitted == pytest.approx(slope, abs=1e-9)
    assert resid < 1e-9


class TestManufactured:
    def constant_profile(self):
        return SmoothFunction(lambda x: np.ones(np.shape(x)[:-1]), lambda x: np.zeros(np.shape(x)),
                              lambda x: np.zeros(np.shape(x) + (1,)))

    def test_constant_with_unit_discount(self):
        p = canonical_problem("fractional_linear", sigma=1.5).with_(c=lambda t, x, a, b: np.ones(np.shape(x)[:-1]))
        k = 2.5
        m = manufactured_source(p, SeparableTarget(lambda t: k, lambda t: 0.0, self.constant_profile()))
        assert np.allclose(m.eval_f(0.3, np.array([[0.0], [1.7]]), 0, 0), k, atol=1e-12)

    def test_linear_profile_with_drift(self):
        p = canonical_problem("fractional_linear", sigma=0.5, drift=1.0)
        lin = SmoothFunction(lambda x: x[..., 0], lambda x: np.ones(np.shape(x)), lambda x: np.zeros(np.shape(x) + (1,)))
        m = manufactured_source(p, SeparableTarget(lambda t: 1.0, lambda t: 0.0, lin))
        assert np.allclose(m.eval_f(0.0, np.array([[0.0], [1.0], [-2.0]]), 0, 0), -1.0, atol=1e-12)

    @pytest.mark.parametrize("sigma", [0.5, 1.5])
    def test_decaying_cosine_matches_series(self, sigma):
        p = canonical_problem("fractional_linear", sigma=sigma)
        cos = SmoothFunction(lambda x: np.cos(x[..., 0]), lambda x: -np.sin(x),
                             lambda x: -np.cos(x)[..., None])
        m = manufactured_source(p, SeparableTarget(lambda t: math.exp(-t), lambda t: -math.exp(-t), cos))
        t, x = 0.4, np.array([[0.0], [0.9], [2.0]])
        want = -math.exp(-t) * np.cos(x[:, 0]) * (1 + cos_fractional_factor(sigma))
        assert np.allclose(m.eval_f(t, x, 0, 0), want, atol=1e-9)


class TestStudies:
    def test_stationary_study_is_degenerate(self):
        rep = refinement_study(named_problem("stationary"), 0.25, 3, Coupling(), box_radius=2.0)
        assert rep.degenerate and rep.passed
        assert "degenerate" in rep.table()

    def test_zero_jumps_truncation_is_degenerate(self):
        p = canonical_problem("fractional_linear", sigma=0.5).with_(eta=lambda t, x, a, b, z: 0 * z)
        g = Grid.create(1 / 16, 1.0, 2.0, steps=2)
        rep = truncation_distance(p, [0.5, 0.25, 0.125, 1 / 16], g)
        assert rep.degenerate and rep.passed

    def test_study_needs_three_levels(self):
        with pytest.raises(ConfigurationError):
            refinement_study(named_problem("stationary"), 0.25, 2, Coupling())

    def test_report_csv_is_parseable(self):
        rep = refinement_study(canonical_problem("linear_advection", horizon=0.25), 0.25, 3,
                               Coupling(dt_factor=0.5, theta=0.0, vartheta=0.0), box_radius=2.0)
        lines = rep.to_csv().splitlines()
        assert lines[0] == "dx,dt,delta,error"
        assert any(line.startswith("fitted,") for line in lines)


class TestConsistency:
    @pytest.mark.parametrize("ingredient, sigma", [("truncation", 0.5), ("drift", 1.5), ("quadrature", 0.5)])
    def test_slopes(self, ingredient, sigma):
        res = consistency_order(ingredient, sigma)
        assert res.within(0.15), (res.slope, res.expected)

    def test_unknown_ingredient(self):
        with pytest.raises(ConfigurationError):
            consistency_order("magic", 0.5)
