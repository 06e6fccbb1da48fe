import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nonlocal_isaacs import (ConfigurationError, LevyMeasure, ball_integral, gamma_factor, shell_integral,
                             small_jump_second_moment, truncated_mass)


def stable(sigma):
    return LevyMeasure.truncated_stable(sigma)


class TestTruncatedMass:
    def test_half_order_quarter_radius(self):
        assert truncated_mass(stable(0.5), 0.25) == pytest.approx(4.0, rel=1e-12)

    def test_full_radius_is_empty(self):
        for s in (0.5, 1.0, 1.5):
            assert truncated_mass(stable(s), 1.0) == 0.0

    def test_three_halves(self):
        assert truncated_mass(stable(1.5), 0.5) == pytest.approx((4 / 3) * (0.5**-1.5 - 1), rel=1e-12)

    def test_tempered_against_scipy(self):
        m = LevyMeasure.tempered_stable(0.7, 1.0, 2.0)
        ref, _ = integrate.quad(lambda z: 2 * math.exp(-2 * z) / z**1.7, 0.1, np.inf, epsabs=1e-13)
        assert truncated_mass(m, 0.1) == pytest.approx(ref, rel=1e-9)

    def test_rejects_bad_delta(self):
        with pytest.raises(ConfigurationError):
            truncated_mass(stable(0.5), 0.0)


class TestSecondMoment:
    def test_half_order(self):
        assert small_jump_second_moment(stable(0.5), 0.25) == pytest.approx(1 / 6, rel=1e-12)

    def test_order_one(self):
        assert small_jump_second_moment(stable(1.0), 0.5) == pytest.approx(1.0, rel=1e-12)

    def test_vanishes_with_radius(self):
        assert small_jump_second_moment(stable(1.5), 1e-12) < 1e-5


@pytest.mark.parametrize("sigma, delta, expected", [(1.5, 0.01, 10.0), (0.5, 0.3, 1.0), (1.0, math.exp(-2), 2.0)])
def test_gamma_factor(sigma, delta, expected):
    assert gamma_factor(sigma, delta) == pytest.approx(expected, rel=1e-12)


class TestShellIntegral:
    def test_constant_matches_mass(self):
        m = stable(1.5)
        assert shell_integral(m, 0.2, lambda z: np.ones(z.shape[:-1])) == pytest.approx(truncated_mass(m, 0.2), rel=1e-10)

    def test_odd_integrand_vanishes(self):
        assert abs(shell_integral(stable(0.5), 0.1, lambda z: z[..., 0])) < 1e-10

    def test_second_moment_outside(self):
        val = shell_integral(stable(0.5), 0.25, lambda z: np.sum(z**2, axis=-1))
        assert val == pytest.approx(2 * (2 / 3) * (1 - 0.25**1.5), rel=1e-10)

    def test_ball_integral_second_moment(self):
        m = stable(1.5)
        val = ball_integral(m, 0.3, lambda z: z[..., 0] ** 2)
        assert val == pytest.approx(small_jump_second_moment(m, 0.3), rel=1e-9)

    def test_two_dimensional_mass(self):
        m = LevyMeasure.truncated_stable(0.5, jump_dim=2)
        val = shell_integral(m, 0.25, lambda z: np.ones(z.shape[:-1]))
        assert val == pytest.approx(truncated_mass(m, 0.25), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(sigma=st.floats(0.1, 1.9), delta=st.floats(0.01, 0.99))
def test_mass_matches_antiderivative(sigma, delta):
    exact = 2 * (delta**-sigma - 1) / sigma
    assert truncated_mass(stable(sigma), delta) == pytest.approx(exact, rel=1e-9)


def test_density_bound_and_rho():
    m = stable(1.5)
    z = np.linspace(0.01, 0.99, 50)[:, None]
    assert np.all(m.density(z) <= m.density_constant / np.abs(z[:, 0]) ** 2.5 * (1 + 1e-12))
    assert np.all(m.rho(z) >= 0)
