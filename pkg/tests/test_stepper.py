import numpy as np
import pytest

from nonlocal_isaacs import (CFLViolation, ConfigurationError, DiffusionCorrection, Grid, LevyMeasure,
                             MonotonicityError, Scheme, SchemeParams, StencilAssembler, canonical_problem,
                             named_problem, solve, stability_bound)
from nonlocal_isaacs.stepper import discrete_hamiltonian

EXPLICIT = SchemeParams(theta=0.0, vartheta=0.0)


def decay_grid():
    return Grid.create(0.25, 1.0, 2.0, steps=10)


class TestHamiltonian:
    def levels(self, problem, grid):
        asm = StencilAssembler(problem, grid, grid.dx)
        return {pair: (asm.level(*pair, 0), asm.level(*pair, 1)) for pair in problem.pairs}

    def test_pure_decay(self):
        p, g = named_problem("pure_decay"), decay_grid()
        u = np.ones(g.size)
        assert discrete_hamiltonian(u, u, 3, self.levels(p, g), EXPLICIT) == pytest.approx(1.0)

    def test_product_source_table(self):
        p = named_problem("stationary").with_(controls_a=(-1, 1), controls_b=(-1, 1),
                                               f=lambda t, x, a, b: np.full(np.shape(x)[:-1], float(a * b)))
        g = decay_grid()
        u = np.zeros(g.size)
        assert discrete_hamiltonian(u, u, 0, self.levels(p, g), EXPLICIT) == pytest.approx(1.0)

    def test_all_zero(self):
        p, g = named_problem("stationary"), decay_grid()
        u = np.zeros(g.size)
        assert discrete_hamiltonian(u, u, 2, self.levels(p, g), SchemeParams()) == 0.0


class TestStep:
    @pytest.mark.parametrize("params", [EXPLICIT, SchemeParams()])
    def test_decay_one_step(self, params):
        s = Scheme(named_problem("pure_decay"), decay_grid(), params)
        assert np.allclose(s.step(np.ones(s.grid.size), 1), 0.9, atol=1e-12)

    def test_advection_shifts_linear_data(self):
        p = canonical_problem("linear_advection", horizon=0.05)
        g = Grid.create(0.1, 0.05, 2.0, steps=1)
        s = Scheme(p, g, EXPLICIT)
        x = g.axis()
        new = s.step(x.copy(), 1)
        inner = slice(1, -1)
        assert np.allclose(new[inner], x[inner] + g.dt, atol=1e-13)

    def test_zero_data_stays_zero(self):
        p = canonical_problem("fractional_linear", sigma=1.5)
        g = Grid.create(0.125, 1.0, 2.0, steps=4)
        s = Scheme(p, g)
        assert np.array_equal(s.step(np.zeros(g.size), 1), np.zeros(g.size))


class TestSolve:
    def test_stationary_keeps_initial_data(self):
        p, g = named_problem("stationary"), decay_grid()
        fld = solve(p, g, EXPLICIT)
        assert np.array_equal(fld.final, fld.values[0])

    @pytest.mark.parametrize("params", [EXPLICIT, SchemeParams()])
    def test_decay_over_unit_horizon(self, params):
        fld = solve(named_problem("pure_decay"), decay_grid(), params)
        assert np.allclose(fld.final, 0.9**10, atol=1e-10)

    def test_fractional_linear_respects_stability_bound(self):
        p = canonical_problem("fractional_linear", sigma=0.5)
        g = Grid.create(1 / 16, 1.0, 4.0, steps=16)
        fld = solve(p, g)
        assert np.all(np.max(np.abs(fld.values), axis=1) <= stability_bound(p, g) + 1e-9)

    def test_explicit_cfl_violation_is_rejected(self):
        p = canonical_problem("linear_advection", horizon=0.2)
        g = Grid.create(0.1, 0.2, 1.0, steps=1)
        with pytest.raises(CFLViolation) as info:
            solve(p, g, EXPLICIT)
        assert info.value.suggested_dt == pytest.approx(0.1)

    def test_horizon_mismatch_is_rejected(self):
        with pytest.raises(ConfigurationError):
            Scheme(named_problem("pure_decay"), Grid.create(0.25, 2.0, 2.0, steps=4))

    def test_game_iteration_meets_its_residual(self):
        p = canonical_problem("two_player_nonconvex", sigma=0.5, horizon=0.25)
        g = Grid.create(1 / 8, 0.25, 4.0, steps=4)
        s = Scheme(p, g, SchemeParams(fixed_point_tol=1e-12))
        fld = s.solve()
        assert np.all(np.isfinite(fld.values))
        assert max(st.residual for st in s.stats) <= 1e-11

    def test_policy_and_fixed_point_agree_for_one_player(self):
        base = canonical_problem("fractional_linear", sigma=0.5, horizon=0.25)
        p = base.with_(controls_a=(-1.0, 0.0, 1.0),
                       b=lambda t, x, a, b: np.full(np.shape(x), a))
        g = Grid.create(1 / 8, 0.25, 4.0, steps=4)
        pol = solve(p, g, SchemeParams(implicit_solver="policy", fixed_point_tol=1e-12))
        fix = solve(p, g, SchemeParams(implicit_solver="fixed_point", fixed_point_tol=1e-12))
        assert np.max(np.abs(pol.final - fix.final)) < 1e-9

    def test_restart_from_slice(self):
        p = canonical_problem("fractional_linear", sigma=1.5)
        g = Grid.create(1 / 8, 1.0, 2.0, steps=8)
        s = Scheme(p, g)
        full = s.solve()
        again = Scheme(p, g).solve(full.values[4], start=4)
        assert np.array_equal(again.final, full.final)


class TestDiffusionCorrection:
    def test_no_jumps_is_no_op(self):
        p, g = canonical_problem("linear_advection"), decay_grid()
        corr = DiffusionCorrection(p, g, 0.25)
        op, extra = corr.operator(0.0, 0, 0)
        assert op.nnz == 0 and not extra.any()

    def test_half_second_moment(self):
        p = canonical_problem("fractional_linear", sigma=0.5)
        a = DiffusionCorrection(p, decay_grid(), 0.25).a_delta(0.0, [0.0], 0, 0)
        assert a[0, 0] == pytest.approx(1 / 12, rel=1e-10)

    def test_second_difference_on_square(self):
        g = Grid.create(1.0, 1.0, 5.0, steps=1)
        corr = DiffusionCorrection(canonical_problem("fractional_linear"), g, 0.25)
        w = corr.local_weights(np.array([[1.0]]))
        x = g.axis()
        lap = sum(v * ((x + k[0]) ** 2 - x**2) for k, v in w.items())
        assert np.allclose(lap, 2.0)

    def test_non_dominant_matrix_is_rejected(self):
        g = Grid.create(0.5, 1.0, 1.0, steps=1, dim=2)
        p = canonical_problem("fractional_linear")
        corr = DiffusionCorrection(p.with_(space_dim=2, measure=LevyMeasure.truncated_stable(0.5, jump_dim=2)), g, 0.5)
        with pytest.raises(MonotonicityError):
            corr.local_weights(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_corrected_scheme_requires_full_implicitness(self):
        with pytest.raises(ConfigurationError):
            SchemeParams(theta=0.5, diffusion_correction=True)

    def test_corrected_scheme_runs_and_is_stable(self):
        p = canonical_problem("smooth_u0_variant", sigma=1.5)
        g = Grid.create(1 / 16, 1.0, 4.0, steps=16)
        fld = solve(p, g, SchemeParams(diffusion_correction=True, delta=0.25, delta_rule="manual"))
        assert np.all(np.max(np.abs(fld.values), axis=1) <= stability_bound(p, g) + 1e-9)
