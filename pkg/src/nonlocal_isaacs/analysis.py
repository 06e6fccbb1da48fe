"""Convergence-rate harness: rate targets, fitting, manufactured solutions, studies."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial import hermite

from .errors import ConfigurationError
from .grid import Grid, interpolate
from .levy import LevyMeasure, ball_integral, shell_integral
from .params import SchemeParams
from .problem import ControlProblem, SmoothFunction, gaussian_bump, k_u0_estimate, nonlocal_oracle
from .stencil import _node_jump, drift_weights
from .stepper import DiffusionCorrection, Scheme

RATE_TOLERANCE = 0.1


# ---------------------------------------------------------------------------
# theory


@dataclass(frozen=True)
class RateTarget:
    time: float
    space: float
    log_factor: bool
    branch: str


def theoretical_rate(sigma: float, eta_dependence: str, k_u0_finite: bool) -> RateTarget:
    """Time and space exponents of the error bound for the given regime."""
    if not 0.0 <= sigma < 2.0:
        raise ConfigurationError(f"sigma must lie in [0, 2), got {sigma}")
    if eta_dependence not in ("xt_dependent", "x_only", "constant"):
        raise ConfigurationError(f"unknown eta_dependence {eta_dependence!r}")
    if sigma < 1.0:
        return RateTarget(0.5, 0.5, False, "sigma<1")
    if sigma == 1.0:
        return RateTarget(0.5, 0.5, True, "sigma=1")
    if eta_dependence == "xt_dependent":
        r = (2.0 - sigma) / (2.0 * sigma)
        return RateTarget(r, r, False, "xt_dependent")
    if eta_dependence == "x_only":
        time = 0.5 if k_u0_finite else 1.0 / (2.0 * sigma)
        return RateTarget(time, (2.0 - sigma) / (2.0 * sigma), False, "x_only")
    time = 0.5 if k_u0_finite else 1.0 / (2.0 * sigma)
    return RateTarget(time, (2.0 - sigma) / 2.0, False, "constant")


@dataclass(frozen=True)
class ModulusSpec:
    """Time modulus of continuity of the solution for order ``sigma``."""

    sigma: float

    @property
    def branch(self) -> str:
        if self.sigma < 1.0:
            return "linear"
        if self.sigma == 1.0:
            return "log"
        return "holder"

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        pos = r > 0
        rp = r[pos]
        if self.branch == "linear":
            out[pos] = rp
        elif self.branch == "log":
            out[pos] = rp * (1.0 + np.abs(np.log(rp)))
        else:
            out[pos] = rp ** (1.0 / self.sigma)
        return out


def omega_bar(r, sigma: float):
    return ModulusSpec(sigma)(r)


def fit_rate(h, err) -> tuple[float, float]:
    """Least-squares slope of ``log err`` against ``log h`` and the RMS residual."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.size < 2:
        raise ConfigurationError("need at least two points to fit a rate")
    lx, ly = np.log(h), np.log(err)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + icpt)) ** 2)))
    return float(slope), resid


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass(frozen=True)
class SeparableTarget:
    """``v(t, x) = time(t) * profile(x)``."""

    time: Callable
    time_derivative: Callable
    profile: SmoothFunction

    def __call__(self, t, x):
        return self.time(t) * self.profile(x)


def manufactured_source(problem: ControlProblem, target: SeparableTarget, *, tol: float = 1e-12,
                        split: float = 1e-4) -> ControlProblem:
    """Replace ``f`` so that ``target`` solves the equation for every control pair.

    The nonlocal term is evaluated by :func:`nonlocal_oracle` and memoised per
    control pair and point set.
    """
    a_index = {a: i for i, a in enumerate(problem.controls_a)}
    b_index = {b: i for i, b in enumerate(problem.controls_b)}
    phi = target.profile
    cache: dict = {}

    def jump(t, x, ia, ib):
        key = (ia, ib, x.shape, x.tobytes(), t if problem.eta_dependence == "xt_dependent" else None)
        if key not in cache:
            cache[key] = nonlocal_oracle(problem, phi, t, x, ia, ib, split=split, tol=tol)
        return cache[key]

    def f(t, x, a, b):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        flat = x.reshape(-1, problem.space_dim)
        ia, ib = a_index[a], b_index[b]
        T, dT = target.time(t), target.time_derivative(t)
        val = (dT * phi(flat) + problem.eval_c(t, flat, ia, ib) * T * phi(flat)
               - T * np.sum(problem.eval_b(t, flat, ia, ib) * phi.gradient(flat), axis=-1)
               - T * jump(t, flat, ia, ib))
        return val.reshape(shape)

    return replace(problem, f=f, u0=lambda x: target.time(0.0) * phi(x),
                   time_homogeneous=False, name=problem.name + "+manufactured")


# ---------------------------------------------------------------------------
# refinement studies


@dataclass(frozen=True)
class Coupling:
    """How ``dt`` and ``delta`` follow ``dx`` along a refinement path.

    ``dt = dt_factor * dx**dt_power``.  With ``delta_rule == "manual"`` the
    radius is ``delta_factor * dx**delta_power``; otherwise the named rule.
    """

    dt_factor: float = 1.0
    dt_power: float = 1.0
    delta_rule: str = "dx"
    delta_factor: float = 1.0
    delta_power: float = 1.0
    theta: float = 1.0
    vartheta: float = 1.0
    diffusion_correction: bool = False
    fixed_point_tol: float = 1e-10

    def grid(self, dx: float, horizon: float, box_radius: float, dim: int = 1,
             extension: str = "constant_nearest") -> Grid:
        return Grid.create(dx, horizon, box_radius, dt=self.dt_factor * dx**self.dt_power,
                           dim=dim, extension=extension)

    def params(self, dx: float) -> SchemeParams:
        delta = None
        if self.delta_rule == "manual":
            delta = min(1.0, max(dx, self.delta_factor * dx**self.delta_power))
        return SchemeParams(theta=self.theta, vartheta=self.vartheta, delta=delta,
                            delta_rule=self.delta_rule, fixed_point_tol=self.fixed_point_tol,
                            diffusion_correction=self.diffusion_correction)


@dataclass
class RateReport:
    rows: list[dict]
    fitted: float
    residual: float
    target: RateTarget | None
    threshold: float
    passed: bool
    degenerate: bool = False
    label: str = ""
    notes: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dx", "dt", "delta", "error"])
        for r in self.rows:
            w.writerow([f"{r['dx']:.17g}", f"{r['dt']:.17g}", f"{r['delta']:.17g}", f"{r['error']:.17g}"])
        w.writerow([])
        w.writerow(["fitted", f"{self.fitted:.17g}"])
        w.writerow(["residual", f"{self.residual:.17g}"])
        if self.target is not None:
            w.writerow(["theory_time", f"{self.target.time:.17g}"])
            w.writerow(["theory_space", f"{self.target.space:.17g}"])
            w.writerow(["branch", self.target.branch])
        w.writerow(["threshold", f"{self.threshold:.17g}"])
        w.writerow(["degenerate", str(self.degenerate).lower()])
        w.writerow(["passed", str(self.passed).lower()])
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{self.label}".strip() or "rate study",
                 f"{'dx':>12} {'dt':>12} {'delta':>12} {'error':>14}"]
        for r in self.rows:
            lines.append(f"{r['dx']:12.5g} {r['dt']:12.5g} {r['delta']:12.5g} {r['error']:14.6e}")
        status = "PASS" if self.passed else "FAIL"
        extra = " (degenerate: exact)" if self.degenerate else ""
        lines.append(f"fitted {self.fitted:.4f} vs threshold {self.threshold:.4f}: {status}{extra}")
        lines.extend(self.notes)
        return "\n".join(lines)


def _window(grid: Grid, radius: float) -> np.ndarray:
    return np.all(np.abs(grid.nodes()) <= radius + 1e-12, axis=-1)


def _degenerate_report(rows, label, target, threshold, notes=()):
    return RateReport(rows, math.inf, 0.0, target, threshold, True, True, label, list(notes))


def refinement_study(problem: ControlProblem, base_dx: float, levels: int, coupling: Coupling, *,
                     box_radius: float = 4.0, reference: str = "fine_grid", exact=None,
                     reference_factor: int = 4, threads: int = 1, k_u0_finite: bool | None = None,
                     box_check: bool = False, extension: str = "constant_nearest") -> RateReport:
    """Solve on ``levels`` grids ``dx = base_dx / 2**k`` and fit the error exponent in ``dx``.

    Errors are sup-norm differences at the final time on the coarsest grid's
    nodes with ``|x| <= L/2``.  The study passes when the fitted exponent is
    at least ``min(space, dt_power * time) - 0.1``.
    """
    if levels < 3:
        raise ConfigurationError("a refinement study needs at least three levels")
    if reference not in ("fine_grid", "exact"):
        raise ConfigurationError(f"unknown reference {reference!r}")
    if reference == "exact" and exact is None:
        raise ConfigurationError("reference 'exact' needs the exact solution")
    if reference == "fine_grid" and reference_factor < 4:
        raise ConfigurationError("the fine-grid reference must be at least 4x finer")
    T = problem.horizon
    dxs = [base_dx / 2**k for k in range(levels)]
    coarse = coupling.grid(dxs[0], T, box_radius, problem.space_dim, extension)
    pts = coarse.nodes()[_window(coarse, 0.5 * box_radius)]

    def run(dx, L=box_radius):
        g = coupling.grid(dx, T, L, problem.space_dim, extension)
        sch = Scheme(problem, g, coupling.params(dx), threads=threads)
        fld = sch.solve()
        return g, sch, fld

    if reference == "exact":
        ref_vals = np.asarray(exact(T, pts), dtype=float)
    else:
        g_ref, _, f_ref = run(dxs[-1] / reference_factor)
        ref_vals = interpolate(f_ref.final, g_ref, pts)

    rows = []
    for dx in dxs:
        g, sch, fld = run(dx)
        err = float(np.max(np.abs(interpolate(fld.final, g, pts) - ref_vals)))
        rows.append({"dx": dx, "dt": g.dt, "delta": sch.delta, "error": err})

    if k_u0_finite is None:
        k_u0_finite = problem.measure.is_null or math.isfinite(k_u0_estimate(problem))
    target = theoretical_rate(problem.sigma, problem.eta_dependence, k_u0_finite)
    expected = min(target.space, coupling.dt_power * target.time)
    threshold = expected - RATE_TOLERANCE
    label = f"{problem.name}: sigma={problem.sigma} branch={target.branch}"
    errs = np.array([r["error"] for r in rows])
    if np.all(errs <= 1e-14):
        return _degenerate_report(rows, label, target, threshold)
    slope, resid = fit_rate(dxs, np.maximum(errs, 1e-300))
    notes = []
    if box_check:
        g2, _, f2 = run(dxs[-1], 2 * box_radius)
        err2 = float(np.max(np.abs(interpolate(f2.final, g2, pts) - ref_vals)))
        change = abs(err2 - errs[-1]) / max(errs[-1], 1e-300)
        notes.append(f"box doubling changes the finest error by {100 * change:.2f}%")
    return RateReport(rows, slope, resid, target, threshold, slope >= threshold, False, label, notes)


def truncation_distance(problem: ControlProblem, deltas, grid: Grid, *, theta: float = 1.0,
                        vartheta: float = 1.0, threads: int = 1) -> RateReport:
    """Fit the slope in ``delta`` of the distance to the smallest-``delta`` solution."""
    deltas = sorted((float(d) for d in deltas), reverse=True)
    if len(deltas) < 3:
        raise ConfigurationError("need at least three truncation radii")
    sigma = problem.sigma
    threshold = (1.0 - sigma / 2.0) - RATE_TOLERANCE
    window = _window(grid, 0.5 * grid.box_radius)
    fields = []
    for d in deltas:
        params = SchemeParams(theta=theta, vartheta=vartheta, delta=d, delta_rule="manual")
        fields.append(Scheme(problem, grid, params, threads=threads).solve().final)
    ref = fields[-1]
    rows = [{"dx": grid.dx, "dt": grid.dt, "delta": d, "error": float(np.max(np.abs(u - ref)[window]))}
            for d, u in zip(deltas[:-1], fields[:-1])]
    label = f"{problem.name}: truncation distance, sigma={sigma}"
    errs = np.array([r["error"] for r in rows])
    if np.all(errs <= 1e-14):
        return _degenerate_report(rows, label, None, threshold)
    slope, resid = fit_rate(deltas[:-1], np.maximum(errs, 1e-300))
    return RateReport(rows, slope, resid, None, threshold, slope >= threshold, False, label)


# ---------------------------------------------------------------------------
# consistency of the ingredients


@dataclass
class ConsistencyResult:
    ingredient: str
    sigma: float
    sweep: np.ndarray
    errors: np.ndarray
    slope: float
    expected: float

    def within(self, tol: float = 0.15) -> bool:
        return abs(self.slope - self.expected) <= tol


INGREDIENTS = ("truncation", "drift", "quadrature", "local_correction")


def _one_sided_problem(measure, shift=0.0):
    """1D problem with ``eta(z) = z`` for ``z > 0`` and 0 otherwise."""
    return ControlProblem(
        space_dim=1, controls_a=(0,), controls_b=(0,),
        f=lambda t, x, a, b: np.zeros(np.shape(x)[:-1]),
        c=lambda t, x, a, b: np.zeros(np.shape(x)[:-1]),
        b=lambda t, x, a, b: np.full(np.shape(x), shift),
        eta=lambda t, x, a, b, z: np.where(z > 0, z, 0.0) + 0.0 * x[..., :1],
        u0=lambda x: np.zeros(np.shape(x)[:-1]), measure=measure, horizon=1.0,
        eta_dependence="constant", time_homogeneous=True, name="one_sided")


def _symmetric_problem(measure):
    return replace(_one_sided_problem(measure), eta=lambda t, x, a, b, z: z + 0.0 * x[..., :1],
                   name="symmetric")


def gaussian_derivative(x, k: int) -> np.ndarray:
    """``k``-th derivative of ``exp(-x**2)`` (Hermite form)."""
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    return (-1.0) ** k * hermite.hermval(x, coef) * np.exp(-x * x)


def consistency_order(ingredient: str, sigma: float, sweep=None, x=None, *,
                      phi_derivative: Callable | None = None, scale: float = 1.0,
                      split: float = 1e-4) -> ConsistencyResult:
    """Measure one truncation error over a parameter sweep and fit its slope.

    ``truncation``: small jumps dropped, swept in ``delta``.
    ``drift``: upwind compensating drift, swept in ``dx`` at ``delta = 1/4``.
    ``quadrature``: tent quadrature of the jump integral, swept in ``dx`` at ``delta = 1/4``.
    ``local_correction``: second-order replacement of the small jumps, swept in
    ``delta`` with ``dx = delta/16`` (one-sided jumps so the third-order term survives).

    The test function is given by ``phi_derivative(x, k)`` (default: the
    Gaussian).  Jumps below ``split`` are handled by a fourth-order Taylor
    expansion, which avoids cancellation in ``phi(x+z) - phi(x) - z phi'(x)``.
    """
    if ingredient not in INGREDIENTS:
        raise ConfigurationError(f"unknown ingredient {ingredient!r}")
    deriv = phi_derivative or gaussian_derivative
    meas = LevyMeasure.truncated_stable(sigma, scale)
    if x is None:
        x = np.arange(-16, 17) / 8.0
    x = np.asarray(x, dtype=float).ravel()
    u = deriv(x, 0)
    g = deriv(x, 1)
    noise = 64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(u))))

    def phi(y):
        return deriv(y, 0)

    def small_jumps(problem, delta):
        def eta(z):
            return problem.eval_eta(0.0, np.zeros(1), 0, 0, z)[:, 0]

        def integrand(z):
            e = eta(z)[:, None]
            return phi(x[None] + e) - u[None] - e * g[None]

        total = shell_integral(meas, split, integrand, outer=delta, tol=1e-14, noise=noise) if delta > split else 0.0
        for k in (2, 3, 4):
            mom = float(ball_integral(meas, min(split, delta), lambda z: eta(z) ** k, tol=1e-30))
            total = total + deriv(x, k) / math.factorial(k) * mom
        return total

    errors = []
    if ingredient == "truncation":
        sweep = np.asarray(sweep if sweep is not None else 2.0 ** -np.arange(2, 8), dtype=float)
        prob = _symmetric_problem(meas)
        for d in sweep:
            errors.append(np.max(np.abs(small_jumps(prob, d))))
        expected = 2.0 - sigma
    elif ingredient == "drift":
        sweep = np.asarray(sweep if sweep is not None else 2.0 ** -np.arange(3, 9), dtype=float)
        prob = _one_sided_problem(meas)
        delta = 0.25
        bd = shell_integral(meas, delta, lambda z: np.where(z > 0, z, 0.0), tol=1e-13)
        bt = -float(np.ravel(bd)[0])
        for dx in sweep:
            w = {k[0]: v for k, v in drift_weights([bt], dx).items()}
            approx = sum(v * (phi(x + k * dx) - u) for k, v in w.items())
            errors.append(np.max(np.abs(approx - bt * g)))
        expected = 1.0
    elif ingredient == "quadrature":
        sweep = np.asarray(sweep if sweep is not None else 2.0 ** -np.arange(3, 9), dtype=float)
        prob = _symmetric_problem(meas)
        delta = 0.25
        exact = shell_integral(meas, delta, lambda z: phi(x[None] + z) - u[None], tol=1e-13)
        for dx in sweep:
            offs, kappa, _ = _node_jump(prob, 0.0, np.zeros(1), 0, 0, delta, dx, 10)
            approx = sum(k * (phi(x + o[0] * dx) - u) for o, k in zip(offs, kappa))
            errors.append(np.max(np.abs(approx - exact)))
        expected = 2.0
    else:
        sweep = np.asarray(sweep if sweep is not None else 2.0 ** -np.arange(2, 7), dtype=float)
        prob = _one_sided_problem(meas)
        for d in sweep:
            dx = d / 16.0
            grid = Grid.create(dx, 1.0, 1.0, steps=1)
            a = DiffusionCorrection(prob, grid, d).a_delta(0.0, np.zeros(1), 0, 0)[0, 0]
            second = (phi(x + dx) - 2 * u + phi(x - dx)) / dx**2
            errors.append(np.max(np.abs(small_jumps(prob, d) - a * second)))
        expected = 3.0 - sigma
    errors = np.asarray(errors, dtype=float)
    slope, _ = fit_rate(sweep, errors)
    return ConsistencyResult(ingredient, sigma, sweep, errors, slope, expected)
