"""Property suites: comparison, stability, time regularity, partition of unity, coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .analysis import Coupling, ModulusSpec
from .grid import Grid, tent_stencil
from .levy import truncated_mass
from .params import SchemeParams
from .problem import ControlProblem, canonical_problem
from .stencil import cfl_check, check_coefficients, nonlocal_weights
from .stepper import Scheme, stability_bound


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"{self.name}: {status} (value {self.value:.6g}, threshold {self.threshold:.6g}) {self.detail}".rstrip()


def comparison_suite(problem: ControlProblem, grid: Grid, params: SchemeParams, *, pairs: int = 100,
                     seed: int = 0, threads: int = 1, scheme: Scheme | None = None) -> CheckResult:
    """Solve from ordered random initial pairs and report the worst ordering violation."""
    sch = scheme or Scheme(problem, grid, params, threads=threads)
    tol = 10 * params.fixed_point_tol
    rng = np.random.default_rng(seed)
    base = problem.eval_u0(grid.nodes())
    worst = -math.inf
    for _ in range(pairs):
        lower = base + rng.normal(scale=0.25, size=base.shape)
        bump = rng.uniform(0.0, 0.5, size=base.shape) * (rng.random(base.shape) < 0.5)
        U = sch.solve(lower).values
        V = sch.solve(lower + bump).values
        worst = max(worst, float(np.max(U - V)))
    return CheckResult("comparison", worst <= tol, worst, tol, f"{pairs} ordered pairs")


def stability_suite(problem: ControlProblem, grid: Grid, params: SchemeParams, *, threads: int = 1,
                    field=None) -> CheckResult:
    """``max |U^n| <= ||u0|| + t_n sup|f|`` at every level."""
    fld = field or Scheme(problem, grid, params, threads=threads).solve()
    bound = stability_bound(problem, grid)
    excess = float(np.max(np.max(np.abs(fld.values), axis=1) - bound))
    tol = 10 * params.fixed_point_tol
    return CheckResult("stability", excess <= tol, excess, tol, "max over steps of sup|U^n| - bound")


def time_regularity_constants(problem: ControlProblem, dxs, coupling: Coupling, *,
                              box_radius: float = 4.0, threads: int = 1) -> list[float]:
    """Per level, ``max_n ||U^n - U^0|| / omega_bar(t_n)``."""
    modulus = ModulusSpec(problem.sigma)
    out = []
    for dx in dxs:
        g = coupling.grid(dx, problem.horizon, box_radius, problem.space_dim)
        fld = Scheme(problem, g, coupling.params(dx), threads=threads).solve()
        diff = np.max(np.abs(fld.values[1:] - fld.values[0]), axis=1)
        out.append(float(np.max(diff / modulus(g.times()[1:]))))
    return out


def time_regularity_suite(problem: ControlProblem, dxs, coupling: Coupling, *, box_radius: float = 4.0,
                          threads: int = 1, max_ratio: float = 3.0) -> CheckResult:
    ks = time_regularity_constants(problem, dxs, coupling, box_radius=box_radius, threads=threads)
    ratio = max(ks) / min(ks) if min(ks) > 0 else (1.0 if max(ks) == 0 else math.inf)
    detail = "constants " + ", ".join(f"{k:.4g}" for k in ks)
    return CheckResult("time_regularity", ratio <= max_ratio, ratio, max_ratio, detail)


def tent_partition_suite(samples: int = 1_000_000, dim: int = 1, seed: int = 0,
                         dx: float = 0.1) -> CheckResult:
    pts = (qmc.Halton(d=dim, scramble=True, seed=seed).random(samples) - 0.5) * 20.0
    worst = 0.0
    for chunk in np.array_split(pts, max(1, samples // 100_000)):
        _, w = tent_stencil(chunk, dx)
        worst = max(worst, float(np.max(np.abs(w.sum(axis=1) - 1.0))))
    return CheckResult("tent_partition", worst <= 1e-12, worst, 1e-12, f"{samples} points")


def kappa_partition_suite(assemblies: int = 1000, seed: int = 0) -> CheckResult:
    """``sum_k kappa_k`` against the truncated mass on randomly drawn stencils."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    problems = {}
    for _ in range(assemblies):
        sigma = float(rng.choice([0.5, 1.0, 1.5]))
        name = str(rng.choice(["fractional_linear", "two_player_nonconvex"]))
        kind = str(rng.choice(["truncated_stable", "tempered_stable"]))
        key = (sigma, name, kind)
        if key not in problems:
            problems[key] = canonical_problem(name, sigma=sigma, kind=kind, tempering=2.0)
        p = problems[key]
        dx = 2.0 ** -int(rng.integers(3, 7))
        delta = min(1.0, dx * 2.0 ** int(rng.integers(0, 3)))
        x = dx * int(rng.integers(-40, 41))
        ia, ib = p.pairs[int(rng.integers(len(p.pairs)))]
        w = nonlocal_weights(p, 0.0, [x], ia, ib, delta, dx)
        mass = truncated_mass(p.measure, delta)
        worst = max(worst, abs(sum(w.values()) - mass) / mass)
    return CheckResult("kappa_partition", worst <= 1e-6, worst, 1e-6, f"{assemblies} stencils, relative")


def nonnegativity_suite(scheme: Scheme, levels=None) -> CheckResult:
    """All coefficients of the positive form must be nonnegative when the CFL check passes."""
    p, g, params = scheme.problem, scheme.grid, scheme.params
    cfl = cfl_check(p, g, params, scheme.assembler)
    if levels is None:
        levels = [1] if p.time_homogeneous else sorted({1, max(1, g.steps // 2), g.steps})
    th, vt = (1.0, 1.0) if params.diffusion_correction else (params.theta, params.vartheta)
    worst, negatives, witness = math.inf, 0, None
    for n in levels:
        for ia, ib in p.pairs:
            rep = check_coefficients(scheme.assembler.level(ia, ib, n - 1),
                                     scheme.assembler.level(ia, ib, n), g.dt, th, vt)
            negatives += rep.negative_count
            if rep.min_coefficient < worst:
                worst, witness = rep.min_coefficient, rep.witness
    passed = cfl.satisfied and negatives == 0
    detail = f"cfl ratio {cfl.worst_ratio:.4g}; {negatives} negative coefficients"
    if witness is not None and negatives:
        detail += f"; worst at {witness}"
    return CheckResult("coefficient_nonnegativity", passed, worst, 0.0, detail)


def negate_one_weight(weights):
    """Fault-injection hook: flip the sign of the largest off-centre jump weight."""
    from dataclasses import replace

    kappa = np.array(weights.kappa, dtype=float)
    off = np.any(weights.nonlocal_offsets != 0, axis=-1)
    if not np.any(off):
        return weights
    k = int(np.argmax(np.where(off, kappa, -np.inf)))
    kappa[k] = -kappa[k]
    return replace(weights, kappa=kappa)


def run_checks(problem: ControlProblem, grid: Grid, params: SchemeParams, *, pairs: int = 100,
               seed: int = 0, threads: int = 1, levels: int = 3, partition_samples: int = 1_000_000,
               stencil_samples: int = 1000, stencil_hook=None) -> list[CheckResult]:
    scheme = Scheme(problem, grid, params, threads=threads, stencil_hook=stencil_hook, check_cfl=False)
    results = [nonnegativity_suite(scheme)]
    if not results[0].passed:
        return results
    results.append(stability_suite(problem, grid, params, field=scheme.solve()))
    results.append(comparison_suite(problem, grid, params, pairs=pairs, seed=seed, scheme=scheme))
    # explicit components need dt to shrink like the CFL bound
    power = 1.0 if params.theta == params.vartheta == 1.0 else max(1.0, problem.sigma)
    coupling = Coupling(dt_factor=grid.dt / grid.dx**power, dt_power=power,
                        theta=params.theta, vartheta=params.vartheta,
                        delta_rule=params.delta_rule if params.delta_rule != "manual" else "dx",
                        fixed_point_tol=params.fixed_point_tol)
    dxs = [grid.dx / 2**k for k in range(levels)]
    results.append(time_regularity_suite(problem, dxs, coupling, box_radius=grid.box_radius,
                                         threads=threads))
    results.append(tent_partition_suite(partition_samples, grid.dim, seed))
    results.append(kappa_partition_suite(stencil_samples, seed))
    return results


__all__ = ["CheckResult", "comparison_suite", "kappa_partition_suite", "negate_one_weight",
           "nonnegativity_suite", "run_checks", "stability_suite", "tent_partition_suite",
           "time_regularity_constants", "time_regularity_suite"]
