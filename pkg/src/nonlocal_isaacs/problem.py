"""Control problem data, canonical test problems and assumption checks.

Coefficient functions broadcast over leading axes: ``f(t, x, a, b)`` receives
points ``x`` of shape ``(..., N)`` and returns shape ``(...)``; ``b`` returns
``(..., N)``; the jump map ``eta(t, x, a, b, z)`` broadcasts ``x`` against
jumps ``z`` of shape ``(..., M)`` and returns ``(..., N)``.  ``a`` and ``b``
are control *values* taken from the finite control sets.  All functions must
be pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError
from .levy import LevyMeasure, ball_integral, shell_integral, small_jump_second_moment

DEPENDENCE = ("xt_dependent", "x_only", "constant")


@dataclass(frozen=True)
class ControlProblem:
    space_dim: int
    controls_a: tuple
    controls_b: tuple
    f: Callable
    c: Callable
    b: Callable
    eta: Callable
    u0: Callable
    measure: LevyMeasure
    horizon: float
    eta_dependence: str = "xt_dependent"
    lipschitz_bound: float | None = None
    time_homogeneous: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.space_dim < 1:
            raise ConfigurationError("space_dim must be positive")
        if not self.controls_a or not self.controls_b:
            raise ConfigurationError("control sets must be nonempty")
        if self.eta_dependence not in DEPENDENCE:
            raise ConfigurationError(f"unknown eta_dependence {self.eta_dependence!r}")
        if self.horizon <= 0:
            raise ConfigurationError("horizon must be positive")
        object.__setattr__(self, "controls_a", tuple(self.controls_a))
        object.__setattr__(self, "controls_b", tuple(self.controls_b))

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(len(self.controls_a)) for j in range(len(self.controls_b))]

    @property
    def sigma(self) -> float:
        return self.measure.sigma

    def _ab(self, ia, ib):
        return self.controls_a[ia], self.controls_b[ib]

    def eval_f(self, t, x, ia, ib) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.f(t, x, *self._ab(ia, ib)), float), x.shape[:-1])

    def eval_c(self, t, x, ia, ib) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.c(t, x, *self._ab(ia, ib)), float), x.shape[:-1])

    def eval_b(self, t, x, ia, ib) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.b(t, x, *self._ab(ia, ib)), float), x.shape)

    def eval_eta(self, t, x, ia, ib, z) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        out = np.asarray(self.eta(t, x, *self._ab(ia, ib), z), dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], z.shape[:-1]) + (self.space_dim,)
        return np.broadcast_to(out, shape)

    def eval_u0(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.u0(x), float), x.shape[:-1])

    def with_(self, **changes) -> ControlProblem:
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# smooth test functions and the nonlocal operator oracle


@dataclass(frozen=True)
class SmoothFunction:
    """A function of ``x`` with optional analytic derivatives.

    Missing derivatives are replaced by central differences.
    """

    value: Callable
    grad: Callable | None = None
    hess: Callable | None = None
    name: str = ""

    def __call__(self, x):
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)

    def gradient(self, x, h: float = 1e-5) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.broadcast_to(np.asarray(self.grad(x), float), x.shape)
        return _fd_gradient(self.value, x, h)

    def hessian(self, x, h: float = 1e-4) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hess is not None:
            return np.broadcast_to(np.asarray(self.hess(x), float), x.shape + (x.shape[-1],))
        return _fd_hessian(self.value, x, h)


def _fd_gradient(fn, x, h):
    n = x.shape[-1]
    out = np.empty(x.shape)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        out[..., i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return out


def _fd_hessian(fn, x, h):
    n = x.shape[-1]
    out = np.empty(x.shape + (n,))
    f0 = fn(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        out[..., i, i] = (fn(x + ei) - 2 * f0 + fn(x - ei)) / h**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            v = (fn(x + ei + ej) - fn(x + ei - ej) - fn(x - ei + ej) + fn(x - ei - ej)) / (4 * h * h)
            out[..., i, j] = out[..., j, i] = v
    return out


def gaussian_bump() -> SmoothFunction:
    """``exp(-|x|^2)`` with exact derivatives."""

    def value(x):
        return np.exp(-np.sum(x * x, axis=-1))

    def grad(x):
        return -2.0 * x * value(x)[..., None]

    def hess(x):
        n = x.shape[-1]
        v = value(x)[..., None, None]
        return v * (4.0 * x[..., :, None] * x[..., None, :] - 2.0 * np.eye(n))

    return SmoothFunction(value, grad, hess, name="gaussian")


def as_smooth(fn) -> SmoothFunction:
    return fn if isinstance(fn, SmoothFunction) else SmoothFunction(fn)


def nonlocal_oracle(problem: ControlProblem, phi, t: float, x, ia: int, ib: int, *,
                    split: float = 1e-4, tol: float = 1e-12, taylor: bool = True) -> np.ndarray:
    """High-accuracy ``I^{a,b}[phi](t, x)`` at points ``x`` of shape ``(P, N)``.

    Jumps with ``|z| < split`` use the second-order Taylor term
    ``0.5 * eta^T D^2 phi eta`` (integrated over the small ball); the rest is
    adaptive shell quadrature.  With ``taylor=False`` the full integrand is
    integrated down to the origin instead (needed for non-smooth ``phi``).
    """
    phi = as_smooth(phi)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    meas = problem.measure
    if meas.is_null:
        return np.zeros(x.shape[0])
    xb = x[None, :, :]
    u = phi(x)
    g = phi.gradient(x)

    def full(z):
        e = problem.eval_eta(t, xb, ia, ib, z[:, None, :])
        return phi(xb + e) - u[None, :] - np.einsum("qpn,pn->qp", e, g)

    noise = 16 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(u))))
    outer = shell_integral(meas, split, full, tol=tol, noise=noise)
    if taylor:
        h = phi.hessian(x)

        def quad(z):
            e = problem.eval_eta(t, xb, ia, ib, z[:, None, :])
            return 0.5 * np.einsum("qpi,pij,qpj->qp", e, h, e)

        inner = ball_integral(meas, split, quad, tol=tol)
    else:
        inner = ball_integral(meas, split, full, tol=tol, noise=noise)
    return np.asarray(outer + inner, dtype=float).reshape(x.shape[0])


def hamiltonian_table(problem: ControlProblem, u, t: float, x) -> np.ndarray:
    """Braced Isaacs expression ``-f + c u - b.Du - I[u]`` for every control pair.

    Returns an array of shape ``(|A|, |B|)`` at the single point ``x``.
    """
    u = as_smooth(u)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    table = np.empty((len(problem.controls_a), len(problem.controls_b)))
    for ia, ib in problem.pairs:
        val = (-problem.eval_f(t, x, ia, ib) + problem.eval_c(t, x, ia, ib) * u(x)
               - np.sum(problem.eval_b(t, x, ia, ib) * u.gradient(x), axis=-1)
               - nonlocal_oracle(problem, u, t, x, ia, ib))
        table[ia, ib] = val[0]
    return table


# ---------------------------------------------------------------------------
# assumption validation


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    worst: float
    witness: tuple | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[AssumptionCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [f"{c.name}: {'pass' if c.passed else 'FAIL'} (worst {c.worst:.6g}) {c.detail}".rstrip()
                for c in self.checks]


def _jump_samples(measure: LevyMeasure, count: int = 24) -> np.ndarray:
    outer = measure.outer_radius
    radii = np.geomspace(1e-4, min(outer, 64.0) * 0.999, count)
    if measure.jump_dim == 1:
        return np.concatenate([radii, -radii])[:, None]
    ang = np.linspace(0, 2 * math.pi, 7)[:-1]
    r, a = np.meshgrid(radii, ang, indexing="ij")
    return np.stack([(r * np.cos(a)).ravel(), (r * np.sin(a)).ravel()], axis=-1)


def validate_assumptions(problem: ControlProblem, sample_count: int = 64, *, seed: int = 0,
                         box_radius: float = 4.0) -> ValidationReport:
    """Sample the structural hypotheses on coefficients, data and measure.

    Points are quasi-random (fixed seed) in ``[0, T] x [-R, R]^N``; jumps are
    log-spaced in radius.  A pass is evidence, not proof.
    """
    if sample_count < 2:
        raise ConfigurationError("sample_count must be at least 2")
    n = problem.space_dim
    T = problem.horizon
    sampler = qmc.Halton(d=n + 1, scramble=True, seed=seed)
    raw = sampler.random(sample_count)
    ts = raw[:, 0] * T
    xs = (2.0 * raw[:, 1:] - 1.0) * box_radius
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(sample_count, n + 1))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    checks = []

    # nonnegative discount
    worst_c, witness = math.inf, None
    for ia, ib in problem.pairs:
        cv = np.array([problem.eval_c(t, x[None], ia, ib)[0] for t, x in zip(ts, xs)])
        k = int(np.argmin(cv))
        if cv[k] < worst_c:
            worst_c, witness = float(cv[k]), (float(ts[k]), tuple(xs[k]), ia, ib)
    checks.append(AssumptionCheck("nonnegative_discount", worst_c >= 0.0, worst_c, witness))

    # Lipschitz norms of u0, f, c, b
    def norm1(fn, time_dep=True):
        sup, lip = 0.0, 0.0
        for h in (1e-1, 1e-2, 1e-3):
            for t, x, d in zip(ts, xs, dirs):
                dt = h * d[0] if time_dep else 0.0
                dx = h * d[1:]
                s = min(max(t + dt, 0.0), T)
                v0 = np.atleast_1d(fn(t, x))
                v1 = np.atleast_1d(fn(s, x + dx))
                sup = max(sup, float(np.max(np.abs(v0))))
                den = abs(s - t) + float(np.linalg.norm(dx))
                if den > 0:
                    lip = max(lip, float(np.linalg.norm(v1 - v0)) / den)
        return sup + lip

    u0n = norm1(lambda t, x: problem.eval_u0(x[None])[0], time_dep=False)
    total = 0.0
    for ia, ib in problem.pairs:
        s = u0n
        s += norm1(lambda t, x: problem.eval_f(t, x[None], ia, ib)[0])
        s += norm1(lambda t, x: problem.eval_c(t, x[None], ia, ib)[0])
        s += norm1(lambda t, x: problem.eval_b(t, x[None], ia, ib)[0])
        total = max(total, s)
    K = problem.lipschitz_bound
    checks.append(AssumptionCheck(
        "lipschitz_data", K is None or total <= K * (1 + 1e-9), total,
        detail="no declared bound" if K is None else f"declared K={K}"))

    # jump map envelope and Lipschitz bound
    meas = problem.measure
    zs = _jump_samples(meas)
    rho = meas.rho(zs)
    worst_bound, wb_wit = 0.0, None
    worst_lip, wl_wit = 0.0, None
    for ia, ib in problem.pairs:
        for t, x, d in zip(ts, xs, dirs):
            e0 = problem.eval_eta(t, x, ia, ib, zs)
            ratio = np.linalg.norm(e0, axis=-1) / rho
            k = int(np.argmax(ratio))
            if ratio[k] > worst_bound:
                worst_bound, wb_wit = float(ratio[k]), (float(t), tuple(x), ia, ib, tuple(zs[k]))
            step = 1e-2 * d
            s = min(max(t + step[0], 0.0), T)
            y = x + step[1:]
            e1 = problem.eval_eta(s, y, ia, ib, zs)
            den = abs(s - t) + float(np.linalg.norm(y - x))
            q = np.linalg.norm(e1 - e0, axis=-1) / (rho * den)
            k = int(np.argmax(q))
            if q[k] > worst_lip:
                worst_lip, wl_wit = float(q[k]), (float(t), tuple(x), ia, ib, tuple(zs[k]))
    checks.append(AssumptionCheck("jump_amplitude_bound", worst_bound <= 1 + 1e-9, worst_bound, wb_wit))
    checks.append(AssumptionCheck("jump_amplitude_lipschitz", worst_lip <= 1 + 1e-9, worst_lip, wl_wit))

    r = np.linalg.norm(zs, axis=-1)
    small = r < 1.0
    k_rho = float(np.max(rho[small] / r[small])) if np.any(small) else 0.0
    big = r > 1.0
    ok_big = bool(np.all((rho[big] >= 1.0) & (rho[big] <= rho[big] ** 2))) if np.any(big) else True
    rho_ok = ok_big and (K is None or k_rho <= K)
    checks.append(AssumptionCheck("jump_envelope", rho_ok, k_rho, detail="sup rho(z)/|z| on |z|<1"))

    # integrability
    try:
        m2 = small_jump_second_moment(meas, 1.0)
        tail = 0.0
        if meas.outer_radius > 1.0:
            tail = float(shell_integral(meas, 1.0, lambda z: meas.rho(z) ** 2, tol=1e-8))
        val = m2 + tail
        checks.append(AssumptionCheck("measure_integrability", bool(np.isfinite(val)), val))
    except ArithmeticError as exc:
        checks.append(AssumptionCheck("measure_integrability", False, math.inf, detail=str(exc)))

    # density bound
    dens = meas.density(zs[small])
    bound = meas.density_constant / r[small] ** (meas.jump_dim + meas.sigma)
    ratio = dens / bound
    worst = float(np.max(ratio)) if ratio.size else 0.0
    checks.append(AssumptionCheck("density_bound", worst <= 1 + 1e-12, worst))

    # declared dependence of the jump map
    worst_dep = 0.0
    if problem.eta_dependence != "xt_dependent":
        for ia, ib in problem.pairs:
            ref = problem.eval_eta(ts[0], xs[0], ia, ib, zs)
            for t, x in zip(ts[1:], xs[1:]):
                xx = x if problem.eta_dependence == "constant" else xs[0]
                other = problem.eval_eta(t, xx, ia, ib, zs)
                if problem.eta_dependence == "x_only":
                    ref = problem.eval_eta(ts[0], x, ia, ib, zs)
                    other = problem.eval_eta(t, x, ia, ib, zs)
                worst_dep = max(worst_dep, float(np.max(np.abs(other - ref))))
    checks.append(AssumptionCheck("eta_dependence", worst_dep == 0.0, worst_dep,
                                  detail=problem.eta_dependence))
    return ValidationReport(checks)


# ---------------------------------------------------------------------------
# canonical problems


def _tent(x):
    return np.maximum(0.0, 1.0 - np.sum(np.abs(x), axis=-1))


def _gauss(x):
    return np.exp(-np.sum(x * x, axis=-1))


INITIAL_DATA = {"tent": _tent, "gaussian": _gauss}

CANONICAL = ("linear_advection", "fractional_linear", "two_player_nonconvex", "smooth_u0_variant")


def _zero(t, x, a, b):
    return np.zeros(np.shape(x)[:-1])


def canonical_problem(name: str, **overrides) -> ControlProblem:
    """Named test problems in one space dimension.

    Overrides: ``sigma``, ``scale``, ``horizon``, ``drift``, ``u0`` (``"tent"``
    or ``"gaussian"``), ``kind`` and ``tempering`` (measure kind).
    """
    if name not in CANONICAL:
        raise ConfigurationError(f"unknown canonical problem {name!r}; choose from {CANONICAL}")
    allowed = {"sigma", "scale", "horizon", "drift", "u0", "kind", "tempering"}
    unknown = set(overrides) - allowed
    if unknown:
        raise ConfigurationError(f"unknown overrides {sorted(unknown)}")
    sigma = float(overrides.get("sigma", 0.5))
    scale = float(overrides.get("scale", 1.0))
    horizon = float(overrides.get("horizon", 1.0))
    kind = overrides.get("kind", "truncated_stable")
    if kind == "tempered_stable":
        measure = LevyMeasure.tempered_stable(sigma, scale, float(overrides.get("tempering", 1.0)))
    elif kind == "truncated_stable":
        measure = LevyMeasure.truncated_stable(sigma, scale)
    else:
        raise ConfigurationError(f"canonical problems use built-in measures, not {kind!r}")
    u0_name = overrides.get("u0")
    params = dict(overrides)

    if name == "linear_advection":
        drift = float(overrides.get("drift", 1.0))
        u0 = INITIAL_DATA[u0_name or "tent"]
        return ControlProblem(
            space_dim=1, controls_a=(0,), controls_b=(0,), f=_zero, c=_zero,
            b=lambda t, x, a, b: np.full(np.shape(x), drift),
            eta=lambda t, x, a, b, z: np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(z)[:-1]) + (1,)),
            u0=u0, measure=LevyMeasure.null(), horizon=horizon, eta_dependence="constant",
            lipschitz_bound=2.0 + abs(drift), time_homogeneous=True, name=name, params=params)

    if name in ("fractional_linear", "smooth_u0_variant"):
        default = "gaussian" if name == "smooth_u0_variant" else "tent"
        u0 = INITIAL_DATA[u0_name or default]
        drift = float(overrides.get("drift", 0.0))
        return ControlProblem(
            space_dim=1, controls_a=(0,), controls_b=(0,), f=_zero, c=_zero,
            b=lambda t, x, a, b: np.full(np.shape(x), drift),
            eta=lambda t, x, a, b, z: z,
            u0=u0, measure=measure, horizon=horizon, eta_dependence="constant",
            lipschitz_bound=3.0 + abs(drift), time_homogeneous=True, name=name, params=params)

    # two_player_nonconvex
    u0 = INITIAL_DATA.get(u0_name) if u0_name else (lambda x: np.cos(x[..., 0]) * np.exp(-0.25 * x[..., 0] ** 2))

    def f(t, x, a, b):
        return 0.5 * a * b + 0.25 * a * np.cos(x[..., 0])

    def b_(t, x, a, b):
        return np.full(np.shape(x), 0.5 * a * b)

    def c(t, x, a, b):
        return np.full(np.shape(x)[:-1], 0.5)

    def eta(t, x, a, b, z):
        return z * (0.75 + 0.25 * b * np.cos(x[..., :1]))

    return ControlProblem(
        space_dim=1, controls_a=(-1, 1), controls_b=(-1, 1), f=f, c=c, b=b_, eta=eta, u0=u0,
        measure=measure, horizon=horizon, eta_dependence="x_only", lipschitz_bound=6.0,
        time_homogeneous=True, name=name, params=params)


# ---------------------------------------------------------------------------
# K(u0)


def lemma_constant(measure: LevyMeasure, rho_slope: float | None = None) -> float:
    """A constant making the small/medium/large jump split bound rigorous.

    Uses ``rho(z) <= k|z|`` on the unit ball (``k`` sampled when not given),
    the density bound and the mass of ``rho`` beyond radius one.
    """
    s, C, S = measure.sigma, measure.density_constant, measure.surface
    if rho_slope is None:
        zs = _jump_samples(measure)
        r = np.linalg.norm(zs, axis=-1)
        rho_slope = float(np.max(measure.rho(zs)[r < 1] / r[r < 1]))
    k = rho_slope
    tail = 0.0
    if measure.outer_radius > 1.0:
        tail = float(shell_integral(measure, 1.0, lambda z: measure.rho(z), tol=1e-8))
    parts = [0.5 * k * k * S * C / (2.0 - s), 2.0 * tail]
    if s > 1.0:
        parts.append(2.0 * k * S * C / (s - 1.0))
    elif s == 1.0:
        parts.append(2.0 * k * S * C)
    else:
        parts.append(2.0 * k * S * C / (1.0 - s))
    return max(parts)


def _derivative_sups(u0, dim, box_radius, spacing):
    axis = np.arange(-box_radius, box_radius + 0.5 * spacing, spacing)
    if dim == 1:
        x = axis[:, None]
    else:
        coarse = axis[:: max(1, len(axis) // 200)]
        mesh = np.meshgrid(*([coarse] * dim), indexing="ij")
        x = np.stack([m.ravel() for m in mesh], axis=-1)
    fn = as_smooth(u0)
    d1 = float(np.max(np.linalg.norm(fn.gradient(x), axis=-1)))
    d2 = float(np.max(np.abs(np.linalg.eigvalsh(fn.hessian(x)))))
    return d1, d2


def has_kink(u0, dim: int = 1, box_radius: float = 4.0, spacing: float = 1e-3) -> bool:
    """Detect a non-differentiable point by second differences that blow up under refinement."""

    def sup_second_difference(h):
        axis = np.arange(-box_radius, box_radius + 0.5 * h, h)
        worst = 0.0
        for i in range(dim):
            pts = np.zeros((axis.size, dim))
            pts[:, i] = axis
            v = np.asarray(u0(pts), dtype=float)
            d2 = np.abs(v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
            worst = max(worst, float(np.max(d2)))
        return worst

    coarse = sup_second_difference(spacing)
    fine = sup_second_difference(spacing / 4)
    return fine > 2.0 * coarse + 1e-6


def k_u0_estimate(problem: ControlProblem, mode: str = "direct", epsilon: float = 0.5, *,
                  sample_count: int = 129, box_radius: float = 4.0) -> float:
    """Estimate ``K(u0) = sup |I[u0]|``; ``math.inf`` marks an infinite value.

    ``direct`` evaluates the nonlocal operator on sampled points and controls;
    ``lemma_bound`` evaluates the small/medium jump split bound at
    ``epsilon`` from sampled derivative sups.
    """
    if mode not in ("direct", "lemma_bound"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    meas = problem.measure
    if meas.is_null:
        return 0.0
    s = meas.sigma
    n = problem.space_dim
    u0 = problem.u0
    kink = has_kink(u0, n, box_radius)
    if mode == "lemma_bound":
        if not 0.0 < epsilon < 1.0:
            raise ConfigurationError("epsilon must lie in (0, 1)")
        d1, d2 = _derivative_sups(u0, n, box_radius, 1e-3)
        C = lemma_constant(meas)
        if s < 1.0:
            return C * d1
        if kink or not np.isfinite(d2):
            return math.inf
        if s == 1.0:
            return C * (epsilon * d2 + (1.0 + abs(math.log(epsilon))) * d1)
        return C * (epsilon ** (2.0 - s) * d2 + (1.0 + epsilon ** (1.0 - s)) * d1)

    if s >= 1.0 and kink:
        return math.inf
    if n == 1:
        x = np.linspace(-box_radius, box_radius, sample_count)[:, None]
    else:
        x = (2.0 * qmc.Halton(d=n, scramble=True, seed=0).random(sample_count) - 1.0) * box_radius
    times = [0.0] if problem.eta_dependence != "xt_dependent" else list(np.linspace(0, problem.horizon, 3))
    worst = 0.0
    for t in times:
        for ia, ib in problem.pairs:
            vals = nonlocal_oracle(problem, u0, t, x, ia, ib, taylor=not kink, tol=1e-10)
            if not np.all(np.isfinite(vals)):
                return math.inf
            worst = max(worst, float(np.max(np.abs(vals))))
    return worst


EXTRA_PROBLEMS = ("pure_decay", "stationary")


def named_problem(name: str, **overrides) -> ControlProblem:
    """Canonical problems plus two trivial ones used for smoke runs.

    ``pure_decay`` has ``c = rate`` (default 1), ``u0 = 1`` and nothing else;
    ``stationary`` has all coefficients zero and a tent initial datum.
    """
    if name in CANONICAL:
        return canonical_problem(name, **overrides)
    if name not in EXTRA_PROBLEMS:
        raise ConfigurationError(f"unknown problem {name!r}; choose from {CANONICAL + EXTRA_PROBLEMS}")
    unknown = set(overrides) - {"horizon", "rate"}
    if unknown:
        raise ConfigurationError(f"unknown overrides {sorted(unknown)}")
    horizon = float(overrides.get("horizon", 1.0))
    rate = float(overrides.get("rate", 1.0)) if name == "pure_decay" else 0.0
    if rate < 0:
        raise ConfigurationError("rate must be nonnegative")
    u0 = (lambda x: np.ones(np.shape(x)[:-1])) if name == "pure_decay" else _tent
    return ControlProblem(
        space_dim=1, controls_a=(0,), controls_b=(0,), f=_zero,
        c=lambda t, x, a, b: np.full(np.shape(x)[:-1], rate),
        b=lambda t, x, a, b: np.zeros(np.shape(x)),
        eta=lambda t, x, a, b, z: np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(z)[:-1]) + (1,)),
        u0=u0, measure=LevyMeasure.null(), horizon=horizon, eta_dependence="constant",
        lipschitz_bound=2.0 + rate, time_homogeneous=True, name=name, params=dict(overrides))
