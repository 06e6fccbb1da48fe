"""Lévy measures and quadrature over their truncations.

All integrals over the jump variable are organised in dyadic radial shells
``[2**-(k+1), 2**-k]`` (and ``[2**k, 2**(k+1)]`` beyond radius one).  On each
shell the density is smooth, so Gauss-Legendre panels converge quickly and
the ``|z|**-(M+sigma)`` singularity only enters through the shell scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .errors import ConfigurationError, IntegrationError

KINDS = ("truncated_stable", "tempered_stable", "custom")

#: Gauss-Legendre points per panel for fixed rules.
DEFAULT_ORDER = 10
#: Tempered tails are integrated out to where exp(-lambda R) drops below this.
TAIL_CUTOFF = 1e-14
#: Panel evaluations allowed per adaptive integral before giving up.
MAX_PANELS = 200_000


def _unit_sphere_area(dim: int) -> float:
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


@dataclass(frozen=True)
class LevyMeasure:
    """A jump measure of order ``sigma`` on ``R^M``.

    Built-in kinds are radially symmetric with density ``scale * |z|**-(M+sigma)``
    restricted to the unit ball (``truncated_stable``) or multiplied by
    ``exp(-tempering*|z|)`` (``tempered_stable``).  Custom measures supply
    ``density_fn`` and ``rho_fn`` (the envelope of the jump map); both take an
    array of shape ``(..., M)`` and return shape ``(...)``.
    """

    sigma: float
    jump_dim: int = 1
    kind: str = "truncated_stable"
    scale: float = 1.0
    tempering: float = 0.0
    density_fn: Callable | None = field(default=None, compare=False)
    rho_fn: Callable | None = field(default=None, compare=False)
    density_constant: float | None = None
    tail_radius: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.sigma < 2.0:
            raise ConfigurationError(f"sigma must lie in [0, 2), got {self.sigma}")
        if self.jump_dim not in (1, 2):
            raise ConfigurationError("only jump dimensions 1 and 2 are supported")
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown measure kind {self.kind!r}")
        if self.scale < 0:
            raise ConfigurationError("scale must be nonnegative")
        if self.kind == "tempered_stable" and self.tempering <= 0:
            raise ConfigurationError("tempered_stable needs a positive tempering rate")
        if self.kind == "custom":
            if self.density_fn is None or self.rho_fn is None:
                raise ConfigurationError("custom measures must supply density_fn and rho_fn")
            if self.density_constant is None or self.density_constant <= 0:
                raise ConfigurationError("custom measures must declare a positive density_constant")
        elif self.density_constant is None:
            object.__setattr__(self, "density_constant", self.scale if self.scale > 0 else 1.0)
        if self.tail_radius is not None and self.tail_radius < 1.0:
            raise ConfigurationError("tail_radius must be at least 1")

    @classmethod
    def truncated_stable(cls, sigma: float, scale: float = 1.0, jump_dim: int = 1) -> LevyMeasure:
        return cls(sigma=sigma, jump_dim=jump_dim, kind="truncated_stable", scale=scale)

    @classmethod
    def tempered_stable(
        cls, sigma: float, scale: float = 1.0, tempering: float = 1.0, jump_dim: int = 1
    ) -> LevyMeasure:
        return cls(sigma=sigma, jump_dim=jump_dim, kind="tempered_stable", scale=scale,
                   tempering=tempering)

    @classmethod
    def custom(cls, sigma, density, rho, density_constant, jump_dim=1, tail_radius=1.0):
        return cls(sigma=sigma, jump_dim=jump_dim, kind="custom", density_fn=density,
                   rho_fn=rho, density_constant=density_constant, tail_radius=tail_radius)

    @classmethod
    def null(cls, jump_dim: int = 1) -> LevyMeasure:
        """The zero measure (no jumps)."""
        return cls(sigma=0.0, jump_dim=jump_dim, kind="truncated_stable", scale=0.0)

    @property
    def is_null(self) -> bool:
        return self.kind != "custom" and self.scale == 0.0

    @property
    def surface(self) -> float:
        return _unit_sphere_area(self.jump_dim)

    @property
    def outer_radius(self) -> float:
        """Radius beyond which the measure carries no (or negligible) mass."""
        if self.kind == "truncated_stable":
            return 1.0
        if self.kind == "tempered_stable":
            return max(1.0, -math.log(TAIL_CUTOFF) / self.tempering)
        return float(self.tail_radius or 1.0)

    def density(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "custom":
            return np.broadcast_to(np.asarray(self.density_fn(z), dtype=float), z.shape[:-1])
        r = np.linalg.norm(z, axis=-1)
        with np.errstate(divide="ignore"):
            base = self.scale * r ** (-(self.jump_dim + self.sigma))
        if self.kind == "truncated_stable":
            return np.where(r < 1.0, base, 0.0)
        return base * np.exp(-self.tempering * r)

    def rho(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "custom":
            return np.broadcast_to(np.asarray(self.rho_fn(z), dtype=float), z.shape[:-1])
        return np.linalg.norm(z, axis=-1)


def gamma_factor(sigma: float, delta: float) -> float:
    """Blow-up factor of the medium-size jumps: ``delta**(1-sigma)``, ``-log delta`` or 1."""
    if not 0.0 <= sigma < 2.0:
        raise ConfigurationError(f"sigma must lie in [0, 2), got {sigma}")
    if not 0.0 < delta <= 1.0:
        raise ConfigurationError(f"delta must lie in (0, 1], got {delta}")
    if sigma > 1.0:
        return delta ** (1.0 - sigma)
    if sigma == 1.0:
        return 1.0 if delta == 1.0 else -math.log(delta)
    return 1.0


def _upper_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma Gamma(a, x) for a > -2 (a may be <= 0)."""
    if a > 0:
        return float(special.gammaincc(a, x) * special.gamma(a))
    if a == 0:
        return float(special.exp1(x))
    return (_upper_gamma(a + 1.0, x) - x**a * math.exp(-x)) / a


def truncated_mass(measure: LevyMeasure, delta: float, tol: float = 1e-12) -> float:
    """Mass of the measure outside the ball of radius ``delta``."""
    if delta <= 0:
        raise ConfigurationError("delta must be positive")
    if measure.is_null:
        return 0.0
    s, c, m = measure.sigma, measure.scale, measure.surface
    if measure.kind == "truncated_stable":
        if delta >= 1.0:
            return 0.0
        if s == 0.0:
            return -m * c * math.log(delta)
        return m * c * (delta ** (-s) - 1.0) / s
    if measure.kind == "tempered_stable":
        lam = measure.tempering
        return m * c * lam**s * _upper_gamma(-s, lam * delta)
    ones = lambda z: np.ones(z.shape[:-1])  # noqa: E731
    return float(shell_integral(measure, delta, ones, tol=tol))


def small_jump_second_moment(measure: LevyMeasure, delta: float, tol: float = 1e-13) -> float:
    """``int_{|z|<delta} |z|^2 nu(dz)``; scales like ``delta**(2-sigma)``."""
    if delta <= 0:
        return 0.0
    if measure.is_null:
        return 0.0
    s, c, m = measure.sigma, measure.scale, measure.surface
    if measure.kind == "truncated_stable":
        return m * c * min(delta, 1.0) ** (2.0 - s) / (2.0 - s)
    if measure.kind == "tempered_stable":
        lam = measure.tempering
        a = 2.0 - s
        return m * c * lam ** (s - 2.0) * float(special.gammainc(a, lam * delta) * special.gamma(a))
    sq = lambda z: np.sum(z * z, axis=-1)  # noqa: E731
    return float(ball_integral(measure, delta, sq, tol=tol))


# ---------------------------------------------------------------------------
# quadrature rules


def radial_edges(delta: float, outer: float) -> np.ndarray:
    """Dyadic shell edges covering ``[delta, outer]``."""
    if delta >= outer:
        return np.array([outer])
    edges = {delta, outer}
    k = 0
    r = 1.0
    while r > delta:
        if r < outer:
            edges.add(r)
        k += 1
        r = 2.0**-k
    r = 2.0
    while r < outer:
        if r > delta:
            edges.add(r)
        r *= 2.0
    return np.array(sorted(edges))


@dataclass(frozen=True)
class _Rule:
    nodes: np.ndarray
    weights: np.ndarray


def _gauss(order: int) -> _Rule:
    x, w = np.polynomial.legendre.leggauss(order)
    return _Rule(x, w)


def _panel_points_1d(lo, hi, rule):
    lo = np.asarray(lo, dtype=float)[:, None]
    hi = np.asarray(hi, dtype=float)[:, None]
    half = 0.5 * (hi - lo)
    z = 0.5 * (hi + lo) + half * rule.nodes[None, :]
    w = half * rule.weights[None, :]
    return z.ravel(), w.ravel()


def _panel_points_2d(r0, r1, t0, t1, rule_r, rule_t):
    """Tensor Gauss points on polar panels; returns z (Q,2) and dz-weights (Q,)."""
    rr, wr = _panel_points_1d(r0, r1, rule_r)
    tt, wt = _panel_points_1d(t0, t1, rule_t)
    p = len(np.atleast_1d(r0))
    nr, nt = len(rule_r.nodes), len(rule_t.nodes)
    rr = rr.reshape(p, nr, 1)
    wr = wr.reshape(p, nr, 1)
    tt = tt.reshape(p, 1, nt)
    wt = wt.reshape(p, 1, nt)
    r = np.broadcast_to(rr, (p, nr, nt))
    th = np.broadcast_to(tt, (p, nr, nt))
    z = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1).reshape(-1, 2)
    w = (wr * wt * rr).reshape(-1)
    return z, w


def quadrature_nodes(
    measure: LevyMeasure,
    delta: float,
    *,
    outer: float | None = None,
    order: int = DEFAULT_ORDER,
    breakpoints=None,
    max_panel_width: float | None = None,
    angular_panels: int = 8,
):
    """Fixed Gauss rule for ``int_{delta<|z|<outer} g(z) nu(dz)``.

    Returns ``(z, w)`` with ``z`` of shape ``(Q, M)`` and weights that already
    include the density, so that the integral is ``w @ g(z)``.  In one jump
    dimension ``breakpoints`` (signed values) are added as panel edges; this is
    how the stencil assembly aligns panels with the kinks of tent functions.
    """
    outer = measure.outer_radius if outer is None else outer
    if measure.is_null or delta >= outer:
        return np.zeros((0, measure.jump_dim)), np.zeros(0)
    edges = radial_edges(delta, outer)
    if max_panel_width is not None:
        edges = _refine_edges(edges, max_panel_width)
    rule = _gauss(order)
    if measure.jump_dim == 1:
        signed = np.concatenate([-edges[::-1], edges])
        if breakpoints is not None:
            bp = np.asarray(breakpoints, dtype=float).ravel()
            bp = bp[(np.abs(bp) > delta) & (np.abs(bp) < outer)]
            signed = np.unique(np.concatenate([signed, bp]))
        lo, hi = signed[:-1], signed[1:]
        keep = ~((lo < 0) & (hi > 0))  # drop the gap (-delta, delta)
        keep &= hi > lo
        z, w = _panel_points_1d(lo[keep], hi[keep], rule)
        z = z[:, None]
    else:
        tedges = np.linspace(0.0, 2.0 * math.pi, angular_panels + 1)
        r0 = np.repeat(edges[:-1], angular_panels)
        r1 = np.repeat(edges[1:], angular_panels)
        t0 = np.tile(tedges[:-1], len(edges) - 1)
        t1 = np.tile(tedges[1:], len(edges) - 1)
        z, w = _panel_points_2d(r0, r1, t0, t1, rule, rule)
    return z, w * measure.density(z)


def _refine_edges(edges: np.ndarray, width: float) -> np.ndarray:
    out = [edges[:1]]
    for lo, hi in zip(edges[:-1], edges[1:]):
        n = max(1, int(math.ceil((hi - lo) / width)))
        out.append(np.linspace(lo, hi, n + 1)[1:])
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# adaptive shell quadrature


class _ShellIntegrator:
    """Adaptive bisection of Gauss panels on one shell (1D or polar 2D)."""

    def __init__(self, measure, integrand, order, tol, rtol, max_depth, noise=0.0,
                 max_panels=MAX_PANELS):
        self.measure = measure
        self.integrand = integrand
        self.rule = _gauss(order)
        self.tol = tol
        self.rtol = rtol
        self.max_depth = max_depth
        self.noise = noise
        self.budget = max_panels

    def _apply(self, z, w):
        self.budget -= 1
        if self.budget < 0:
            raise IntegrationError("shell quadrature exceeded its panel budget")
        w = w * self.measure.density(z)
        vals = np.asarray(self.integrand(z), dtype=float)
        # roundoff floor: integrand noise of size `noise` per unit of mass
        self.last_floor = self.noise * float(np.sum(np.abs(w)))
        return np.tensordot(w, vals, axes=(0, 0))

    def panel(self, box):
        if self.measure.jump_dim == 1:
            lo, hi = box
            z, w = _panel_points_1d([lo], [hi], self.rule)
            return self._apply(z[:, None], w)
        r0, r1, t0, t1 = box
        z, w = _panel_points_2d([r0], [r1], [t0], [t1], self.rule, self.rule)
        return self._apply(z, w)

    @staticmethod
    def split(box):
        if len(box) == 2:
            lo, hi = box
            mid = 0.5 * (lo + hi)
            return [(lo, mid), (mid, hi)]
        r0, r1, t0, t1 = box
        rm, tm = 0.5 * (r0 + r1), 0.5 * (t0 + t1)
        return [(r0, rm, t0, tm), (r0, rm, tm, t1), (rm, r1, t0, tm), (rm, r1, tm, t1)]

    def integrate(self, boxes, partial=0.0):
        total = 0.0
        stack = [(b, self.panel(b), 0) for b in reversed(boxes)]
        while stack:
            box, coarse, depth = stack.pop()
            kids = self.split(box)
            parts, floor = [], 0.0
            for k in kids:
                parts.append(self.panel(k))
                floor += self.last_floor
            fine = sum(parts[1:], parts[0])
            err = float(np.max(np.abs(fine - coarse))) if np.size(fine) else 0.0
            local_tol = max(self.tol * 2.0 ** (-0.5 * depth), self.rtol * float(np.max(np.abs(fine))),
                            floor)
            if err <= local_tol:
                total = total + fine
            elif depth >= self.max_depth:
                raise IntegrationError(
                    f"shell quadrature stalled at depth {depth} (error {err:.3e})",
                    partial_sum=partial + total + fine,
                )
            else:
                for k, p in zip(reversed(kids), reversed(parts)):
                    stack.append((k, p, depth + 1))
        return total

    def shell_boxes(self, r0, r1):
        if self.measure.jump_dim == 1:
            return [(-r1, -r0), (r0, r1)]
        q = 0.5 * math.pi
        return [(r0, r1, k * q, (k + 1) * q) for k in range(4)]


def shell_integral(
    measure: LevyMeasure,
    delta: float,
    integrand: Callable,
    *,
    outer: float | None = None,
    tol: float = 1e-10,
    rtol: float = 1e-13,
    order: int = DEFAULT_ORDER,
    max_depth: int = 60,
    noise: float = 0.0,
):
    """``int_{delta<|z|<outer} integrand(z) nu(dz)`` by adaptive dyadic shells.

    ``integrand`` maps an array ``z`` of shape ``(Q, M)`` to values of shape
    ``(Q, ...)``; the result has the trailing shape.  Each shell is bisected
    until successive estimates agree to ``tol`` (absolute) or ``rtol``
    (relative); otherwise :class:`IntegrationError` is raised carrying the sum
    accumulated so far.  ``noise`` is the expected roundoff of the integrand
    values; panel differences below ``noise`` times the panel mass are
    accepted.
    """
    if delta <= 0:
        raise ConfigurationError("delta must be positive")
    outer = measure.outer_radius if outer is None else outer
    if measure.is_null or delta >= outer:
        probe = np.asarray(integrand(np.full((1, measure.jump_dim), 0.5)), dtype=float)
        return np.zeros(probe.shape[1:]) if probe.ndim > 1 else 0.0
    worker = _ShellIntegrator(measure, integrand, order, tol, rtol, max_depth, noise)
    edges = radial_edges(delta, outer)
    total = 0.0
    for r0, r1 in zip(edges[:-1], edges[1:]):
        total = total + worker.integrate(worker.shell_boxes(r0, r1), partial=total)
    return total


def ball_integral(
    measure: LevyMeasure,
    radius: float,
    integrand: Callable,
    *,
    tol: float = 1e-12,
    rtol: float = 1e-13,
    order: int = DEFAULT_ORDER,
    max_shells: int = 400,
    noise: float = 0.0,
):
    """``int_{0<|z|<radius} integrand(z) nu(dz)`` for integrands vanishing at 0.

    Shells are added inwards until the geometric decay of their contributions
    bounds the remaining tail by ``tol``.
    """
    if radius <= 0 or measure.is_null:
        probe = np.asarray(integrand(np.full((1, measure.jump_dim), 0.5)), dtype=float)
        return np.zeros(probe.shape[1:]) if probe.ndim > 1 else 0.0
    radius = min(radius, measure.outer_radius)
    worker = _ShellIntegrator(measure, integrand, order, tol * 1e-2, rtol, 60, noise)
    total = 0.0
    mags = []
    r1 = radius
    for _ in range(max_shells):
        r0 = 0.5 * r1
        part = worker.integrate(worker.shell_boxes(r0, r1), partial=total)
        total = total + part
        mags.append(float(np.max(np.abs(part))) if np.size(part) else 0.0)
        r1 = r0
        if len(mags) >= 6:
            last, prev = mags[-1], mags[-2]
            if last == 0.0 and prev == 0.0 and mags[-3] == 0.0:
                return total
            if prev > 0.0:
                q = last / prev
                if q < 0.95 and last * q / (1.0 - q) < tol:
                    # the remaining shells form a geometric series
                    return total + part * q / (1.0 - q)
    raise IntegrationError("small-jump integral did not settle", partial_sum=total)
