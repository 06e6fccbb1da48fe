"""Monotone stencils: upwind drift weights, tent-quadrature jump weights, CFL.

For a node ``x`` the truncated operator is discretised as

    b_tilde . grad u  ->  sum_i d_{+e_i} (U(x+e_i) - U) + d_{-e_i} (U(x-e_i) - U)
    int_{|z|>delta} (u(x+eta) - u) nu(dz)  ->  sum_k kappa_k (U(x+x_k) - U)

with ``d_{+-e_i} = b_tilde_i^{+-}/dx`` and ``kappa_k`` the integral of the
tent function of offset ``k`` composed with ``eta``.  All weights are
nonnegative, which is what makes the scheme monotone.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ConfigurationError
from .grid import Grid, tent_stencil
from .levy import DEFAULT_ORDER, quadrature_nodes, radial_edges, shell_integral
from .params import SchemeParams
from .problem import ControlProblem

#: Stencil entries with magnitude below this are dropped.
WEIGHT_THRESHOLD = 1e-14


@dataclass(frozen=True, eq=False)
class StencilWeights:
    """Drift and jump weights of one node, keyed by integer node offsets."""

    drift_offsets: np.ndarray
    drift: np.ndarray
    nonlocal_offsets: np.ndarray
    kappa: np.ndarray
    b_delta: np.ndarray
    b_tilde: np.ndarray
    context: tuple

    @property
    def drift_map(self) -> dict:
        return {tuple(int(v) for v in o): float(w) for o, w in zip(self.drift_offsets, self.drift)}

    @property
    def nonlocal_map(self) -> dict:
        return {tuple(int(v) for v in o): float(w) for o, w in zip(self.nonlocal_offsets, self.kappa)}

    def off_center_jump_sum(self) -> float:
        nonzero = np.any(self.nonlocal_offsets != 0, axis=-1)
        return float(np.sum(self.kappa[nonzero]))

    def to_csv(self, path):
        """Write ``kind, offset_1..offset_N, weight`` rows."""
        n = self.b_tilde.shape[0]
        with open(path, "w") as fh:
            fh.write(",".join(["kind"] + [f"offset{i + 1}" for i in range(n)] + ["weight"]) + "\n")
            for kind, offs, vals in (("drift", self.drift_offsets, self.drift),
                                     ("jump", self.nonlocal_offsets, self.kappa)):
                for o, w in zip(offs, vals):
                    fh.write(",".join([kind] + [str(int(v)) for v in o] + [f"{w:.17g}"]) + "\n")


def drift_weights(b_tilde, dx: float) -> dict:
    """Upwind weights ``{offset: weight}``; zero entries are omitted."""
    if dx <= 0:
        raise ConfigurationError("dx must be positive")
    b_tilde = np.atleast_1d(np.asarray(b_tilde, dtype=float))
    n = b_tilde.shape[0]
    out = {}
    for i, bi in enumerate(b_tilde):
        e = [0] * n
        if bi > 0:
            e[i] = 1
            out[tuple(e)] = bi / dx
        elif bi < 0:
            e[i] = -1
            out[tuple(e)] = -bi / dx
    return out


def effective_drift(problem: ControlProblem, t: float, x, ia: int, ib: int, delta: float,
                    tol: float = 1e-10):
    """``(b_delta, b_tilde)`` with ``b_delta`` the jump map integrated over ``|z| > delta``."""
    if not 0.0 < delta <= 1.0:
        raise ConfigurationError(f"delta must lie in (0, 1], got {delta}")
    x = np.asarray(x, dtype=float).reshape(problem.space_dim)
    b = problem.eval_b(t, x[None], ia, ib)[0]
    bd = shell_integral(problem.measure, delta,
                        lambda z: problem.eval_eta(t, x, ia, ib, z), tol=tol)
    bd = np.broadcast_to(np.asarray(bd, dtype=float), b.shape).copy()
    return bd, b - bd


# ---------------------------------------------------------------------------
# jump quadrature aligned with tent kinks


def _refine_by_variation(points, eta_of, limit, passes=4):
    """Subdivide 1D panels until ``eta`` moves by at most ``limit`` across each."""
    for _ in range(passes):
        vals = eta_of(points[:, None])
        jump = np.max(np.abs(np.diff(vals, axis=0)), axis=-1)
        pieces = np.ceil(jump / limit).astype(np.int64)
        pieces[~np.isfinite(jump)] = 1
        pieces = np.maximum(pieces, 1)
        if np.all(pieces == 1):
            return points, vals
        pieces = np.minimum(pieces, 4096)
        out = [points[:1]]
        for lo, hi, k in zip(points[:-1], points[1:], pieces):
            out.append(np.linspace(lo, hi, k + 1)[1:])
        points = np.concatenate(out)
    return points, eta_of(points[:, None])


def _grid_crossings(points, vals, dx):
    """Jump sizes where some component of ``eta`` crosses a grid line."""
    out = []
    for lo, hi, va, vb in zip(points[:-1], points[1:], vals[:-1], vals[1:]):
        a, b = va / dx, vb / dx
        for ai, bi in zip(a, b):
            if ai == bi:
                continue
            lo_l, hi_l = min(ai, bi), max(ai, bi)
            for m in range(int(math.ceil(lo_l)), int(math.floor(hi_l)) + 1):
                if lo_l <= m <= hi_l:
                    out.append(lo + (m - ai) / (bi - ai) * (hi - lo))
    return np.asarray(out, dtype=float)


def _grid_crossings_vec(points, vals, dx):
    a = vals[:-1] / dx
    b = vals[1:] / dx
    lo_l = np.minimum(a, b)
    hi_l = np.maximum(a, b)
    m = np.ceil(lo_l)
    hit = (m <= hi_l) & (hi_l > lo_l)
    # with panels of at most a quarter cell each component crosses at most once
    if np.any(np.floor(hi_l) - np.ceil(lo_l) >= 1):
        return _grid_crossings(points, vals, dx)
    p, comp = np.nonzero(hit)
    frac = (m[p, comp] - a[p, comp]) / (b[p, comp] - a[p, comp])
    return points[p] + frac * (points[p + 1] - points[p])


def jump_quadrature(problem: ControlProblem, t: float, x, ia: int, ib: int, delta: float,
                    dx: float, order: int = DEFAULT_ORDER):
    """Quadrature ``(z, w)`` for ``int_{|z|>delta} g(z) nu(dz)`` at one point.

    With a scalar jump variable, panel edges are placed where ``eta`` crosses
    grid lines, so that tent functions composed with ``eta`` are smooth on
    every panel (exact alignment when ``eta`` is affine in ``z``).  For planar
    jumps panels are refined to a fraction of ``dx`` instead.
    """
    meas = problem.measure
    outer = meas.outer_radius
    if meas.is_null or delta >= outer:
        return np.zeros((0, meas.jump_dim)), np.zeros(0)
    x = np.asarray(x, dtype=float).reshape(problem.space_dim)

    def eta_of(z):
        return problem.eval_eta(t, x, ia, ib, z)

    if meas.jump_dim == 1:
        edges = radial_edges(delta, outer)
        signed = np.concatenate([-edges[::-1], edges])
        bps = []
        for part in (signed[: len(edges)], signed[len(edges):]):
            pts, vals = _refine_by_variation(part, eta_of, 0.25 * dx)
            bps.append(_grid_crossings_vec(pts, vals, dx))
        return quadrature_nodes(meas, delta, order=order, breakpoints=np.concatenate(bps))
    angular = int(min(4096, max(8, math.ceil(4.0 * math.pi * outer / dx))))
    return quadrature_nodes(meas, delta, order=min(order, 4), max_panel_width=0.5 * dx,
                            angular_panels=angular)


def _scatter(eta_pts, w, dx):
    """Aggregate tent weights of the points ``eta_pts`` into ``(offsets, kappa)``."""
    n = eta_pts.shape[-1]
    if w.size == 0:
        return np.zeros((0, n), dtype=np.int64), np.zeros(0)
    corners, tw = tent_stencil(eta_pts, dx)
    offs = corners.reshape(-1, n)
    vals = (tw * w[:, None]).ravel()
    uniq, inv = np.unique(offs, axis=0, return_inverse=True)
    kappa = np.bincount(inv.ravel(), weights=vals, minlength=uniq.shape[0])
    keep = np.abs(kappa) >= WEIGHT_THRESHOLD
    return uniq[keep], kappa[keep]


def _node_jump(problem, t, x, ia, ib, delta, dx, order):
    z, w = jump_quadrature(problem, t, x, ia, ib, delta, dx, order)
    n = problem.space_dim
    if w.size == 0:
        return np.zeros((0, n), dtype=np.int64), np.zeros(0), np.zeros(n)
    e = problem.eval_eta(t, np.asarray(x, float), ia, ib, z)
    offsets, kappa = _scatter(e, w, dx)
    return offsets, kappa, w @ e


def nonlocal_weights(problem: ControlProblem, t: float, x, ia: int, ib: int, delta: float,
                     grid: Grid | float, order: int = DEFAULT_ORDER) -> dict:
    """``{offset: kappa}`` including the centre offset (so the weights sum to the truncated mass)."""
    dx = grid.dx if isinstance(grid, Grid) else float(grid)
    if delta < dx * (1.0 - 1e-12):
        raise ConfigurationError(f"delta={delta} is below dx={dx}")
    if delta > 1.0:
        raise ConfigurationError(f"delta={delta} exceeds 1")
    offsets, kappa, _ = _node_jump(problem, t, x, ia, ib, delta, dx, order)
    return {tuple(int(v) for v in o): float(k) for o, k in zip(offsets, kappa)}


# ---------------------------------------------------------------------------
# operator assembly


@dataclass
class LevelOperators:
    """Generators of one control pair at one time level.

    ``D @ U + g_drift`` and ``J @ U + g_jump`` are the discrete drift and jump
    terms; the ``g`` vectors carry far-field values under the
    ``initial_profile`` extension.  ``*_entries`` keep the raw weights for the
    coefficient check.
    """

    D: sparse.csr_matrix
    g_drift: np.ndarray
    J: sparse.csr_matrix
    g_jump: np.ndarray
    drift_sum: np.ndarray
    jump_sum: np.ndarray
    c: np.ndarray
    f: np.ndarray
    drift_entries: tuple
    jump_entries: tuple


@dataclass(frozen=True)
class _JumpTable:
    shared: bool
    offsets: object
    kappa: object
    b_delta: np.ndarray  # (size, N)


class StencilAssembler:
    """Builds and caches stencils and sparse generators on a grid.

    Jump weights are computed once for ``constant`` jump maps, once per node for
    ``x_only`` and once per node and time level otherwise.  Node loops may run
    on a thread pool; results are collected in node order, so the output does
    not depend on the thread count.
    """

    def __init__(self, problem: ControlProblem, grid: Grid, delta: float, *, threads: int = 1,
                 order: int = DEFAULT_ORDER, stencil_hook=None):
        if problem.space_dim != grid.dim:
            raise ConfigurationError("problem and grid dimensions differ")
        if not problem.measure.is_null:
            if delta < grid.dx * (1.0 - 1e-12):
                raise ConfigurationError(f"delta={delta} is below dx={grid.dx}")
            if delta > 1.0:
                raise ConfigurationError(f"delta={delta} exceeds 1")
        self.problem = problem
        self.grid = grid
        self.delta = float(delta)
        self.threads = max(1, int(threads))
        self.order = order
        self.stencil_hook = stencil_hook
        self.index = grid.node_indices()
        self.nodes = self.index * grid.dx
        self._jumps: dict = {}
        self._levels: dict = {}
        self._lock = threading.Lock()

    # -- jump weights -------------------------------------------------------

    def _jump_key(self, ia, ib, n):
        return (ia, ib, n if self.problem.eta_dependence == "xt_dependent" else None)

    def _map(self, fn, items):
        if self.threads == 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(fn, items))

    def jump_table(self, ia: int, ib: int, n: int) -> _JumpTable:
        key = self._jump_key(ia, ib, n)
        with self._lock:
            hit = self._jumps.get(key)
        if hit is not None:
            return hit
        p = self.problem
        t = n * self.grid.dt
        args = (self.delta, self.grid.dx, self.order)
        if p.measure.is_null:
            zero = (np.zeros((0, p.space_dim), dtype=np.int64), np.zeros(0), np.zeros(p.space_dim))
            results = [zero]
            shared = True
        elif p.eta_dependence == "constant":
            results = [_node_jump(p, t, self.nodes[0], ia, ib, *args)]
            shared = True
        else:
            results = self._map(lambda j: _node_jump(p, t, self.nodes[j], ia, ib, *args),
                                range(self.grid.size))
            shared = False
        if self.stencil_hook is not None:
            results = [self._hooked(r, ia, ib, t, j) for j, r in enumerate(results)]
        bd = np.array([r[2] for r in results])
        if shared:
            table = _JumpTable(True, results[0][0], results[0][1],
                               np.broadcast_to(bd[0], (self.grid.size, p.space_dim)))
        else:
            table = _JumpTable(False, [r[0] for r in results], [r[1] for r in results], bd)
        with self._lock:
            self._jumps.setdefault(key, table)
            return self._jumps[key]

    def _hooked(self, result, ia, ib, t, j):
        offs, kappa, bd = result
        sw = StencilWeights(np.zeros((0, self.grid.dim), dtype=np.int64), np.zeros(0), offs, kappa,
                            bd, np.zeros_like(bd), (t, self.nodes[j], ia, ib, self.delta))
        sw = self.stencil_hook(sw)
        return sw.nonlocal_offsets, sw.kappa, sw.b_delta

    def stencil(self, ia: int, ib: int, n: int, j: int) -> StencilWeights:
        """Full weights of node ``j`` at time level ``n``."""
        t = n * self.grid.dt
        table = self.jump_table(ia, ib, n)
        offs = table.offsets if table.shared else table.offsets[j]
        kappa = table.kappa if table.shared else table.kappa[j]
        bd = np.array(table.b_delta[j])
        bt = self.problem.eval_b(t, self.nodes[j][None], ia, ib)[0] - bd
        dmap = drift_weights(bt, self.grid.dx)
        d_off = np.array(list(dmap.keys()), dtype=np.int64).reshape(-1, self.grid.dim)
        d_val = np.array(list(dmap.values()), dtype=float)
        return StencilWeights(d_off, d_val, np.array(offs), np.array(kappa), bd, bt,
                              (t, tuple(self.nodes[j]), ia, ib, self.delta))

    # -- sparse generators --------------------------------------------------

    def _generator(self, rows, offs, vals):
        g = self.grid
        size = g.size
        targets = self.index[rows] + offs
        flat, outside = g.resolve(targets)
        extra = np.zeros(size)
        inside = np.ones(rows.shape[0], dtype=bool)
        if g.extension == "initial_profile" and np.any(outside):
            far = self.problem.eval_u0(targets[outside] * g.dx)
            extra = np.bincount(rows[outside], weights=vals[outside] * far, minlength=size)
            inside = ~outside
        total = np.bincount(rows, weights=vals, minlength=size)
        m = sparse.coo_matrix((vals[inside], (rows[inside], flat[inside])), shape=(size, size))
        m = (m.tocsr() - sparse.diags(total, format="csr")).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return m, extra, total

    def level(self, ia: int, ib: int, n: int) -> LevelOperators:
        """Generators at ``t_n`` (cached; one copy for time-homogeneous problems)."""
        key = (ia, ib, 0 if self.problem.time_homogeneous else n)
        with self._lock:
            hit = self._levels.get(key)
        if hit is not None:
            return hit
        p, g = self.problem, self.grid
        t = n * g.dt
        size, dim = g.size, g.dim
        table = self.jump_table(ia, ib, n)

        bt = p.eval_b(t, self.nodes, ia, ib) - table.b_delta
        d_rows, d_offs, d_vals = [], [], []
        for i in range(dim):
            e = np.zeros(dim, dtype=np.int64)
            e[i] = 1
            for sign, w in ((1, np.maximum(bt[:, i], 0.0)), (-1, np.maximum(-bt[:, i], 0.0))):
                nz = np.nonzero(w)[0]
                d_rows.append(nz)
                d_offs.append(np.broadcast_to(sign * e, (nz.size, dim)))
                d_vals.append(w[nz] / g.dx)
        d_rows = np.concatenate(d_rows)
        d_offs = np.concatenate(d_offs).reshape(-1, dim)
        d_vals = np.concatenate(d_vals)
        D, gD, dsum = self._generator(d_rows, d_offs, d_vals)

        if table.shared:
            off = np.asarray(table.offsets).reshape(-1, dim)
            kap = np.asarray(table.kappa)
            keep = np.any(off != 0, axis=-1)
            off, kap = off[keep], kap[keep]
            j_rows = np.repeat(np.arange(size), off.shape[0])
            j_offs = np.tile(off, (size, 1))
            j_vals = np.tile(kap, size)
        else:
            rows, offs, vals = [], [], []
            for j, (off, kap) in enumerate(zip(table.offsets, table.kappa)):
                off = np.asarray(off).reshape(-1, dim)
                keep = np.any(off != 0, axis=-1)
                rows.append(np.full(int(keep.sum()), j))
                offs.append(off[keep])
                vals.append(np.asarray(kap)[keep])
            j_rows = np.concatenate(rows).astype(np.int64)
            j_offs = np.concatenate(offs).reshape(-1, dim)
            j_vals = np.concatenate(vals)
        J, gJ, jsum = self._generator(j_rows, j_offs, j_vals)

        ops = LevelOperators(
            D=D, g_drift=gD, J=J, g_jump=gJ, drift_sum=dsum, jump_sum=jsum,
            c=np.array(p.eval_c(t, self.nodes, ia, ib)), f=np.array(p.eval_f(t, self.nodes, ia, ib)),
            drift_entries=(d_rows, d_offs, d_vals), jump_entries=(j_rows, j_offs, j_vals))
        with self._lock:
            if len(self._levels) > 8 * len(p.pairs):
                for k in [k for k in self._levels if k[2] < n - 1]:
                    del self._levels[k]
            self._levels.setdefault(key, ops)
            return self._levels[key]


# ---------------------------------------------------------------------------
# CFL and coefficient checks


@dataclass
class CFLReport:
    satisfied: bool
    worst_ratio: float
    suggested_dt: float
    witness: tuple | None = None


def cfl_ratio(prev: LevelOperators, now: LevelOperators, dt: float, theta: float,
              vartheta: float) -> np.ndarray:
    """Nodewise ``dt[(1-theta) sum d + (1-vartheta) sum kappa + c]``."""
    return dt * ((1.0 - theta) * prev.drift_sum + (1.0 - vartheta) * prev.jump_sum + now.c)


def cfl_check(problem: ControlProblem, grid: Grid, params: SchemeParams,
              assembler: StencilAssembler | None = None, levels=None) -> CFLReport:
    """Check that the explicit diagonal coefficient stays nonnegative.

    Every node and control pair is checked at the sampled time levels (all
    levels are equivalent for time-homogeneous problems).
    """
    from .params import resolve_delta

    if assembler is None:
        delta = resolve_delta(params, grid.dx, grid.dt, problem.sigma)
        assembler = StencilAssembler(problem, grid, delta)
    if levels is None:
        if problem.time_homogeneous:
            levels = [1]
        else:
            levels = sorted(set(np.linspace(1, grid.steps, min(grid.steps, 5)).astype(int)))
    worst, witness = 0.0, None
    theta, vartheta = params.theta, params.vartheta
    if params.diffusion_correction:
        theta = vartheta = 1.0
    for n in levels:
        for ia, ib in problem.pairs:
            r = cfl_ratio(assembler.level(ia, ib, n - 1), assembler.level(ia, ib, n), grid.dt,
                          theta, vartheta)
            j = int(np.argmax(r))
            if r[j] > worst:
                worst, witness = float(r[j]), (n, j, ia, ib)
    ok = worst <= 1.0 + 1e-12
    return CFLReport(ok, worst, grid.dt if ok or worst == 0 else grid.dt / worst, witness)


@dataclass
class CoefficientReport:
    nonnegative: bool
    min_coefficient: float
    negative_count: int
    witness: tuple | None = None


def _merge(rows, offs, vals):
    key = np.concatenate([rows[:, None], offs], axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    return uniq, np.bincount(inv.ravel(), weights=vals, minlength=uniq.shape[0])


def scheme_coefficients(prev: LevelOperators, now: LevelOperators, dt: float, theta: float,
                        vartheta: float) -> dict:
    """The positive-coefficient form of one step for one control pair.

    Returns a dict with the implicit diagonal ``a_now_0``, the explicit
    diagonal ``a_prev_0`` (nodewise arrays) and the merged off-diagonal
    coefficients ``a_now`` / ``a_prev`` as ``(keys, values)`` where each key row
    is ``(node, offset...)``.
    """
    def off(level, wd, wj):
        r = np.concatenate([level.drift_entries[0], level.jump_entries[0]])
        o = np.concatenate([level.drift_entries[1], level.jump_entries[1]]).reshape(r.size, -1)
        v = np.concatenate([dt * wd * level.drift_entries[2], dt * wj * level.jump_entries[2]])
        return _merge(r, o, v)

    return {
        "a_now_0": 1.0 + dt * (theta * now.drift_sum + vartheta * now.jump_sum),
        "a_prev_0": 1.0 - cfl_ratio(prev, now, dt, theta, vartheta),
        "a_now": off(now, theta, vartheta),
        "a_prev": off(prev, 1.0 - theta, 1.0 - vartheta),
    }


def check_coefficients(prev: LevelOperators, now: LevelOperators, dt: float, theta: float,
                       vartheta: float, tol: float = 0.0) -> CoefficientReport:
    coeffs = scheme_coefficients(prev, now, dt, theta, vartheta)
    worst, witness, count = math.inf, None, 0
    for name in ("a_now_0", "a_prev_0"):
        arr = coeffs[name]
        if arr.size:
            j = int(np.argmin(arr))
            count += int(np.sum(arr < -tol))
            if arr[j] < worst:
                worst, witness = float(arr[j]), (name, j)
    for name in ("a_now", "a_prev"):
        keys, vals = coeffs[name]
        if vals.size:
            k = int(np.argmin(vals))
            count += int(np.sum(vals < -tol))
            if vals[k] < worst:
                worst, witness = float(vals[k]), (name, tuple(int(v) for v in keys[k]))
    return CoefficientReport(count == 0, worst, count, witness)
