"""Time stepping for the monotone scheme.

One step maps ``V = U^{n-1}`` to ``U = U^n`` through

    U = V - dt * min_a max_b { -f^{n-1} + c^n V
                               - theta D^n U - (1-theta) D^{n-1} V
                               - vartheta J^n U - (1-vartheta) J^{n-1} V }

where ``D`` and ``J`` are the drift and jump generators of the control pair.
With the diffusion correction the step is fully implicit:

    U = V - dt * min_a max_b { -f^n + c^n U - D^n U - J^n U - L^n U }.

Written per pair as ``A_p U - r_p``, the step solves
``min_a max_b (A_p U - r_p) = 0`` with M-matrices ``A_p``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import CFLViolation, ConfigurationError, MonotonicityError, SolverError
from .grid import Grid, SolutionField
from .levy import ball_integral
from .params import SchemeParams, resolve_delta
from .problem import ControlProblem
from .stencil import LevelOperators, StencilAssembler, cfl_ratio

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# local diffusion correction


@dataclass
class DiffusionCorrection:
    """Second-order replacement for the discarded small jumps.

    ``a_delta(t, x, ia, ib)`` is half the second moment of the jump map over
    ``|z| <= delta``; ``operator`` returns the monotone second-difference
    generator built from it.
    """

    problem: ControlProblem
    grid: Grid
    delta: float
    enabled: bool = True
    tol: float = 1e-12

    def a_delta(self, t: float, x, ia: int, ib: int) -> np.ndarray:
        p = self.problem
        x = np.asarray(x, dtype=float).reshape(p.space_dim)

        def outer(z):
            e = p.eval_eta(t, x, ia, ib, z)
            return e[:, :, None] * e[:, None, :]

        m = ball_integral(p.measure, self.delta, outer, tol=self.tol)
        m = np.broadcast_to(np.asarray(m, dtype=float), (p.space_dim, p.space_dim))
        return 0.5 * m

    def _a_nodes(self, t, ia, ib):
        p, g = self.problem, self.grid
        nodes = g.nodes()
        if p.measure.is_null:
            return np.zeros((g.size, g.dim, g.dim))
        if p.eta_dependence == "constant":
            return np.broadcast_to(self.a_delta(t, nodes[0], ia, ib), (g.size, g.dim, g.dim))
        return np.array([self.a_delta(t, x, ia, ib) for x in nodes])

    def local_weights(self, a: np.ndarray) -> dict:
        """Kushner-type weights ``{offset: weight}`` (divided by ``dx**2``) for one matrix."""
        n = a.shape[0]
        dx2 = self.grid.dx ** 2
        out = {}
        for i in range(n):
            off = sum(abs(a[i, k]) for k in range(n) if k != i)
            w = (a[i, i] - off) / dx2
            if w < -1e-14 * max(1.0, abs(a[i, i])):
                raise MonotonicityError(f"a_delta is not diagonally dominant in row {i}", point=None)
            for s in (1, -1):
                e = [0] * n
                e[i] = s
                out[tuple(e)] = out.get(tuple(e), 0.0) + max(w, 0.0)
            for k in range(i + 1, n):
                for s in (1, -1):
                    if a[i, k] > 0:
                        e = [0] * n
                        e[i], e[k] = s, s
                        out[tuple(e)] = out.get(tuple(e), 0.0) + a[i, k] / dx2
                    elif a[i, k] < 0:
                        e = [0] * n
                        e[i], e[k] = s, -s
                        out[tuple(e)] = out.get(tuple(e), 0.0) - a[i, k] / dx2
        return out

    def operator(self, t: float, ia: int, ib: int):
        """Generator ``L`` and far-field vector for the control pair at time ``t``."""
        g = self.grid
        a = self._a_nodes(t, ia, ib)
        index = g.node_indices()
        rows, offs, vals = [], [], []
        for j in range(g.size) if self.problem.eta_dependence != "constant" else [None]:
            aj = a[0] if j is None else a[j]
            try:
                weights = self.local_weights(aj)
            except MonotonicityError as exc:
                x = tuple(g.nodes()[0 if j is None else j])
                raise MonotonicityError(f"{exc} at x={x}, t={t}", point=(t, x, ia, ib)) from None
            if j is None:
                for o, w in weights.items():
                    rows.append(np.arange(g.size))
                    offs.append(np.broadcast_to(np.array(o), (g.size, g.dim)))
                    vals.append(np.full(g.size, w))
            else:
                for o, w in weights.items():
                    rows.append(np.array([j]))
                    offs.append(np.array([o]))
                    vals.append(np.array([w]))
        if not rows:
            z = sparse.csr_matrix((g.size, g.size))
            return z, np.zeros(g.size)
        rows = np.concatenate(rows)
        offs = np.concatenate(offs).reshape(-1, g.dim)
        vals = np.concatenate(vals)
        keep = vals > 0
        rows, offs, vals = rows[keep], offs[keep], vals[keep]
        targets = index[rows] + offs
        flat, outside = g.resolve(targets)
        extra = np.zeros(g.size)
        inside = np.ones(rows.size, dtype=bool)
        if g.extension == "initial_profile" and np.any(outside):
            far = self.problem.eval_u0(targets[outside] * g.dx)
            extra = np.bincount(rows[outside], weights=vals[outside] * far, minlength=g.size)
            inside = ~outside
        total = np.bincount(rows, weights=vals, minlength=g.size)
        m = sparse.coo_matrix((vals[inside], (rows[inside], flat[inside])), shape=(g.size, g.size))
        m = (m.tocsr() - sparse.diags(total, format="csr")).tocsr()
        m.sum_duplicates()
        return m, extra


def assemble_diffusion_correction(problem: ControlProblem, grid: Grid, delta: float) -> DiffusionCorrection:
    """Build the correction and check diagonal dominance on the grid nodes.

    Raises :class:`MonotonicityError` naming the first offending point.
    """
    if not 0.0 < delta <= 1.0:
        raise ConfigurationError(f"delta must lie in (0, 1], got {delta}")
    corr = DiffusionCorrection(problem, grid, delta)
    times = [0.0] if problem.time_homogeneous else [0.0, problem.horizon]
    for t in times:
        for ia, ib in problem.pairs:
            corr.operator(t, ia, ib)
    return corr


# ---------------------------------------------------------------------------
# the Hamiltonian


def _minmax(table: np.ndarray) -> np.ndarray:
    """``min_a max_b`` over the two leading axes."""
    return table.max(axis=1).min(axis=0)


def discrete_hamiltonian(slice_curr, slice_prev, node: int, levels: dict, params: SchemeParams) -> float:
    """Value of ``min_a max_b {...}`` at one node.

    ``levels`` maps a control pair ``(ia, ib)`` to ``(prev, now)`` level
    operators.  Implicit parts act on ``slice_curr``, explicit parts and the
    discount term on ``slice_prev``.
    """
    ia_max = max(k[0] for k in levels) + 1
    ib_max = max(k[1] for k in levels) + 1
    table = np.empty((ia_max, ib_max))
    for (ia, ib), (prev, now) in levels.items():
        table[ia, ib] = _braced(slice_curr, slice_prev, prev, now, params, rows=[node])[0]
    return float(_minmax(table))


def _apply(op, g, u, rows):
    if rows is None:
        return op @ u + g
    return op[rows] @ u + g[rows]


def _braced(curr, prev_slice, prev: LevelOperators, now: LevelOperators, params: SchemeParams,
            rows=None):
    th, vt = params.theta, params.vartheta
    sel = slice(None) if rows is None else rows
    val = -prev.f[sel] + now.c[sel] * prev_slice[sel]
    if th:
        val = val - th * _apply(now.D, now.g_drift, curr, rows)
    if th < 1:
        val = val - (1 - th) * _apply(prev.D, prev.g_drift, prev_slice, rows)
    if vt:
        val = val - vt * _apply(now.J, now.g_jump, curr, rows)
    if vt < 1:
        val = val - (1 - vt) * _apply(prev.J, prev.g_jump, prev_slice, rows)
    return val


# ---------------------------------------------------------------------------
# the scheme


@dataclass
class StepStats:
    iterations: int
    residual: float
    contraction: float | None


class Scheme:
    """A configured scheme on a grid; call :meth:`solve` or :meth:`step`.

    ``threads`` only affects stencil assembly; results are bitwise identical
    for any value.
    """

    def __init__(self, problem: ControlProblem, grid: Grid, params: SchemeParams | None = None, *,
                 threads: int = 1, stencil_hook=None, check_cfl: bool = True):
        params = params or SchemeParams()
        if problem.space_dim != grid.dim:
            raise ConfigurationError("problem and grid dimensions differ")
        if abs(grid.horizon - problem.horizon) > 1e-9 * problem.horizon:
            raise ConfigurationError(f"grid horizon {grid.horizon} differs from problem horizon {problem.horizon}")
        self.problem = problem
        self.grid = grid
        self.params = params
        self.delta = resolve_delta(params, grid.dx, grid.dt, problem.sigma) if not problem.measure.is_null \
            else (params.delta if params.delta_rule == "manual" else grid.dx)
        self.assembler = StencilAssembler(problem, grid, self.delta, threads=threads,
                                          stencil_hook=stencil_hook)
        self.correction = (assemble_diffusion_correction(problem, grid, self.delta)
                           if params.diffusion_correction else None)
        self._corr_cache: dict = {}
        self._lu_cache: dict = {}
        self.check_cfl = check_cfl
        self.stats: list[StepStats] = []

    # -- per-step data ------------------------------------------------------

    def levels(self, n: int) -> dict:
        a = self.assembler
        return {(ia, ib): (a.level(ia, ib, n - 1), a.level(ia, ib, n)) for ia, ib in self.problem.pairs}

    def _correction_op(self, ia, ib, n):
        key = (ia, ib, 0 if self.problem.time_homogeneous else n)
        if key not in self._corr_cache:
            if not self.problem.time_homogeneous:
                self._corr_cache = {k: v for k, v in self._corr_cache.items() if k[2] >= n - 1}
            self._corr_cache[key] = self.correction.operator(n * self.grid.dt, ia, ib)
        return self._corr_cache[key]

    def _system(self, V, n, levels):
        """Per-pair ``(A_p, r_p)`` with ``min_a max_b (A_p U - r_p) = 0``."""
        dt = self.grid.dt
        size = self.grid.size
        eye = sparse.identity(size, format="csr")
        th, vt = self.params.theta, self.params.vartheta
        out = {}
        for (ia, ib), (prev, now) in levels.items():
            if self.correction is not None:
                L, gL = self._correction_op(ia, ib, n)
                A = sparse.diags(1.0 + dt * now.c, format="csr") - dt * (now.D + now.J + L)
                r = V + dt * (now.f + now.g_drift + now.g_jump + gL)
            else:
                A = eye - dt * (th * now.D + vt * now.J)
                expl = -prev.f + now.c * V
                if th < 1:
                    expl = expl - (1 - th) * (prev.D @ V + prev.g_drift)
                if vt < 1:
                    expl = expl - (1 - vt) * (prev.J @ V + prev.g_jump)
                r = V - dt * expl + dt * (th * now.g_drift + vt * now.g_jump)
            out[(ia, ib)] = (A.tocsr(), r)
        return out

    # -- stepping -----------------------------------------------------------

    def _check_cfl(self, n, levels):
        if not self.check_cfl:
            return
        th, vt = self.params.theta, self.params.vartheta
        if self.correction is not None:
            th = vt = 1.0
        worst = 0.0
        for prev, now in levels.values():
            worst = max(worst, float(np.max(cfl_ratio(prev, now, self.grid.dt, th, vt), initial=0.0)))
        if worst > 1.0 + 1e-12:
            suggested = self.grid.dt / worst
            raise CFLViolation(
                f"CFL condition violated at step {n}: ratio {worst:.6g} > 1; use dt <= {suggested:.6g}",
                worst_ratio=worst, suggested_dt=suggested)

    def step(self, V: np.ndarray, n: int) -> np.ndarray:
        """Compute ``U^n`` from ``V = U^{n-1}``."""
        V = np.asarray(V, dtype=float)
        levels = self.levels(n)
        self._check_cfl(n, levels)
        shape = (len(self.problem.controls_a), len(self.problem.controls_b))
        if self.params.explicit:
            table = np.empty(shape + (V.size,))
            for (ia, ib), (prev, now) in levels.items():
                table[ia, ib] = _braced(V, V, prev, now, self.params)
            self.stats.append(StepStats(0, 0.0, None))
            return V - self.grid.dt * _minmax(table)
        system = self._system(V, n, levels)
        solver = self.params.implicit_solver
        if solver == "auto":
            solver = "policy" if min(shape) == 1 else "fixed_point"
        if solver == "policy":
            if min(shape) != 1:
                raise ConfigurationError("policy iteration needs a single control for one player")
            return self._policy(system, shape, V, n)
        return self._fixed_point(system, shape, V, n)

    def _residual(self, system, shape, U):
        table = np.empty(shape + (U.size,))
        for (ia, ib), (A, r) in system.items():
            table[ia, ib] = A @ U - r
        return _minmax(table)

    def _lu(self, key, A):
        cacheable = self.problem.time_homogeneous
        if cacheable and key in self._lu_cache:
            return self._lu_cache[key]
        lu = splu(A.tocsc())
        if cacheable:
            self._lu_cache[key] = lu
        return lu

    def _policy(self, system, shape, V, n):
        """Howard iteration for a one-sided problem (exact for a single pair)."""
        p = self.params
        pairs = sorted(system)
        maximise = shape[0] == 1  # only player b chooses
        A_all = [system[k][0] for k in pairs]
        r_all = [system[k][1] for k in pairs]
        size = V.size
        if len(pairs) == 1:
            U = self._lu(("single",), A_all[0]).solve(r_all[0])
            res = float(np.max(np.abs(A_all[0] @ U - r_all[0]), initial=0.0))
            self.stats.append(StepStats(1, res, None))
            return U
        U = V.copy()
        policy = None
        history = []
        for it in range(1, p.fixed_point_max_iter + 1):
            vals = np.stack([A @ U - r for A, r in zip(A_all, r_all)])
            new = np.argmax(vals, axis=0) if maximise else np.argmin(vals, axis=0)
            if policy is not None:
                # keep the current choice on ties so the iteration terminates
                cur = vals[policy, np.arange(size)]
                best = vals[new, np.arange(size)]
                new = np.where(best == cur, policy, new)
            if policy is not None and np.array_equal(new, policy):
                break
            policy = new
            parts = [sparse.diags((policy == k).astype(float)) @ A_all[k] for k in range(len(pairs))]
            A = sum(parts[1:], parts[0]).tocsc()
            r = np.choose(policy, r_all)
            U_new = splu(A).solve(r)
            history.append(float(np.max(np.abs(U_new - U))))
            U = U_new
        else:
            raise SolverError("policy iteration did not settle", history=history, time_index=n)
        res = float(np.max(np.abs(self._residual(system, shape, U))))
        self.stats.append(StepStats(len(history), res, None))
        return U

    def _fixed_point(self, system, shape, V, n):
        """Nodewise Jacobi iteration ``U_j = max_a min_b T_p,j``; a contraction for any dt."""
        p = self.params
        diag = {}
        off = {}
        for k, (A, r) in system.items():
            d = A.diagonal()
            diag[k] = d
            off[k] = (A - sparse.diags(d)).tocsr()
        U = V.copy()
        history = []
        table = np.empty(shape + (V.size,))
        for it in range(1, p.fixed_point_max_iter + 1):
            for k, (A, r) in system.items():
                table[k] = (r - off[k] @ U) / diag[k]
            U_new = table.min(axis=1).max(axis=0)
            change = float(np.max(np.abs(U_new - U), initial=0.0))
            history.append(change)
            U = U_new
            if change < p.fixed_point_tol:
                res = float(np.max(np.abs(self._residual(system, shape, U)), initial=0.0))
                if res <= p.fixed_point_tol:
                    break
        else:
            raise SolverError(
                f"fixed-point iteration did not converge in {p.fixed_point_max_iter} iterations "
                f"(last change {history[-1]:.3e})", history=history, time_index=n)
        res = float(np.max(np.abs(self._residual(system, shape, U)), initial=0.0))
        rate = None
        if len(history) > 2 and history[-2] > 0:
            rate = history[-1] / history[-2]
        self.stats.append(StepStats(len(history), res, rate))
        return U

    def solve(self, initial=None, *, start: int = 0, progress: bool = False) -> SolutionField:
        """Run all steps from slice ``start`` (default: ``u0`` sampled at the nodes)."""
        g = self.grid
        U0 = self.problem.eval_u0(g.nodes()).copy() if initial is None else np.asarray(initial, float).copy()
        if U0.shape != (g.size,):
            raise ConfigurationError("initial slice does not match the grid")
        values = np.full((g.steps + 1, g.size), np.nan)
        values[start] = U0
        for n in range(start + 1, g.steps + 1):
            try:
                values[n] = self.step(values[n - 1], n)
            except SolverError as exc:
                if exc.time_index is None:
                    exc.time_index = n
                raise
            if not np.all(np.isfinite(values[n])):
                raise SolverError(f"non-finite values at step {n}", time_index=n)
            if progress:
                st = self.stats[-1]
                log.info("step %d/%d iterations=%d residual=%.3e", n, g.steps, st.iterations, st.residual)
        return SolutionField(g, values, problem_name=self.problem.name, start_index=start,
                             history={"delta": self.delta,
                                      "iterations": [s.iterations for s in self.stats],
                                      "residuals": [s.residual for s in self.stats]})


def solve(problem: ControlProblem, grid: Grid, params: SchemeParams | None = None, *,
          threads: int = 1, initial=None) -> SolutionField:
    """Convenience wrapper around :class:`Scheme`."""
    return Scheme(problem, grid, params, threads=threads).solve(initial)


def stability_bound(problem: ControlProblem, grid: Grid, u0_values=None) -> np.ndarray:
    """``||u0|| + t_n sup |f|`` over nodes and controls, per time level."""
    nodes = grid.nodes()
    u0 = problem.eval_u0(nodes) if u0_values is None else np.asarray(u0_values)
    sup_f = 0.0
    times = grid.times()
    sample_t = [0.0] if problem.time_homogeneous else times
    for t in sample_t:
        for ia, ib in problem.pairs:
            sup_f = max(sup_f, float(np.max(np.abs(problem.eval_f(t, nodes, ia, ib)))))
    return float(np.max(np.abs(u0))) + times * sup_f


__all__ = ["DiffusionCorrection", "Scheme", "SchemeParams", "StepStats",
           "assemble_diffusion_correction", "discrete_hamiltonian", "solve", "stability_bound"]
