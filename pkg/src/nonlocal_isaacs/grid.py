"""Uniform space-time grid, tent-function interpolation and solution storage."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError

EXTENSIONS = ("constant_nearest", "initial_profile")


@dataclass(frozen=True)
class Grid:
    """Nodes ``x_j = j*dx`` in the box ``[-L, L]^N`` and times ``t_n = n*dt``.

    Points referenced outside the box are resolved by ``extension``:
    ``constant_nearest`` copies the nearest boundary node, ``initial_profile``
    evaluates the initial datum there.
    """

    dx: float
    dt: float
    steps: int
    box_radius: float
    dim: int = 1
    extension: str = "constant_nearest"
    half: int = field(init=False, repr=False)

    def __post_init__(self):
        if self.dx <= 0 or self.dt <= 0:
            raise ConfigurationError("dx and dt must be positive")
        if self.steps < 1:
            raise ConfigurationError("at least one time step is required")
        if self.dim < 1:
            raise ConfigurationError("space dimension must be positive")
        if self.extension not in EXTENSIONS:
            raise ConfigurationError(f"unknown extension policy {self.extension!r}")
        ratio = self.box_radius / self.dx
        half = int(round(ratio))
        if half < 1 or abs(ratio - half) > 1e-8 * max(1.0, ratio):
            raise ConfigurationError(
                f"box_radius {self.box_radius} must be a positive multiple of dx {self.dx}"
            )
        object.__setattr__(self, "half", half)

    @classmethod
    def create(cls, dx, horizon, box_radius, *, dt=None, steps=None, dim=1,
               extension="constant_nearest") -> Grid:
        """Build a grid with ``steps * dt == horizon``.

        Exactly one of ``dt`` and ``steps`` is used; a ``dt`` that does not divide
        the horizon is shrunk to the next one that does.
        """
        if steps is None:
            if dt is None:
                raise ConfigurationError("give either dt or steps")
            steps = max(1, int(math.ceil(horizon / dt - 1e-9)))
        return cls(dx=dx, dt=horizon / steps, steps=int(steps), box_radius=box_radius,
                   dim=dim, extension=extension)

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.half + 1,) * self.dim

    @property
    def size(self) -> int:
        return (2 * self.half + 1) ** self.dim

    def axis(self) -> np.ndarray:
        return np.arange(-self.half, self.half + 1) * self.dx

    def node_indices(self) -> np.ndarray:
        """Integer multi-indices of all nodes, shape ``(size, dim)``, C order."""
        rng = np.arange(-self.half, self.half + 1)
        mesh = np.meshgrid(*([rng] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def nodes(self) -> np.ndarray:
        return self.node_indices() * self.dx

    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def flat_index(self, multi) -> np.ndarray:
        """Flat index of in-box multi-indices (no bounds check)."""
        multi = np.asarray(multi) + self.half
        return np.ravel_multi_index(tuple(np.moveaxis(multi, -1, 0)), self.shape)

    def resolve(self, multi):
        """Map multi-indices to flat indices of in-box nodes.

        Returns ``(flat, outside)``.  Outside points get the flat index of the
        nearest boundary node; callers using ``initial_profile`` replace their
        value by the far-field datum.
        """
        multi = np.asarray(multi)
        outside = np.any(np.abs(multi) > self.half, axis=-1)
        clipped = np.clip(multi, -self.half, self.half)
        return self.flat_index(clipped), outside

    def with_box(self, box_radius: float) -> Grid:
        return Grid(self.dx, self.dt, self.steps, box_radius, self.dim, self.extension)


def tent_weight(j, x, dx: float) -> float:
    """Multilinear hat function of node ``j`` evaluated at ``x``."""
    j = np.atleast_1d(np.asarray(j, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(np.prod(np.maximum(0.0, 1.0 - np.abs(x / dx - j))))


def tent_stencil(x, dx: float):
    """Nonzero tent weights at points ``x`` (shape ``(P, N)``).

    Returns ``(corners, weights)`` with shapes ``(P, 2**N, N)`` and
    ``(P, 2**N)``: the integer nodes of the cell containing each point and
    their weights.  Weights are nonnegative and sum to one.
    """
    x = np.asarray(x, dtype=float)
    y = x / dx
    base = np.floor(y)
    frac = y - base
    base = base.astype(np.int64)
    n = x.shape[-1]
    bits = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)  # (2^N, N)
    corners = base[:, None, :] + bits[None, :, :]
    w = np.where(bits[None, :, :] == 1, frac[:, None, :], 1.0 - frac[:, None, :])
    return corners, np.prod(w, axis=-1)


def interpolate(values, grid: Grid, x, far_field=None) -> np.ndarray:
    """Tent interpolant of grid values at points ``x`` of shape ``(P, N)``.

    ``far_field`` (a callable on points) supplies values outside the box when
    the grid uses the ``initial_profile`` extension.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != grid.dim:
        raise DomainError(f"points must have {grid.dim} coordinates")
    corners, w = tent_stencil(x, grid.dx)
    flat, outside = grid.resolve(corners)
    vals = values[flat]
    if grid.extension == "initial_profile" and np.any(outside):
        if far_field is None:
            raise DomainError("initial_profile extension needs a far-field function")
        vals = np.where(outside, far_field(corners * grid.dx), vals)
    return np.sum(w * vals, axis=-1)


@dataclass
class SolutionField:
    """Time slices ``U^n`` on the nodes of ``grid`` (array ``(steps+1, size)``)."""

    grid: Grid
    values: np.ndarray
    problem_name: str = ""
    start_index: int = 0
    history: dict = field(default_factory=dict)

    def slice(self, n: int) -> np.ndarray:
        return self.values[n]

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def check_finite(self):
        bad = ~np.isfinite(self.values)
        if np.any(bad):
            n, j = np.argwhere(bad)[0]
            raise DomainError(f"non-finite value at time index {n}, node {j}")

    def to_csv(self, path, slices=None):
        """Write rows ``t, x1..xN, value`` for the requested slices (default all)."""
        rows = self.table(slices)
        header = ",".join(["t"] + [f"x{i + 1}" for i in range(self.grid.dim)] + ["value"])
        np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=header, comments="")

    def table(self, slices=None) -> np.ndarray:
        if slices is None:
            slices = range(self.values.shape[0])
        nodes = self.grid.nodes()
        blocks = []
        for n in slices:
            t = np.full((nodes.shape[0], 1), n * self.grid.dt)
            blocks.append(np.hstack([t, nodes, self.values[n][:, None]]))
        return np.vstack(blocks)


def write_checkpoint(path, field_: SolutionField, n: int | None = None):
    """Store slice ``n`` (default: last) in the solution CSV format."""
    n = field_.values.shape[0] - 1 if n is None else n
    field_.to_csv(path, slices=[n])


def read_checkpoint(path, grid: Grid):
    """Return ``(time_index, slice)`` from a checkpoint written for ``grid``."""
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (grid.size, grid.dim + 2):
        raise ConfigurationError("checkpoint does not match the grid")
    if not np.allclose(data[:, 1:-1], grid.nodes(), rtol=0, atol=1e-12 * max(1.0, grid.box_radius)):
        raise ConfigurationError("checkpoint nodes do not match the grid")
    n = int(round(data[0, 0] / grid.dt))
    return n, data[:, -1].copy()
