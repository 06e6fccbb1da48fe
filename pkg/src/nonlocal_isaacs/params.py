"""Scheme parameters and the truncation-radius rules."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import ConfigurationError

DELTA_RULES = ("manual", "dt_dx_root", "dx_root", "dx")
SOLVERS = ("auto", "fixed_point", "policy")


@dataclass(frozen=True)
class SchemeParams:
    """Time-stepping weights and solver controls.

    ``theta`` weights the implicit part of the drift, ``vartheta`` that of the
    jump term; ``theta = vartheta = 0`` is fully explicit.  ``delta`` is only
    read when ``delta_rule == "manual"``.
    """

    theta: float = 1.0
    vartheta: float = 1.0
    delta: float | None = None
    delta_rule: str = "dx"
    fixed_point_tol: float = 1e-10
    fixed_point_max_iter: int = 10_000
    implicit_solver: str = "auto"
    diffusion_correction: bool = False

    def __post_init__(self):
        for name in ("theta", "vartheta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")
        if self.delta_rule not in DELTA_RULES:
            raise ConfigurationError(f"unknown delta_rule {self.delta_rule!r}")
        if self.delta_rule == "manual" and self.delta is None:
            raise ConfigurationError("delta_rule 'manual' needs an explicit delta")
        if self.fixed_point_tol <= 0 or self.fixed_point_max_iter < 1:
            raise ConfigurationError("fixed-point tolerance and iteration cap must be positive")
        if self.implicit_solver not in SOLVERS:
            raise ConfigurationError(f"unknown implicit_solver {self.implicit_solver!r}")
        if self.diffusion_correction and (self.theta != 1.0 or self.vartheta != 1.0):
            raise ConfigurationError("the diffusion-corrected scheme is fully implicit (theta = vartheta = 1)")

    @property
    def explicit(self) -> bool:
        return self.theta == 0.0 and self.vartheta == 0.0 and not self.diffusion_correction

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_delta(params: SchemeParams, dx: float, dt: float, sigma: float) -> float:
    """Truncation radius for a grid.

    ``dx``: ``delta = dx``; ``dx_root``: ``dx**(1/sigma)``; ``dt_dx_root``:
    ``max(dt, dx)**(1/sigma)``.  For ``sigma <= 1`` every rule gives ``dx``.
    Rule values are clamped to ``[dx, 1]``.

    A manual ``delta`` below ``dx`` or above one is rejected.
    """
    if params.delta_rule == "manual":
        d = float(params.delta)
        if d < dx * (1.0 - 1e-12):
            raise ConfigurationError(f"delta={d} is below dx={dx}")
        if d > 1.0:
            raise ConfigurationError(f"delta={d} exceeds 1")
        return d
    if sigma <= 1.0 or params.delta_rule == "dx":
        d = dx
    elif params.delta_rule == "dx_root":
        d = dx ** (1.0 / sigma)
    else:
        d = max(dt ** (1.0 / sigma), dx ** (1.0 / sigma))
    return min(max(d, dx), 1.0)
