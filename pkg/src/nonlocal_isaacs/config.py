"""Run configuration stored as YAML.

Example::

    problem:
      name: fractional_linear
      overrides: {sigma: 0.5}
    grid:
      dx: 0.0625
      box_radius: 4.0
      steps: 16
    scheme:
      theta: 1.0
      vartheta: 1.0
    study:
      levels: 3
      modes: [refinement]
    output_dir: out
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .errors import ConfigurationError
from .grid import Grid
from .params import SchemeParams
from .problem import ControlProblem, named_problem

STUDY_MODES = ("refinement", "truncation", "consistency")


@dataclass(frozen=True)
class ProblemConfig:
    name: str
    overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GridConfig:
    dx: float
    box_radius: float = 4.0
    steps: int | None = None
    dt: float | None = None
    extension: str = "constant_nearest"


@dataclass(frozen=True)
class StudyConfig:
    levels: int = 3
    base_dx: float | None = None
    dt_factor: float = 1.0
    dt_power: float = 1.0
    delta_rule: str = "dx"
    delta_factor: float = 1.0
    delta_power: float = 1.0
    reference: str = "fine_grid"
    reference_factor: int = 4
    modes: tuple = ("refinement",)
    deltas: tuple = ()
    ingredients: tuple = ("truncation", "drift", "quadrature", "local_correction")
    box_check: bool = False


@dataclass(frozen=True)
class CheckConfig:
    pairs: int = 100
    partition_samples: int = 1_000_000
    stencil_samples: int = 1000


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig
    grid: GridConfig
    scheme: SchemeParams = field(default_factory=SchemeParams)
    study: StudyConfig = field(default_factory=StudyConfig)
    checks: CheckConfig = field(default_factory=CheckConfig)
    output_dir: str = "out"
    seed: int = 0
    threads: int = 1

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigurationError("configuration must be a mapping")
        _reject_unknown(data, cls, "top level")
        if "problem" not in data or "grid" not in data:
            raise ConfigurationError("configuration needs 'problem' and 'grid' sections")
        try:
            problem = _build(ProblemConfig, data["problem"], "problem")
            grid = _build(GridConfig, data["grid"], "grid")
            scheme = _build(SchemeParams, data.get("scheme") or {}, "scheme")
            study_data = dict(data.get("study") or {})
            for key in ("modes", "deltas", "ingredients"):
                if key in study_data:
                    study_data[key] = tuple(study_data[key])
            study = _build(StudyConfig, study_data, "study")
            checks = _build(CheckConfig, data.get("checks") or {}, "checks")
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None
        cfg = cls(problem, grid, scheme, study, checks, str(data.get("output_dir", "out")),
                  int(data.get("seed", 0)), int(data.get("threads", 1)))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = asdict(self)
        study = out["study"]
        for key in ("modes", "deltas", "ingredients"):
            study[key] = list(study[key])
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    # -- validation and derived objects ---------------------------------------

    def validate(self):
        g, s = self.grid, self.study
        if g.dx <= 0 or g.box_radius <= 0:
            raise ConfigurationError("grid.dx and grid.box_radius must be positive")
        if (g.steps is None) == (g.dt is None):
            raise ConfigurationError("give exactly one of grid.steps and grid.dt")
        if s.levels < 3:
            raise ConfigurationError("study.levels must be at least 3")
        if s.reference not in ("fine_grid",):
            raise ConfigurationError("study.reference must be 'fine_grid' from a config file")
        if s.reference_factor < 4:
            raise ConfigurationError("study.reference_factor must be at least 4")
        bad = set(s.modes) - set(STUDY_MODES)
        if bad:
            raise ConfigurationError(f"unknown study modes {sorted(bad)}")
        if self.threads < 1:
            raise ConfigurationError("threads must be positive")
        if self.checks.pairs < 1:
            raise ConfigurationError("checks.pairs must be positive")
        self.build_problem()
        self.build_grid()

    def build_problem(self) -> ControlProblem:
        return named_problem(self.problem.name, **self.problem.overrides)

    def build_grid(self, problem: ControlProblem | None = None) -> Grid:
        problem = problem or self.build_problem()
        g = self.grid
        return Grid.create(g.dx, problem.horizon, g.box_radius, dt=g.dt, steps=g.steps,
                           dim=problem.space_dim, extension=g.extension)

    def with_overrides(self, **changes) -> RunConfig:
        cfg = replace(self, **changes)
        cfg.validate()
        return cfg


def _reject_unknown(data, cls, where):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown keys in {where}: {sorted(unknown)}")


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigurationError(f"section '{where}' must be a mapping")
    _reject_unknown(data, cls, where)
    return cls(**data)
