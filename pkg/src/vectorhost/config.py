"""Run configuration: flat INI sections mapped onto solver inputs.

Sections: [domain] endpoints and period; [grid] resolution; [bc1]/[bc2]
boundary flavor per equation group (neumann default, robin takes b_left
and b_right expressions, dirichlet pins zero); [coefficients] one
expression per field; [solver] tolerances and caps; [run] initial-data
expressions and trajectory length; [sweep] optional parameter scan.

Overrides are "section.key=value" strings applied before interpretation,
so they are validated exactly like file values.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass

from .coeffs import COEFFICIENT_FIELDS, CoefficientSet, parse_expression
from .dynamics import SolverOptions
from .errors import ConfigError
from .grid import BoundarySpec, Grid, build_grid

__all__ = ["RunSettings", "SweepSettings", "RunConfig", "load_config",
           "substituted_coeffs"]

_SCHEMA = {
    "domain": {"x_left", "x_right", "T"},
    "grid": {"nx", "steps_per_period"},
    "bc1": {"flavor", "b_left", "b_right"},
    "bc2": {"flavor", "b_left", "b_right"},
    "coefficients": set(COEFFICIENT_FIELDS),
    "solver": {"eigen_tol", "orbit_tol", "band", "max_eigen_iters",
               "max_periods", "blowup_cap", "eps"},
    "run": {"n_periods", "sample_stride", "target", "t_offset",
            "initial_H_i", "initial_V_u", "initial_V_i"},
    "sweep": {"parameter", "template", "values"},
}
_DEFAULT_INITIAL = {"initial_H_i": "1.0", "initial_V_u": "0.5",
                    "initial_V_i": "0.1"}


@dataclass(frozen=True)
class RunSettings:
    """Trajectory initial data (expressions at t = 0) and the validation
    time offset."""

    initial: tuple
    t_offset: float = 0.0


@dataclass(frozen=True)
class SweepSettings:
    """One coefficient scanned over a value list.

    template is an expression in x, t, and the reserved identifier
    `value`, substituted per row."""

    parameter: str
    template: str
    values: tuple


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    bc1: BoundarySpec
    bc2: BoundarySpec
    coeffs: CoefficientSet
    solver: SolverOptions
    run: RunSettings
    sweep: SweepSettings | None
    path: str


# ─────────────────────────────────────────────────────────────── loading ──


def _fail(section: str, key: str, detail: str):
    raise ConfigError(f"[{section}] {key}: {detail}")


def _get(parser, section, key, convert, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            _fail(section, key, "required key missing")
        return default
    raw = parser.get(section, key)
    try:
        return convert(raw)
    except ConfigError:
        raise
    except Exception as exc:
        _fail(section, key, f"cannot read {raw!r} ({exc})")


def _positive(name):
    def conv(raw):
        v = float(raw)
        if v <= 0:
            raise ConfigError(f"{name} must be positive, got {v}")
        return v
    return conv


def _count(name):
    def conv(raw):
        v = int(raw)
        if v < 1:
            raise ConfigError(f"{name} must be a positive count, got {v}")
        return v
    return conv


def _apply_overrides(parser: configparser.ConfigParser, overrides) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key, _, value = item.partition("=")
        if "." not in key:
            raise ConfigError(f"override key {key!r} must be section.key")
        section, _, option = key.partition(".")
        section, option = section.strip(), option.strip()
        if section not in _SCHEMA:
            raise ConfigError(f"override names unknown section [{section}]")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, value.strip())


def _check_schema(parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    for required in ("domain", "grid", "coefficients"):
        if not parser.has_section(required):
            raise ConfigError(f"missing required section [{required}]")


def _boundary(parser, section: str, group: int) -> BoundarySpec:
    if not parser.has_section(section):
        return BoundarySpec.neumann(group)
    flavor = parser.get(section, "flavor", fallback="neumann").strip().lower()
    if flavor == "dirichlet":
        return BoundarySpec.dirichlet(group)
    if flavor == "neumann":
        return BoundarySpec.neumann(group)
    if flavor != "robin":
        _fail(section, "flavor", f"expected dirichlet, neumann, or robin, got {flavor!r}")
    bl = parser.get(section, "b_left", fallback="0")
    br = parser.get(section, "b_right", fallback="0")
    return BoundarySpec.robin(group, parse_expression(bl), parse_expression(br))


def load_config(path: str, overrides=()) -> RunConfig:
    """Read, override, and interpret a config file.

    Raises ConfigError for structural problems and lets expression
    ParseErrors surface as themselves (both map to the same exit code).
    """
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # coefficient names are case-sensitive (H_u)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    _apply_overrides(parser, overrides)
    _check_schema(parser)

    grid = build_grid(
        x_left=_get(parser, "domain", "x_left", float, required=True),
        x_right=_get(parser, "domain", "x_right", float, required=True),
        nx=_get(parser, "grid", "nx", _count("nx"), required=True),
        T=_get(parser, "domain", "T", _positive("T"), required=True),
        steps_per_period=_get(parser, "grid", "steps_per_period",
                              _count("steps_per_period"), required=True))

    bc1 = _boundary(parser, "bc1", 1)
    bc2 = _boundary(parser, "bc2", 2)

    fields = {}
    for name in COEFFICIENT_FIELDS:
        fields[name] = _get(parser, "coefficients", name, str, required=True)
    robin1 = None
    robin2 = None
    if bc1.flavor == "robin":
        robin1 = (parser.get("bc1", "b_left", fallback="0"),
                  parser.get("bc1", "b_right", fallback="0"))
    if bc2.flavor == "robin":
        robin2 = (parser.get("bc2", "b_left", fallback="0"),
                  parser.get("bc2", "b_right", fallback="0"))
    coeffs = CoefficientSet.from_strings(
        T=grid.T, robin_b1=robin1, robin_b2=robin2, **fields)

    solver = SolverOptions(
        eigen_tol=_get(parser, "solver", "eigen_tol", _positive("eigen_tol"),
                       SolverOptions.eigen_tol),
        orbit_tol=_get(parser, "solver", "orbit_tol", _positive("orbit_tol"),
                       SolverOptions.orbit_tol),
        band=_get(parser, "solver", "band", _positive("band"), SolverOptions.band),
        max_eigen_iters=_get(parser, "solver", "max_eigen_iters",
                             _count("max_eigen_iters"), SolverOptions.max_eigen_iters),
        max_periods=_get(parser, "solver", "max_periods", _count("max_periods"),
                         SolverOptions.max_periods),
        blowup_cap=_get(parser, "solver", "blowup_cap", _positive("blowup_cap"),
                        SolverOptions.blowup_cap),
        eps=_get(parser, "solver", "eps", float, SolverOptions.eps),
        n_periods=_get(parser, "run", "n_periods", _count("n_periods"),
                       SolverOptions.n_periods),
        sample_stride=_get(parser, "run", "sample_stride", _count("sample_stride"),
                           SolverOptions.sample_stride),
        target=_get(parser, "run", "target", _positive("target"),
                    SolverOptions.target))
    if solver.eps < 0:
        raise ConfigError("[solver] eps: must be nonnegative")
    if grid.steps_per_period % solver.sample_stride != 0:
        raise ConfigError(
            f"[run] sample_stride: {solver.sample_stride} does not divide "
            f"steps_per_period {grid.steps_per_period}")

    initial = tuple(
        parse_expression(_get(parser, "run", key, str, _DEFAULT_INITIAL[key]))
        for key in ("initial_H_i", "initial_V_u", "initial_V_i"))
    run = RunSettings(initial=initial,
                      t_offset=_get(parser, "run", "t_offset", float, 0.0))

    sweep = None
    if parser.has_section("sweep"):
        parameter = _get(parser, "sweep", "parameter", str, required=True).strip()
        if parameter not in COEFFICIENT_FIELDS:
            _fail("sweep", "parameter",
                  f"{parameter!r} is not a coefficient field "
                  f"(choose from {', '.join(COEFFICIENT_FIELDS)})")
        template = _get(parser, "sweep", "template", str, required=True)
        parse_expression(template, {"value": 0.0})  # syntax check up front
        raw = _get(parser, "sweep", "values", str, required=True)
        parts = [p for chunk in raw.split(",") for p in chunk.split()]
        try:
            values = tuple(float(p) for p in parts)
        except ValueError as exc:
            _fail("sweep", "values", str(exc))
        if not values:
            _fail("sweep", "values", "value list is empty")
        sweep = SweepSettings(parameter=parameter, template=template, values=values)

    return RunConfig(grid=grid, bc1=bc1, bc2=bc2, coeffs=coeffs, solver=solver,
                     run=run, sweep=sweep, path=path)


def substituted_coeffs(cfg: RunConfig, value: float) -> CoefficientSet:
    """Coefficient set with the sweep parameter's expression replaced by
    the template evaluated at this row's value (inlined as a constant)."""
    if cfg.sweep is None:
        raise ConfigError("config has no [sweep] section")
    expr = parse_expression(cfg.sweep.template, {"value": float(value)})
    return dataclasses.replace(cfg.coeffs, **{cfg.sweep.parameter: expr})
