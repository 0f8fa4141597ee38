"""Run configuration: TOML files, flag overrides, field resolution.

A run is described by one TOML document with optional sections

    seed = 0                      # single source of all randomness

    [metric]                      # exactly one of name / file / expression
    name = "quartic2"             # registry entry
    file = "metrics/custom.toml"  # external metric file (same [metric] keys)
    expression = "sqrt(y1^2 + y2^2)"
    dimension = 2
    class = "finsler"             # finsler | gauge | pre_finsler

    [chart]
    lower = [-1.0, -1.0]
    upper = [1.0, 1.0]

    [diff]
    step = 1e-4
    richardson = 2
    scheme = "central"

    [quadrature]
    scheme = "sphere_product_grid"
    resolution = 64
    samples = 4096

    [transport]
    step = 1e-3
    time = 1.0

    [classify]
    samples = 6
    curvature_threshold = 1e-2
    linearity_threshold = 1e-2

    [loewner]
    count = 256
    tolerance = 1e-7

    [output]
    directory = "."

Unknown sections or keys are rejected so typos fail loudly. Command-line
flags override file values; the FINSLERKIT_OUTPUT_DIR environment
variable overrides the output directory only.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field as dataclass_field, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .catalog import REGISTRY, from_expression, load_field
from .derivatives import DEFAULT_SPEC, DiffSpec
from .errors import ConfigError
from .fields import DECLARED_CLASSES
from .metrization import QuadratureSpec

OUTPUT_DIR_ENV = "FINSLERKIT_OUTPUT_DIR"

_SECTION_KEYS = {
    "metric": {"name", "file", "expression", "dimension", "class"},
    "chart": {"lower", "upper"},
    "diff": {"step", "richardson", "scheme"},
    "quadrature": {"scheme", "resolution", "samples"},
    "transport": {"step", "time"},
    "classify": {"samples", "curvature_threshold", "linearity_threshold"},
    "loewner": {"count", "tolerance"},
    "output": {"directory"},
}
_TOP_LEVEL = set(_SECTION_KEYS) | {"seed"}


@dataclass
class RunConfig:
    """Validated, flattened run settings with library defaults filled in."""

    metric: dict = dataclass_field(default_factory=dict)
    chart_lower: tuple | None = None
    chart_upper: tuple | None = None
    diff: DiffSpec = DEFAULT_SPEC
    quadrature: QuadratureSpec = QuadratureSpec()
    transport_step: float = 1e-3
    transport_time: float = 1.0
    classify_samples: int = 6
    curvature_threshold: float | None = None
    linearity_threshold: float | None = None
    loewner_count: int | None = None
    loewner_tolerance: float = 1e-7
    output_directory: str = "."
    seed: int = 0

    @property
    def chart_box(self):
        if self.chart_lower is None:
            return None
        return np.stack([np.asarray(self.chart_lower, dtype=float),
                         np.asarray(self.chart_upper, dtype=float)], axis=1)


def _check_keys(data, allowed, where):
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where};"
                          f" allowed: {sorted(allowed)}")


def _read_toml(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from None


def _positive(value, name, kind=float):
    try:
        value = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a {kind.__name__}") from None
    if value <= 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def load_run_config(path=None, overrides=None):
    """Build a RunConfig from an optional TOML file plus flag overrides.

    overrides is a flat mapping of dotted keys ("diff.step", "seed",
    "metric.name") to values, applied after the file so flags win.
    """
    data = _read_toml(path) if path else {}
    if not isinstance(data, dict):
        raise ConfigError("top level of the config must be a table")
    _check_keys(data, _TOP_LEVEL, "config top level")
    for section, keys in _SECTION_KEYS.items():
        if section in data:
            if not isinstance(data[section], dict):
                raise ConfigError(f"[{section}] must be a table")
            _check_keys(data[section], keys, f"[{section}]")

    merged = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in dotted:
            section, key = dotted.split(".", 1)
            if section not in _SECTION_KEYS or key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown override {dotted!r}")
            merged.setdefault(section, {})[key] = value
        else:
            if dotted not in _TOP_LEVEL:
                raise ConfigError(f"unknown override {dotted!r}")
            merged[dotted] = value

    cfg = RunConfig()
    if "seed" in merged:
        try:
            cfg.seed = int(merged["seed"])
        except (TypeError, ValueError):
            raise ConfigError("seed must be an integer") from None

    metric = merged.get("metric", {})
    selectors = [k for k in ("name", "file", "expression") if k in metric]
    if len(selectors) > 1:
        raise ConfigError(
            f"[metric] must use exactly one of name/file/expression, got {selectors}"
        )
    cfg.metric = dict(metric)

    chart = merged.get("chart", {})
    if ("lower" in chart) != ("upper" in chart):
        raise ConfigError("[chart] needs both lower and upper, or neither")
    if "lower" in chart:
        lower = tuple(float(v) for v in chart["lower"])
        upper = tuple(float(v) for v in chart["upper"])
        if len(lower) != len(upper):
            raise ConfigError("[chart] lower and upper lengths differ")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise ConfigError("[chart] requires lower < upper componentwise")
        cfg.chart_lower, cfg.chart_upper = lower, upper

    diff = merged.get("diff", {})
    spec_kwargs = {}
    if "step" in diff:
        spec_kwargs["base_step"] = _positive(diff["step"], "diff.step")
    if "richardson" in diff:
        spec_kwargs["richardson_levels"] = _positive(
            diff["richardson"], "diff.richardson", int)
    if "scheme" in diff:
        spec_kwargs["scheme"] = str(diff["scheme"])
    try:
        cfg.diff = replace(DEFAULT_SPEC, **spec_kwargs) if spec_kwargs \
            else DEFAULT_SPEC
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    quad = merged.get("quadrature", {})
    quad_kwargs = {"seed": cfg.seed}
    if "scheme" in quad:
        quad_kwargs["scheme"] = str(quad["scheme"])
    if "resolution" in quad:
        quad_kwargs["resolution"] = _positive(
            quad["resolution"], "quadrature.resolution", int)
    if "samples" in quad:
        quad_kwargs["samples"] = _positive(
            quad["samples"], "quadrature.samples", int)
    try:
        cfg.quadrature = QuadratureSpec(**quad_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    transport = merged.get("transport", {})
    if "step" in transport:
        cfg.transport_step = _positive(transport["step"], "transport.step")
    if "time" in transport:
        cfg.transport_time = float(transport["time"])

    classify = merged.get("classify", {})
    if "samples" in classify:
        cfg.classify_samples = _positive(classify["samples"],
                                         "classify.samples", int)
    if "curvature_threshold" in classify:
        cfg.curvature_threshold = _positive(classify["curvature_threshold"],
                                            "classify.curvature_threshold")
    if "linearity_threshold" in classify:
        cfg.linearity_threshold = _positive(classify["linearity_threshold"],
                                            "classify.linearity_threshold")

    loewner = merged.get("loewner", {})
    if "count" in loewner:
        cfg.loewner_count = _positive(loewner["count"], "loewner.count", int)
    if "tolerance" in loewner:
        cfg.loewner_tolerance = _positive(loewner["tolerance"],
                                          "loewner.tolerance")

    output = merged.get("output", {})
    if "directory" in output:
        cfg.output_directory = str(output["directory"])
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        cfg.output_directory = env_dir
    return cfg


def resolve_field(cfg):
    """Turn the [metric] section into a FinslerField."""
    metric = cfg.metric
    if "name" in metric:
        try:
            return load_field(str(metric["name"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if "file" in metric:
        return _field_from_file(str(metric["file"]))
    if "expression" in metric:
        return _field_from_table(metric, where="[metric]")
    raise ConfigError(
        "no metric selected; set metric.name, metric.file, or"
        f" metric.expression (registry: {sorted(REGISTRY)})"
    )


def _field_from_file(path):
    data = _read_toml(path)
    _check_keys(data, {"metric"}, f"metric file {path}")
    if "metric" not in data or not isinstance(data["metric"], dict):
        raise ConfigError(f"metric file {path} needs a [metric] table")
    table = data["metric"]
    _check_keys(table, {"name", "expression", "dimension", "class"},
                f"[metric] in {path}")
    if "expression" not in table:
        raise ConfigError(f"metric file {path} must define an expression")
    return _field_from_table(table, where=path)


def _field_from_table(table, where):
    if "dimension" not in table:
        raise ConfigError(f"{where}: expression metrics need a dimension")
    dimension = _positive(table["dimension"], "metric.dimension", int)
    declared = str(table.get("class", "finsler"))
    if declared not in DECLARED_CLASSES:
        raise ConfigError(
            f"{where}: class must be one of {DECLARED_CLASSES}, got {declared!r}"
        )
    name = str(table.get("name", "expression"))
    try:
        return from_expression(str(table["expression"]), dimension,
                               name=name, declared_class=declared)
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from None
