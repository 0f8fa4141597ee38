"""Command-line front end.

Subcommands: validate, classify, geodesic, transport, metrize, loewner,
report. Every command accepts --config (a TOML run file, see config.py)
plus flags that override individual config keys; flags always win.

Exit codes
    0  success (classify: verdict berwald)
    1  the geometry said no: axiom failure, non-Berwald verdict,
       or a module error during the run
    2  configuration problem: unknown metric, malformed config or flag
    3  classify/report only: classification is inconclusive

Artifacts are JSON (and CSV for trajectories) written into the output
directory, named <command>_<metric>.<ext>; --output replaces the JSON
path. Reports carry their timestamp in a separate header field so the
body stays byte-identical across reruns with the same config and seed.
"""
from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .catalog import REGISTRY
from .config import RunConfig, load_run_config, resolve_field
from .connection import classify_berwald, extract_base_connection
from .ellipsoid import loewner_metric, proportionality_check
from .errors import ConfigError, FinslerKitError
from .fields import validate
from .metrization import (averaged_metric, averaged_metric_field,
                          levi_civita, metric_compatibility_residual)
from .transport import Polyline, integrate_geodesic, parallel_transport

try:
    from importlib.metadata import version as _dist_version
    VERSION = _dist_version("finslerkit")
except Exception:  # not installed; running from a checkout
    VERSION = "0.1.0"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _artifact_path(cfg, args, stem, ext="json"):
    if ext == "json" and getattr(args, "output", None):
        return Path(args.output)
    return Path(cfg.output_directory) / f"{stem}.{ext}"


def _vector(text, n, what):
    try:
        values = [float(p) for p in text.split(",")]
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated numbers,"
                          f" got {text!r}") from None
    if len(values) != n:
        raise ConfigError(f"{what} has {len(values)} components,"
                          f" metric dimension is {n}")
    return np.asarray(values)


def _vertices(text, n):
    return [_vector(part, n, "vertex") for part in text.split(";") if part]


def _default_x(args, field):
    if getattr(args, "x", None):
        return _vector(args.x, field.dimension, "--x")
    return np.zeros(field.dimension)


def _require_surface(field, command):
    if field.dimension < 2:
        raise ConfigError(
            f"{command} needs chart dimension >= 2,"
            f" metric {field.name!r} has dimension {field.dimension}"
        )


# ---------------------------------------------------------------------------
# subcommands

def cmd_validate(cfg, field, args):
    report = validate(field, samples=args.samples, seed=cfg.seed,
                      box=cfg.chart_box, spec=cfg.diff)
    path = _write_json(_artifact_path(cfg, args, f"validate_{field.name}"),
                       report.to_dict())
    for name, result in report.checks.items():
        print(f"  {name}: {'pass' if result.passed else 'FAIL'}")
    if report.smoothness_warnings:
        print(f"  smoothness warnings: {len(report.smoothness_warnings)}")
    if report.evaluation_errors:
        print(f"  evaluation errors: {len(report.evaluation_errors)}")
    print(f"{'ok' if report.passed else 'FAILED'}: wrote {path}")
    return 0 if report.passed else 1


def _run_classifier(cfg, field):
    kwargs = {"spec": cfg.diff, "num_x": cfg.classify_samples,
              "seed": cfg.seed, "box": cfg.chart_box}
    if cfg.curvature_threshold is not None:
        kwargs["curvature_threshold"] = cfg.curvature_threshold
    if cfg.linearity_threshold is not None:
        kwargs["linearity_threshold"] = cfg.linearity_threshold
    return classify_berwald(field, **kwargs)


def cmd_classify(cfg, field, args):
    report = _run_classifier(cfg, field)
    path = _write_json(_artifact_path(cfg, args, f"classify_{field.name}"),
                       report.to_dict())
    print(f"verdict: {report.verdict}"
          f" (curvature {report.max_curvature_norm:.3e},"
          f" linearity {report.linearity_residual:.3e})")
    print(f"wrote {path}")
    return {"berwald": 0, "non_berwald": 1}.get(report.verdict, 3)


def cmd_geodesic(cfg, field, args):
    n = field.dimension
    x0 = _vector(args.x0, n, "--x0")
    y0 = _vector(args.y0, n, "--y0")
    T = args.T if args.T is not None else cfg.transport_time
    if T <= 0:
        raise ConfigError("--T must be positive")
    trajectory = integrate_geodesic(field, x0, y0, T, step=cfg.transport_step,
                                    spec=cfg.diff, chart_box=cfg.chart_box)
    csv_path = _artifact_path(cfg, args, f"geodesic_{field.name}", "csv")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    trajectory.write_csv(csv_path)
    summary = {
        "metric": field.name,
        "x0": x0, "y0": y0, "T": T, "step": cfg.transport_step,
        "final_position": trajectory.final_position,
        "final_velocity": trajectory.final_vector,
        "energy_drift": trajectory.max_drift,
        "samples": len(trajectory.times),
    }
    json_path = _write_json(
        _artifact_path(cfg, args, f"geodesic_{field.name}"), summary)
    print(f"energy drift {trajectory.max_drift:.3e};"
          f" wrote {csv_path} and {json_path}")
    return 0


def cmd_transport(cfg, field, args):
    n = field.dimension
    vertices = _vertices(args.vertices, n)
    if len(vertices) < 2:
        raise ConfigError("--vertices needs at least two points")
    curve = Polyline(vertices)
    v0 = _vector(args.v0, n, "--v0")
    connection = args.connection
    if connection == "base":
        from .connection import BaseConnection
        connection = BaseConnection.from_berwald(field, spec=cfg.diff)
    trajectory = parallel_transport(field, curve, v0, step=cfg.transport_step,
                                    spec=cfg.diff, connection=connection,
                                    chart_box=cfg.chart_box)
    csv_path = _artifact_path(cfg, args, f"transport_{field.name}", "csv")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    trajectory.write_csv(csv_path)
    summary = {
        "metric": field.name,
        "v0": v0, "step": cfg.transport_step,
        "connection": args.connection,
        "final_vector": trajectory.final_vector,
        "norm_drift": trajectory.max_drift,
        "closed_loop": bool(curve.is_closed()),
        "samples": len(trajectory.times),
    }
    json_path = _write_json(
        _artifact_path(cfg, args, f"transport_{field.name}"), summary)
    print(f"norm drift {trajectory.max_drift:.3e};"
          f" wrote {csv_path} and {json_path}")
    return 0


def cmd_metrize(cfg, field, args):
    _require_surface(field, "metrize")
    x = _default_x(args, field)
    form = averaged_metric(field, x, quadrature=cfg.quadrature, spec=cfg.diff)
    payload = {
        "metric": field.name,
        "x": x,
        "averaged": form.matrix,
        "diagnostics": form.diagnostics,
    }
    path = _write_json(_artifact_path(cfg, args, f"metrize_{field.name}"),
                       payload)
    print(f"averaged form spread {form.diagnostics.get('spread', 0.0):.3e};"
          f" wrote {path}")
    return 0


def cmd_loewner(cfg, field, args):
    _require_surface(field, "loewner")
    x = _default_x(args, field)
    form = loewner_metric(field, x, count=cfg.loewner_count,
                          tolerance=cfg.loewner_tolerance, seed=cfg.seed)
    averaged = averaged_metric(field, x, quadrature=cfg.quadrature,
                               spec=cfg.diff, refine=False)
    comparison = proportionality_check(form, averaged)
    payload = {
        "metric": field.name,
        "x": x,
        "A": form.matrix,
        "containment": form.diagnostics,
        "averaged": averaged.matrix,
        "proportionality": comparison,
    }
    path = _write_json(_artifact_path(cfg, args, f"loewner_{field.name}"),
                       payload)
    print(f"lambda vs averaged: {comparison['lambda']:.6f}"
          f" ({'ok' if comparison['success'] else 'not proportional'});"
          f" wrote {path}")
    return 0


def cmd_report(cfg, field, args):
    _require_surface(field, "report")
    x = _default_x(args, field)
    body = {
        "config": {
            "metric": field.name,
            "dimension": field.dimension,
            "declared_class": field.declared_class,
            "seed": cfg.seed,
            "diff_step": cfg.diff.base_step,
            "x": x,
        },
    }

    validation = validate(field, samples=args.samples, seed=cfg.seed,
                          box=cfg.chart_box, spec=cfg.diff)
    body["validate"] = validation.to_dict()
    if not validation.passed:
        body["classification"] = "not_applicable"
        body["metrization"] = "not_applicable"
        body["loewner"] = "not_applicable"
        body["proportionality"] = "not_applicable"
        path = _finish_report(cfg, args, field, body)
        print(f"axioms FAILED; wrote {path}")
        return 1

    classification = _run_classifier(cfg, field)
    body["classification"] = classification.to_dict()
    verdict = classification.verdict

    loewner_form = loewner_metric(field, x, count=cfg.loewner_count,
                                  tolerance=cfg.loewner_tolerance,
                                  seed=cfg.seed)
    body["loewner"] = {"x": x, "A": loewner_form.matrix,
                       "containment": loewner_form.diagnostics}

    if verdict == "berwald":
        averaged = averaged_metric(field, x, quadrature=cfg.quadrature,
                                   spec=cfg.diff)
        gamma_hat, spread = extract_base_connection(field, x, spec=cfg.diff)
        metric_fn = averaged_metric_field(field, quadrature=cfg.quadrature,
                                          spec=cfg.diff)
        gamma_lc = levi_civita(metric_fn, x, spec=cfg.diff)
        lc_residual = float(np.abs(gamma_lc - gamma_hat).max())
        compat = metric_compatibility_residual(metric_fn, gamma_hat, x,
                                               spec=cfg.diff)
        body["metrization"] = {
            "x": x,
            "averaged": averaged.matrix,
            "diagnostics": averaged.diagnostics,
            "extraction_spread": spread,
            "levi_civita_vs_extracted": lc_residual,
            "compatibility_residual": compat,
        }
        body["proportionality"] = proportionality_check(loewner_form, averaged)
    else:
        body["metrization"] = "not_applicable"
        body["proportionality"] = "not_applicable"

    path = _finish_report(cfg, args, field, body)
    print(f"verdict {verdict}; wrote {path}")
    return 3 if verdict == "inconclusive" else 0


def _finish_report(cfg, args, field, body):
    document = {
        "header": {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "tool": "finslerkit",
            "version": VERSION,
        },
        "body": body,
    }
    return _write_json(_artifact_path(cfg, args, f"report_{field.name}"),
                       document)


# ---------------------------------------------------------------------------
# argument wiring

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="finslerkit",
        description="chart-local Finsler geometry: validation,"
                    " Berwald classification, transport, metrization",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML run configuration file")
        p.add_argument("--metric", help=f"registry name ({', '.join(sorted(REGISTRY))})")
        p.add_argument("--metric-file", help="metric definition TOML file")
        p.add_argument("--seed", type=int, help="seed for all randomness")
        p.add_argument("--step", type=float, help="differentiation base step")
        p.add_argument("--output-dir", help="artifact directory")
        p.add_argument("--output", help="explicit JSON artifact path")

    p = sub.add_parser("validate", help="sample the declared axioms")
    common(p)
    p.add_argument("--samples", type=int, default=500)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("classify", help="Berwald / non-Berwald verdict")
    common(p)
    p.add_argument("--samples", type=int, help="number of chart points probed")
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("geodesic", help="integrate a geodesic (RK4)")
    common(p)
    p.add_argument("--x0", required=True, help="start point, comma-separated")
    p.add_argument("--y0", required=True, help="start velocity")
    p.add_argument("--T", type=float, help="parameter length")
    p.add_argument("--ode-step", type=float, help="RK4 step")
    p.set_defaults(handler=cmd_geodesic)

    p = sub.add_parser("transport", help="parallel transport along a polyline")
    common(p)
    p.add_argument("--vertices", required=True,
                   help="semicolon-separated points, e.g. '0,0;1,0;1,1'")
    p.add_argument("--v0", required=True, help="vector to transport")
    p.add_argument("--ode-step", type=float, help="RK4 step")
    p.add_argument("--connection", choices=("canonical", "base"),
                   default="canonical")
    p.set_defaults(handler=cmd_transport)

    p = sub.add_parser("metrize", help="averaged bilinear form at a point")
    common(p)
    p.add_argument("--x", help="chart point (default: origin)")
    p.add_argument("--resolution", type=int, help="sphere quadrature resolution")
    p.set_defaults(handler=cmd_metrize)

    p = sub.add_parser("loewner", help="Loewner form of the indicatrix")
    common(p)
    p.add_argument("--x", help="chart point (default: origin)")
    p.add_argument("--count", type=int, help="indicatrix sample count")
    p.set_defaults(handler=cmd_loewner)

    p = sub.add_parser("report", help="full pipeline, one JSON document")
    common(p)
    p.add_argument("--x", help="chart point (default: origin)")
    p.add_argument("--samples", type=int, default=500,
                   help="validation sample count")
    p.set_defaults(handler=cmd_report)
    return parser


def _overrides(args):
    mapping = {
        "metric.name": getattr(args, "metric", None),
        "metric.file": getattr(args, "metric_file", None),
        "seed": getattr(args, "seed", None),
        "diff.step": getattr(args, "step", None),
        "output.directory": getattr(args, "output_dir", None),
        "transport.step": getattr(args, "ode_step", None),
        "classify.samples": getattr(args, "samples", None)
        if args.command == "classify" else None,
        "quadrature.resolution": getattr(args, "resolution", None),
        "loewner.count": getattr(args, "count", None),
    }
    return {k: v for k, v in mapping.items() if v is not None}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_run_config(args.config, _overrides(args))
        field = resolve_field(cfg)
        return args.handler(cfg, field, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FinslerKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
