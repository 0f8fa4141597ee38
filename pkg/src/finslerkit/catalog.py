"""Built-in metric families and the named registry.

Factories return FinslerField instances; the registry maps the CLI
metric names to zero-argument constructors. Evaluators are written in
plain scalar Python because they sit at the bottom of every stencil and
integrator loop.
"""
from __future__ import annotations

import math

import numpy as np

from .dsl import MetricExpression, parse_expression
from .fields import FinslerField


def euclidean(n=2):
    """Flat Euclidean norm sqrt(sum y_i^2)."""
    if n == 2:
        def f(x, y):
            return math.sqrt(y[0] * y[0] + y[1] * y[1])
    else:
        def f(x, y):
            return math.sqrt(sum(float(v) * float(v) for v in y))

    eye = np.eye(n)
    return FinslerField(
        dimension=n, func=f, name=f"euclidean{n}", family="euclidean",
        metric_matrix=lambda x: eye.copy(),
    )


def riemannian(metric_fn, n, name="riemannian"):
    """Field F = sqrt(y . g(x) . y) for a user-supplied matrix evaluator."""

    def f(x, y):
        g = np.asarray(metric_fn(x), dtype=float)
        yv = np.asarray(y, dtype=float)
        return math.sqrt(float(yv @ g @ yv))

    return FinslerField(
        dimension=n, func=f, name=name, family="riemannian",
        metric_matrix=metric_fn,
    )


def conformal_exp(n=2):
    """Conformally flat metric exp(2 x1) * identity.

    In two dimensions it is isometric to the flat plane (log coordinates),
    so closed loops have trivial holonomy.
    """
    if n == 2:
        def f(x, y):
            return math.exp(x[0]) * math.sqrt(y[0] * y[0] + y[1] * y[1])
    else:
        def f(x, y):
            return math.exp(x[0]) * math.sqrt(sum(float(v) * float(v) for v in y))

    def metric_fn(x):
        return math.exp(2.0 * x[0]) * np.eye(n)

    name = "conformal_exp" if n == 2 else f"conformal_exp{n}"
    return FinslerField(
        dimension=n, func=f, name=name, family="riemannian",
        metric_matrix=metric_fn,
    )


def sphere_stereo(n=2):
    """Round unit sphere in stereographic chart, g = 4 (1 + |x|^2)^-2 * identity."""
    if n == 2:
        def f(x, y):
            c = 2.0 / (1.0 + x[0] * x[0] + x[1] * x[1])
            return c * math.sqrt(y[0] * y[0] + y[1] * y[1])
    else:
        def f(x, y):
            c = 2.0 / (1.0 + sum(float(v) * float(v) for v in x))
            return c * math.sqrt(sum(float(v) * float(v) for v in y))

    def metric_fn(x):
        c = 2.0 / (1.0 + sum(float(v) * float(v) for v in x))
        return (c * c) * np.eye(n)

    name = "sphere_stereo" if n == 2 else f"sphere_stereo{n}"
    return FinslerField(
        dimension=n, func=f, name=name, family="riemannian",
        metric_matrix=metric_fn,
    )


def randers(drift, n=2, name="randers"):
    """Randers-type field |y| + b(x) . y over the Euclidean base norm.

    drift is either a constant covector (sequence of n floats) or a
    callable x -> covector. Positivity requires |b(x)| < 1 on the chart.
    """
    if callable(drift):
        b_fn = drift
    else:
        const = tuple(float(v) for v in drift)

        def b_fn(x):
            return const

    if n == 2:
        def f(x, y):
            b = b_fn(x)
            return (math.sqrt(y[0] * y[0] + y[1] * y[1])
                    + b[0] * y[0] + b[1] * y[1])
    else:
        def f(x, y):
            b = b_fn(x)
            return (math.sqrt(sum(float(v) * float(v) for v in y))
                    + sum(float(bi) * float(yi) for bi, yi in zip(b, y)))

    return FinslerField(
        dimension=n, func=f, name=name, family="randers",
        params={"drift": drift if not callable(drift) else "callable"},
    )


def minkowski_quartic(n=2):
    """Quartic Minkowski gauge (sum y_i^4)^(1/4).

    Position independent, subadditive, smooth away from 0, but its
    fundamental tensor degenerates on the coordinate axes, so it is a
    gauge rather than a Finsler norm.
    """
    if n == 2:
        def f(x, y):
            a = y[0] * y[0]
            b = y[1] * y[1]
            return (a * a + b * b) ** 0.25
    else:
        def f(x, y):
            return sum(float(v) ** 4 for v in y) ** 0.25

    return FinslerField(
        dimension=n, func=f, name=f"quartic{n}", family="minkowski_quartic",
        declared_class="gauge",
    )


def from_expression(expr, dimension=None, name="expression", declared_class="finsler"):
    """Wrap a metric expression (source text or parsed) as a field."""
    if isinstance(expr, MetricExpression):
        parsed = expr
        if dimension is not None and dimension != parsed.dimension:
            raise ValueError(
                f"expression has dimension {parsed.dimension}, requested {dimension}"
            )
    else:
        if dimension is None:
            raise ValueError("dimension is required when parsing source text")
        parsed = parse_expression(expr, dimension)
    return FinslerField(
        dimension=parsed.dimension,
        func=parsed.evaluate,
        name=name,
        family="expression",
        declared_class=declared_class,
        params={"source": parsed.source or parsed.to_source()},
    )


def _randers_curved_drift(x):
    return (0.0, 0.5 * float(x[0]))


REGISTRY = {
    "euclidean2": lambda: euclidean(2),
    "euclidean3": lambda: euclidean(3),
    "quartic2": lambda: minkowski_quartic(2),
    "quartic3": lambda: minkowski_quartic(3),
    "randers_flat": lambda: randers((0.5, 0.0), 2, name="randers_flat"),
    "randers_curved": lambda: randers(_randers_curved_drift, 2, name="randers_curved"),
    "conformal_exp": lambda: conformal_exp(2),
    "conformal_exp3": lambda: conformal_exp(3),
    "sphere_stereo": lambda: sphere_stereo(2),
    "sphere_stereo3": lambda: sphere_stereo(3),
}

# the standard six-member planar test corpus
CORPUS = (
    "euclidean2", "quartic2", "randers_flat",
    "randers_curved", "conformal_exp", "sphere_stereo",
)

# the same corpus written in the expression language; used to check that
# the parser and the native evaluators agree
DSL_SOURCES = {
    "euclidean2": "sqrt(y1^2 + y2^2)",
    "quartic2": "(y1^4 + y2^4)^(1/4)",
    "randers_flat": "sqrt(y1^2 + y2^2) + 0.5*y1",
    "randers_curved": "sqrt(y1^2 + y2^2) + 0.5*x1*y2",
    "conformal_exp": "exp(x1) * sqrt(y1^2 + y2^2)",
    "sphere_stereo": "2 / (1 + x1^2 + x2^2) * sqrt(y1^2 + y2^2)",
}


def available_fields():
    return sorted(REGISTRY)


def load_field(name):
    """Instantiate a registry metric by name."""
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown metric {name!r}; available: {', '.join(available_fields())}"
        ) from None
    return factory()
