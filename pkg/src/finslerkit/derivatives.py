"""Finite-difference engine for scalar fields on a chart.

All stencils are central and second order; Richardson extrapolation over
step halving raises the order by two per level. Mixed partials are
tensor products of one-dimensional stencils, so a fourth-order mixed
partial is a nested pair of second-order stencils.

Fields are callables f(x, y) -> float with x the chart point and y the
fiber vector. Steps are relative: each differentiated coordinate gets
step base_step * max(1, |coordinate|), clamped below at 1e-6. Fiber
stencils must not reach the zero section, where Finsler data is not
smooth; the step is halved until the stencil stays inside the half ball
around y, and placement fails if that needs more than ~40 halvings.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import StencilError

STEP_FLOOR = 1e-6

# one-dimensional central stencils, (offset, coefficient) pairs; the
# divided value is sum(c * f(t + off*h)) / h**order, error O(h^2)
STENCILS_1D = {
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


@dataclass(frozen=True)
class DiffSpec:
    """Differentiation settings.

    scheme: only "central" is implemented.
    base_step: relative step scale (default 1e-4 of coordinate magnitude).
    richardson_levels: 1 means plain stencils, each extra level halves the
        step once and extrapolates, gaining two orders of accuracy.
    """

    scheme: str = "central"
    base_step: float = 1e-4
    richardson_levels: int = 2

    def __post_init__(self):
        if self.scheme != "central":
            raise ValueError(f"unsupported scheme {self.scheme!r}")
        if not (self.base_step > 0):
            raise ValueError("base_step must be positive")
        if self.richardson_levels < 1:
            raise ValueError("richardson_levels must be >= 1")


DEFAULT_SPEC = DiffSpec()


def relative_steps(values, base_step):
    """Per-coordinate steps base_step * max(1, |v|), clamped at STEP_FLOOR."""
    v = np.abs(np.asarray(values, dtype=float))
    return np.maximum(base_step * np.maximum(v, 1.0), STEP_FLOOR)


def richardson(values):
    """Extrapolate a sequence of O(h^2) approximations at steps h, h/2, ...

    Standard triangular tableau with ratio 2 and even error expansion.
    """
    tableau = list(values)
    width = len(tableau)
    for level in range(1, width):
        factor = 4.0 ** level
        tableau = [
            (factor * tableau[k + 1] - tableau[k]) / (factor - 1.0)
            for k in range(width - level)
        ]
    return tableau[0]


def _product_stencil(orders):
    """Combine per-axis 1D stencils into offset vectors and coefficients.

    orders maps axis -> derivative order on that axis.
    """
    axes = sorted(orders)
    pieces = [STENCILS_1D[orders[a]] for a in axes]
    combos = []
    for choice in itertools.product(*pieces):
        offsets = {a: off for a, (off, _) in zip(axes, choice)}
        coeff = math.prod(c for _, c in choice)
        combos.append((offsets, coeff))
    return axes, combos


def _apply_stencil(f, x, y, orders, steps, fiber):
    """Evaluate one product stencil at the given per-axis steps."""
    axes, combos = _product_stencil(orders)
    total = 0.0
    base = np.asarray(y if fiber else x, dtype=float)
    for offsets, coeff in combos:
        point = base.copy()
        for a, off in offsets.items():
            point[a] += off * steps[a]
        value = f(x, point) if fiber else f(point, y)
        total += coeff * value
    scale = math.prod(steps[a] ** orders[a] for a in axes)
    return total / scale


def _guard_fiber_steps(y, orders, steps):
    """Shrink fiber steps so the stencil keeps away from y = 0."""
    norm = float(np.linalg.norm(y))
    if norm == 0.0:
        raise StencilError("cannot place a fiber stencil at y = 0")
    reach_units = {a: max(abs(o) for o, _ in STENCILS_1D[m]) for a, m in orders.items()}
    steps = dict(steps)
    for _ in range(40):
        reach = math.sqrt(sum((reach_units[a] * steps[a]) ** 2 for a in orders))
        if reach < 0.5 * norm:
            return steps
        steps = {a: h / 2.0 for a, h in steps.items()}
    raise StencilError(
        f"stencil cannot avoid the zero section at |y| = {norm:.3e}"
    )


def _derivative(f, x, y, multi_index, spec, fiber):
    orders = Counter(int(i) for i in multi_index)
    n = len(y) if fiber else len(x)
    for a in orders:
        if not (0 <= a < n):
            raise IndexError(f"axis {a} out of range for dimension {n}")
    total_order = sum(orders.values())
    if not (1 <= total_order <= 4):
        raise ValueError(f"derivative order must be 1..4, got {total_order}")
    coords = y if fiber else x
    base = relative_steps(coords, spec.base_step)
    steps = {a: float(base[a]) for a in orders}
    if fiber:
        steps = _guard_fiber_steps(np.asarray(y, dtype=float), orders, steps)
    values = []
    for level in range(spec.richardson_levels):
        scaled = {a: h / 2.0 ** level for a, h in steps.items()}
        values.append(_apply_stencil(f, x, y, orders, scaled, fiber))
    return richardson(values)


def partial_y(f, x, y, multi_index, spec=DEFAULT_SPEC):
    """Mixed fiber partial of f at (x, y).

    multi_index lists 0-based y-axes with repetition, up to total order 4;
    for example (0, 0, 1) is d^3 f / dy1^2 dy2 in 1-based notation.
    """
    return _derivative(f, x, np.asarray(y, dtype=float), multi_index, spec, fiber=True)


def partial_x(f, x, y, index, spec=DEFAULT_SPEC):
    """First-order chart partial d f / dx[index] at (x, y)."""
    return _derivative(f, np.asarray(x, dtype=float), y, (index,), spec, fiber=False)


def directional_y(f, x, y, direction, spec=DEFAULT_SPEC):
    """Derivative of s -> f(x, y + s*direction) at s = 0.

    A single one-dimensional stencil along the direction; this is the
    contraction sum_i direction_i df/dy_i without n separate stencils.
    """
    y = np.asarray(y, dtype=float)
    v = np.asarray(direction, dtype=float)
    vmax = float(np.abs(v).max())
    if vmax == 0.0:
        return 0.0
    ymax = float(np.abs(y).max())
    h = max(spec.base_step * max(ymax, 1.0) / vmax, STEP_FLOOR / vmax)
    norm = float(np.linalg.norm(y))
    if norm == 0.0:
        raise StencilError("cannot place a fiber stencil at y = 0")
    vnorm = float(np.linalg.norm(v))
    for _ in range(40):
        if h * vnorm < 0.5 * norm:
            break
        h /= 2.0
    else:
        raise StencilError(f"stencil cannot avoid the zero section at |y| = {norm:.3e}")
    values = []
    for level in range(spec.richardson_levels):
        hh = h / 2.0 ** level
        values.append((f(x, y + hh * v) - f(x, y - hh * v)) / (2.0 * hh))
    return richardson(values)


def radial_derivative(f, x, y, spec=DEFAULT_SPEC):
    """Radial fiber derivative sum_i y_i df/dy_i at (x, y).

    Computed as the derivative of s -> f(x, (1 + s) y) at s = 0, which
    stays exactly on the ray through y.
    """
    y = np.asarray(y, dtype=float)
    if float(np.linalg.norm(y)) == 0.0:
        raise StencilError("radial derivative undefined at y = 0")
    h = spec.base_step
    values = []
    for level in range(spec.richardson_levels):
        hh = h / 2.0 ** level
        values.append((f(x, (1.0 + hh) * y) - f(x, (1.0 - hh) * y)) / (2.0 * hh))
    return richardson(values)
