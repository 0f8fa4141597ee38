"""Geodesics, parallel transport, and holonomy by fixed-step RK4.

The geodesic equation is integrated as the first-order system

    x' = y,   y' = -2 G(x, y)

using the degree-2 homogeneity of the spray (G^i_j y^j = 2 G^i), and
parallel transport of X along a curve gamma as

    X' = -N(gamma, X) . gamma'

where N is either the canonical nonlinear connection (evaluated at the
transported vector, one directional spray stencil per stage) or a
position-only base connection table.

Curves are parameterized on [0, 1] and may have corners (polylines);
integration restarts cleanly at every corner so the transported frame
never sees a jump in gamma'. A declared chart box is a hard boundary:
stepping outside raises instead of extrapolating.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .connection import BaseConnection, spray_coefficients, spray_directional
from .derivatives import DEFAULT_SPEC
from .errors import ChartBoxError, IntegrationError
from .fields import FinslerField

GUARD_RADIUS = 1e-8  # below this |y| the slit-domain data is meaningless


# ---------------------------------------------------------------------------
# curves

class Curve:
    """Piecewise-smooth curve on [0, 1].

    Subclasses provide position(t) and velocity(t); breakpoints lists the
    parameter values (including 0 and 1) where smoothness may fail, and
    integration is restarted at each of them.
    """

    breakpoints = (0.0, 1.0)

    def position(self, t):
        raise NotImplementedError

    def velocity(self, t):
        raise NotImplementedError

    def is_closed(self, tol=1e-12):
        return bool(np.linalg.norm(self.position(1.0) - self.position(0.0)) <= tol)


class Segment(Curve):
    def __init__(self, start, end):
        self.start = np.asarray(start, dtype=float)
        self.end = np.asarray(end, dtype=float)

    def position(self, t):
        return self.start + t * (self.end - self.start)

    def velocity(self, t):
        return self.end - self.start


class Polyline(Curve):
    """Straight segments through the given vertices.

    The parameter is allocated proportionally to Euclidean segment length
    so |gamma'| is constant along the whole curve.
    """

    def __init__(self, vertices):
        pts = [np.asarray(v, dtype=float) for v in vertices]
        if len(pts) < 2:
            raise ValueError("a polyline needs at least two vertices")
        lengths = [float(np.linalg.norm(b - a)) for a, b in zip(pts[:-1], pts[1:])]
        if any(l == 0.0 for l in lengths):
            raise ValueError("polyline vertices must be pairwise distinct in sequence")
        total = sum(lengths)
        knots = [0.0]
        for l in lengths:
            knots.append(knots[-1] + l / total)
        knots[-1] = 1.0
        self.vertices = pts
        self.knots = knots
        self.total_length = total
        self.breakpoints = tuple(knots)

    def _segment(self, t):
        # rightmost segment whose knot interval contains t
        for k in range(len(self.vertices) - 1):
            if t <= self.knots[k + 1] or k == len(self.vertices) - 2:
                if t >= self.knots[k]:
                    return k
        return len(self.vertices) - 2

    def position(self, t):
        k = self._segment(t)
        t0, t1 = self.knots[k], self.knots[k + 1]
        s = (t - t0) / (t1 - t0)
        return self.vertices[k] + s * (self.vertices[k + 1] - self.vertices[k])

    def velocity(self, t):
        k = self._segment(t)
        t0, t1 = self.knots[k], self.knots[k + 1]
        return (self.vertices[k + 1] - self.vertices[k]) / (t1 - t0)


class CircleArc(Curve):
    """Arc of a coordinate circle, full circle by default.

    axes selects the coordinate plane in charts of dimension above two.
    """

    def __init__(self, center, radius, angle_start=0.0, angle_sweep=2.0 * math.pi,
                 axes=(0, 1)):
        self.center = np.asarray(center, dtype=float)
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.angle_start = float(angle_start)
        self.angle_sweep = float(angle_sweep)
        self.axes = axes

    def position(self, t):
        a = self.angle_start + t * self.angle_sweep
        p = self.center.copy()
        p[self.axes[0]] += self.radius * math.cos(a)
        p[self.axes[1]] += self.radius * math.sin(a)
        return p

    def velocity(self, t):
        a = self.angle_start + t * self.angle_sweep
        v = np.zeros_like(self.center)
        v[self.axes[0]] = -self.radius * self.angle_sweep * math.sin(a)
        v[self.axes[1]] = self.radius * self.angle_sweep * math.cos(a)
        return v


class ParametricCurve(Curve):
    """Curve from user callables; velocity falls back to central differences."""

    def __init__(self, position_fn, velocity_fn=None, fd_step=1e-6):
        self.position_fn = position_fn
        self.velocity_fn = velocity_fn
        self.fd_step = fd_step

    def position(self, t):
        return np.asarray(self.position_fn(t), dtype=float)

    def velocity(self, t):
        if self.velocity_fn is not None:
            return np.asarray(self.velocity_fn(t), dtype=float)
        h = self.fd_step
        lo, hi = max(t - h, 0.0), min(t + h, 1.0)
        return (self.position(hi) - self.position(lo)) / (hi - lo)


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    """Sampled solution of a geodesic or transport problem.

    positions holds gamma(t); vectors holds gamma'(t) for geodesics and
    the transported vector for transport runs. diagnostic_name says what
    the per-sample diagnostic series measures (energy or norm drift
    source value).
    """

    times: np.ndarray
    positions: np.ndarray
    vectors: np.ndarray
    diagnostic_name: str
    diagnostics: np.ndarray
    meta: dict = dataclass_field(default_factory=dict)

    @property
    def final_position(self):
        return self.positions[-1]

    @property
    def final_vector(self):
        return self.vectors[-1]

    @property
    def max_drift(self):
        ref = self.diagnostics[0]
        return float(np.abs(self.diagnostics - ref).max())

    def to_json_dict(self):
        return {
            "times": self.times.tolist(),
            "positions": self.positions.tolist(),
            "vectors": self.vectors.tolist(),
            "diagnostic_name": self.diagnostic_name,
            "diagnostics": self.diagnostics.tolist(),
            "max_drift": self.max_drift,
            "meta": self.meta,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path):
        n = self.positions.shape[1]
        header = (["t"] + [f"x{i + 1}" for i in range(n)]
                  + [f"y{i + 1}" for i in range(n)] + ["diagnostic"])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(len(self.times)):
                row = ([repr(float(self.times[k]))]
                       + [repr(float(v)) for v in self.positions[k]]
                       + [repr(float(v)) for v in self.vectors[k]]
                       + [repr(float(self.diagnostics[k]))])
                writer.writerow(row)


def _check_state(x, y, chart_box, require_speed):
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise IntegrationError("integration produced a non-finite state")
    if require_speed and float(np.linalg.norm(y)) < GUARD_RADIUS:
        raise IntegrationError(
            f"velocity collapsed below the guard radius {GUARD_RADIUS:g};"
            " the slit-domain equations are undefined there"
        )
    if chart_box is not None:
        box = np.asarray(chart_box, dtype=float)
        if np.any(x < box[:, 0]) or np.any(x > box[:, 1]):
            raise ChartBoxError(
                f"trajectory left the chart box at x={x!r}; declare a larger"
                " box instead of extrapolating"
            )


def integrate_geodesic(field, x0, y0, T, step, spec=DEFAULT_SPEC,
                       connection="canonical", chart_box=None):
    """Geodesic through (x0, y0) over parameter length T at fixed RK4 step.

    connection is "canonical" or a BaseConnection; the canonical route
    uses y' = -2 G(x, y) which is the exact contraction N(x, y) y.
    """
    if step <= 0 or T <= 0:
        raise ValueError("step and T must be positive")
    x = np.asarray(x0, dtype=float).copy()
    y = np.asarray(y0, dtype=float).copy()
    _check_state(x, y, chart_box, require_speed=True)

    if isinstance(connection, BaseConnection):
        table = connection

        def accel(x_, y_):
            gamma = table(x_)
            return -np.einsum("ijk,j,k->i", gamma, y_, y_)
        kind = f"base({table.provenance})"
    elif connection == "canonical":
        def accel(x_, y_):
            return -2.0 * spray_coefficients(field, x_, y_, spec)
        kind = "canonical"
    else:
        raise ValueError(f"unknown connection {connection!r}")

    nsteps = max(int(math.ceil(T / step - 1e-9)), 1)
    dt = T / nsteps
    times = [0.0]
    xs = [x.copy()]
    ys = [y.copy()]
    diag = [_energy_value(field, x, y)]
    for k in range(nsteps):
        k1x, k1y = y, accel(x, y)
        k2x = y + 0.5 * dt * k1y
        k2y = accel(x + 0.5 * dt * k1x, k2x)
        k3x = y + 0.5 * dt * k2y
        k3y = accel(x + 0.5 * dt * k2x, k3x)
        k4x = y + dt * k3y
        k4y = accel(x + dt * k3x, k4x)
        x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        _check_state(x, y, chart_box, require_speed=True)
        times.append((k + 1) * dt)
        xs.append(x.copy())
        ys.append(y.copy())
        diag.append(_energy_value(field, x, y))
    return Trajectory(
        times=np.asarray(times), positions=np.stack(xs), vectors=np.stack(ys),
        diagnostic_name="energy", diagnostics=np.asarray(diag),
        meta={"kind": "geodesic", "connection": kind, "step": step, "T": T,
              "field": field.name},
    )


def _energy_value(field, x, y):
    value = field(x, y)
    return 0.5 * value * value


def parallel_transport(field, curve, v0, step, spec=DEFAULT_SPEC,
                       connection="canonical", chart_box=None):
    """Transport v0 along the curve, sampling the F-norm as diagnostic.

    The ODE is X' = -N(gamma(t), X) gamma'(t). With the canonical
    connection N is evaluated at the transported vector itself, which is
    what makes F(X) a conserved quantity; with a base connection the
    coefficient table only sees the base point.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    v = np.asarray(v0, dtype=float).copy()
    if float(np.linalg.norm(v)) < GUARD_RADIUS:
        raise IntegrationError("cannot transport a zero vector")

    use_base = isinstance(connection, BaseConnection)
    if not use_base and connection != "canonical":
        raise ValueError(f"unknown connection {connection!r}")

    times = [0.0]
    xs = [curve.position(0.0)]
    vs = [v.copy()]
    diag = [float(field(xs[0], v))]
    _check_state(xs[0], v, chart_box, require_speed=False)

    breakpoints = sorted(set(float(b) for b in curve.breakpoints))
    if breakpoints[0] != 0.0 or breakpoints[-1] != 1.0:
        raise ValueError("curve breakpoints must start at 0 and end at 1")

    for t0, t1 in zip(breakpoints[:-1], breakpoints[1:]):
        span = t1 - t0
        nsteps = max(int(math.ceil(span / step - 1e-9)), 1)
        dt = span / nsteps
        eps = 1e-9 * span

        def vel(t_, lo=t0 + eps, hi=t1 - eps):
            # clamp strictly inside the open piece so a breakpoint never
            # answers with the neighboring segment's velocity
            return curve.velocity(min(max(t_, lo), hi))

        if use_base:
            def rhs(t_, v_, vel=vel):
                gamma = connection(curve.position(t_))
                return -np.einsum("ijk,j,k->i", gamma, vel(t_), v_)
        else:
            def rhs(t_, v_, vel=vel):
                return -spray_directional(field, curve.position(t_), v_,
                                          vel(t_), spec)

        t = t0
        for _ in range(nsteps):
            k1 = rhs(t, v)
            k2 = rhs(t + 0.5 * dt, v + 0.5 * dt * k1)
            k3 = rhs(t + 0.5 * dt, v + 0.5 * dt * k2)
            k4 = rhs(t + dt, v + dt * k3)
            v = v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += dt
            x_here = curve.position(t)
            _check_state(x_here, v, chart_box, require_speed=False)
            if float(np.linalg.norm(v)) < GUARD_RADIUS:
                raise IntegrationError(
                    "transported vector collapsed below the guard radius"
                )
            times.append(t)
            xs.append(x_here)
            vs.append(v.copy())
            diag.append(float(field(x_here, v)))

    return Trajectory(
        times=np.asarray(times), positions=np.stack(xs), vectors=np.stack(vs),
        diagnostic_name="norm", diagnostics=np.asarray(diag),
        meta={"kind": "transport",
              "connection": (f"base({connection.provenance})" if use_base
                             else "canonical"),
              "step": step, "field": field.name},
    )


def norm_preservation_residual(field, trajectory):
    """Largest deviation of F along the trajectory from its initial value."""
    values = [
        float(field(x, v))
        for x, v in zip(trajectory.positions, trajectory.vectors)
    ]
    ref = values[0]
    return max(abs(v - ref) for v in values)


def holonomy_loop(field, loop, step, spec=DEFAULT_SPEC, connection="canonical",
                  chart_box=None):
    """Transport the coordinate basis around a closed loop.

    Returns the matrix whose column i is the transport of e_i; for a
    linear (base) connection this is the holonomy of the loop. The loop
    must actually close (position(1) == position(0) to 1e-12).
    """
    if not loop.is_closed():
        raise ValueError("holonomy requires a closed loop")
    n = field.dimension
    columns = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        result = parallel_transport(field, loop, e, step, spec,
                                    connection=connection, chart_box=chart_box)
        columns.append(result.final_vector)
    return np.stack(columns, axis=1)


def rotation_angle(matrix):
    """Rotation angle of a near-orthogonal 2x2 matrix."""
    m = np.asarray(matrix, dtype=float)
    if m.shape != (2, 2):
        raise ValueError("rotation_angle expects a 2x2 matrix")
    return math.atan2(m[1, 0] - m[0, 1], m[0, 0] + m[1, 1])
