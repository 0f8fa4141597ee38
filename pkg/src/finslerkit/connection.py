"""Spray, nonlinear connection, and Berwald-type data of a Finsler field.

Everything is derived from the energy function by finite differences:

    G^i      quarter of g^{ij} (d^2F^2/dx^r dy^j y^r - dF^2/dx^j)
    G^i_j    dG^i/dy^j          (nonlinear connection coefficients)
    G^i_jk   d^2G^i/dy^j dy^k   (vanishing y-dependence means Berwald)
    G^i_jkl  d^3G^i/dy^j dy^k dy^l  (Berwald curvature)

Each differentiation level widens its step over DiffSpec.base_step
(factors below) to balance truncation against the noise inherited from
the level underneath; the defaults were tuned against closed forms and
sit comfortably inside the advertised 1e-4 coefficient accuracy.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .derivatives import DEFAULT_SPEC, STENCILS_1D, DiffSpec, richardson
from .errors import (
    DirectionDependenceError,
    FinslerKitError,
    SingularMetricError,
    StencilError,
)
from .fields import metric_tensor

# step multipliers over base_step for each differentiation level
SPRAY_INNER_FACTOR = 10.0   # F^2 stencils feeding the spray
SPRAY_INNER_FLOOR = 1e-3    # inner steps never shrink below this
JACOBIAN_FACTOR = 10.0      # dG/dy
HESSIAN_FACTOR = 60.0       # d2G/dy2
THIRD_FACTOR = 400.0        # d3G/dy3

_PROBE_SEED = 1723  # fixed seed for the random extraction probes

BERWALD_CURVATURE_THRESHOLD = 1e-2
BERWALD_LINEARITY_THRESHOLD = 1e-2


def _inner_spec(spec):
    # Refining base_step tightens the outer G-stencils, which is the
    # differentiation under study; the F^2 evaluations feeding the spray
    # keep a floor because shrinking them only amplifies roundoff in the
    # third-derivative stencils (the spray's own truncation at the floor
    # is ~1e-10, far below every threshold in play).
    return DiffSpec(
        base_step=max(SPRAY_INNER_FACTOR * spec.base_step, SPRAY_INNER_FLOOR),
        richardson_levels=spec.richardson_levels,
    )


def _dx_f2(f2, x, y, j, h, levels):
    x = np.asarray(x, dtype=float)
    values = []
    for level in range(levels):
        hh = h / 2.0 ** level
        xp = x.copy(); xp[j] += hh
        xm = x.copy(); xm[j] -= hh
        values.append((f2(xp, y) - f2(xm, y)) / (2.0 * hh))
    return richardson(values)


def _dxdy_f2(f2, x, y, r, j, hx, hy, levels):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    values = []
    for level in range(levels):
        ax = hx / 2.0 ** level
        ay = hy / 2.0 ** level
        xp = x.copy(); xp[r] += ax
        xm = x.copy(); xm[r] -= ax
        yp = y.copy(); yp[j] += ay
        ym = y.copy(); ym[j] -= ay
        values.append(
            (f2(xp, yp) - f2(xp, ym) - f2(xm, yp) + f2(xm, ym)) / (4.0 * ax * ay)
        )
    return richardson(values)


def spray_coefficients(field, x, y, spec=DEFAULT_SPEC):
    """Spray coefficients G^i at (x, y).

    Position-independent fields produce a bitwise-zero right-hand side
    (the x-stencils difference identical values), which short-circuits to
    an exactly zero spray without touching g; that keeps gauges with a
    degenerate fundamental tensor in some directions, like the quartic on
    its axes, usable everywhere they should be.
    """
    n = field.dimension
    f2 = field.squared
    inner = _inner_spec(spec)
    yarr = np.asarray(y, dtype=float)
    hx = inner.base_step * max(1.0, float(np.abs(np.asarray(x, dtype=float)).max()))
    hy = _guard_step(yarr, inner.base_step * _fiber_scale(yarr), 1.0)
    rhs = np.empty(n, dtype=float)
    for j in range(n):
        acc = 0.0
        for r in range(n):
            yr = float(y[r])
            if yr != 0.0:
                acc += _dxdy_f2(f2, x, y, r, j, hx, hy, inner.richardson_levels) * yr
        rhs[j] = acc - _dx_f2(f2, x, y, j, hx, inner.richardson_levels)
    if not rhs.any():
        return np.zeros(n, dtype=float)
    g = metric_tensor(field, x, y, inner, check=False)
    try:
        return 0.25 * np.linalg.solve(g, rhs)
    except np.linalg.LinAlgError:
        raise SingularMetricError(
            f"fundamental tensor is singular at x={np.asarray(x)!r},"
            f" y={np.asarray(y)!r}; spray is undefined there"
        ) from None


def _fiber_scale(y):
    return max(1.0, float(np.abs(np.asarray(y, dtype=float)).max()))


def _guard_step(y, h, reach_units):
    """Halve h until the stencil stays inside the half ball around y."""
    norm = float(np.linalg.norm(y))
    if norm == 0.0:
        raise StencilError("cannot differentiate the spray at y = 0")
    for _ in range(40):
        if reach_units * h < 0.5 * norm:
            return h
        h /= 2.0
    raise StencilError(f"stencil cannot avoid the zero section at |y| = {norm:.3e}")


def spray_directional(field, x, y, v, spec=DEFAULT_SPEC):
    """Contraction G^i_j v^j, as the derivative of s -> G(x, y + s v).

    One pair of spray evaluations instead of n, which is what parallel
    transport wants in its inner loop.
    """
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    vmax = float(np.abs(v).max())
    if vmax == 0.0:
        return np.zeros(field.dimension, dtype=float)
    h = JACOBIAN_FACTOR * spec.base_step * _fiber_scale(y) / vmax
    h = _guard_step(y, h * float(np.linalg.norm(v)), 1.0) / float(np.linalg.norm(v))
    gp = spray_coefficients(field, x, y + h * v, spec)
    gm = spray_coefficients(field, x, y - h * v, spec)
    return (gp - gm) / (2.0 * h)


def nonlinear_connection(field, x, y, spec=DEFAULT_SPEC):
    """Nonlinear connection coefficients G^i_j = dG^i/dy^j as an (n, n) matrix."""
    n = field.dimension
    y = np.asarray(y, dtype=float)
    h = _guard_step(y, JACOBIAN_FACTOR * spec.base_step * _fiber_scale(y), 1.0)
    out = np.empty((n, n), dtype=float)
    for j in range(n):
        e = np.zeros(n); e[j] = h
        gp = spray_coefficients(field, x, y + e, spec)
        gm = spray_coefficients(field, x, y - e, spec)
        out[:, j] = (gp - gm) / (2.0 * h)
    return out


def _spray_cached(field, x, y, spec, cache, key):
    value = cache.get(key)
    if value is None:
        value = spray_coefficients(field, x, y, spec)
        cache[key] = value
    return value


def berwald_coefficients(field, x, y, spec=DEFAULT_SPEC):
    """Coefficients G^i_jk = d^2 G^i / dy^j dy^k, symmetric in (j, k).

    For a Berwald field these depend only on x and equal the Christoffel
    symbols of the underlying linear connection.
    """
    n = field.dimension
    y = np.asarray(y, dtype=float)
    h = _guard_step(y, HESSIAN_FACTOR * spec.base_step * _fiber_scale(y), 1.0)
    cache = {}

    def G(offsets):
        point = y.copy()
        for axis, k in offsets:
            point[axis] += k * h
        return _spray_cached(field, x, point, spec, cache, offsets)

    out = np.empty((n, n, n), dtype=float)
    for j in range(n):
        for k in range(j, n):
            if j == k:
                value = (G(((j, 1),)) - 2.0 * G(()) + G(((j, -1),))) / (h * h)
            else:
                value = (
                    G(((j, 1), (k, 1))) - G(((j, 1), (k, -1)))
                    - G(((j, -1), (k, 1))) + G(((j, -1), (k, -1)))
                ) / (4.0 * h * h)
            out[:, j, k] = value
            out[:, k, j] = value
    return out


def berwald_curvature(field, x, y, spec=DEFAULT_SPEC):
    """Berwald curvature G^i_jkl = d^3 G^i / dy^j dy^k dy^l.

    Identically zero exactly for Berwald fields. The output is stored
    fully symmetrized over (j, k, l).
    """
    n = field.dimension
    y = np.asarray(y, dtype=float)
    h = _guard_step(y, THIRD_FACTOR * spec.base_step * _fiber_scale(y), 2.0)
    cache = {}
    out = np.empty((n, n, n, n), dtype=float)
    for multi in itertools.combinations_with_replacement(range(n), 3):
        orders = Counter(multi)
        axes = sorted(orders)
        pieces = [STENCILS_1D[orders[a]] for a in axes]
        total = np.zeros(n, dtype=float)
        for choice in itertools.product(*pieces):
            point = y.copy()
            coeff = 1.0
            key = []
            for a, (off, c) in zip(axes, choice):
                point[a] += off * h
                coeff *= c
                key.append((a, off))
            total += coeff * _spray_cached(field, x, point, spec, cache, tuple(key))
        total /= h ** 3
        for perm in set(itertools.permutations(multi)):
            out[:, perm[0], perm[1], perm[2]] = total
    return out


# ---------------------------------------------------------------------------
# classification

@dataclass
class ClassificationReport:
    field_name: str
    verdict: str  # "berwald" | "non_berwald" | "inconclusive"
    max_curvature_norm: float
    linearity_residual: float
    curvature_witness: dict | None
    linearity_witness: dict | None
    thresholds: dict
    num_x: int
    num_y: int
    seed: int
    probed_region: dict
    refinement: dict
    failures: list

    def to_dict(self):
        return {
            "field": self.field_name,
            "verdict": self.verdict,
            "max_curvature_norm": self.max_curvature_norm,
            "linearity_residual": self.linearity_residual,
            "curvature_witness": self.curvature_witness,
            "linearity_witness": self.linearity_witness,
            "thresholds": self.thresholds,
            "num_x": self.num_x,
            "num_y": self.num_y,
            "seed": self.seed,
            "probed_region": self.probed_region,
            "refinement": self.refinement,
            "failures": self.failures,
        }


def _classification_stats(field, xs, ys, spec):
    """Curvature and linearity statistics over a fixed sample set."""
    max_curv = 0.0
    curv_witness = None
    max_lin = 0.0
    lin_witness = None
    for xi, x in enumerate(xs):
        rows = []
        targets = []
        jac_scale = 0.0
        for y in ys[xi]:
            curvature = berwald_curvature(field, x, y, spec)
            coeffs = berwald_coefficients(field, x, y, spec)
            stat = float(np.abs(curvature).max()) / (1.0 + float(np.abs(coeffs).max()))
            if stat > max_curv:
                max_curv = stat
                curv_witness = {"x": list(map(float, x)), "y": list(map(float, y)),
                                "value": stat}
            jac = nonlinear_connection(field, x, y, spec)
            rows.append(np.asarray(y, dtype=float))
            targets.append(jac.reshape(-1))
            jac_scale = max(jac_scale, float(np.abs(jac).max()))
        design = np.stack(rows)                    # (m, n)
        flat = np.stack(targets)                   # (m, n*n)
        coeffs, *_ = np.linalg.lstsq(design, flat, rcond=None)
        residual = float(np.abs(design @ coeffs - flat).max()) / (1.0 + jac_scale)
        if residual > max_lin:
            max_lin = residual
            lin_witness = {"x": list(map(float, x)), "value": residual}
    return max_curv, curv_witness, max_lin, lin_witness


def classify_berwald(field, spec=DEFAULT_SPEC, num_x=5, num_y=8, seed=0, box=None,
                     curvature_threshold=BERWALD_CURVATURE_THRESHOLD,
                     linearity_threshold=BERWALD_LINEARITY_THRESHOLD):
    """Decide whether the field is Berwald on the probed chart region.

    Berwald means the connection coefficients G^i_jk carry no fiber
    dependence; numerically this shows up in two redundant ways, both of
    which must agree: the Berwald curvature norm stays under threshold
    (normalized by the coefficient scale), and G^i_j is linear in y to
    within the linearity threshold at every probed point. The statistics
    are re-evaluated at half the differentiation step before any verdict
    is final; a verdict that flips under refinement, or any numerical
    failure, yields "inconclusive" rather than a guess.
    """
    n = field.dimension
    rng = np.random.default_rng(seed)
    if box is None:
        box = np.array([[-1.0, 1.0]] * n)
    else:
        box = np.asarray(box, dtype=float)

    xs = [rng.uniform(box[:, 0], box[:, 1]) for _ in range(num_x)]
    ys = []
    for _ in range(num_x):
        group = []
        for _ in range(num_y):
            d = rng.normal(size=n)
            d /= np.linalg.norm(d)
            group.append(d * rng.uniform(0.5, 2.0))
        ys.append(group)

    thresholds = {
        "curvature": curvature_threshold,
        "linearity": linearity_threshold,
    }
    probed_region = {
        "box": box.tolist(),
        "x_samples": [list(map(float, x)) for x in xs],
        "directions_per_point": num_y,
    }

    failures = []
    half = DiffSpec(base_step=spec.base_step / 2.0,
                    richardson_levels=spec.richardson_levels)
    try:
        curv, curv_w, lin, lin_w = _classification_stats(field, xs, ys, spec)
        curv2, _, lin2, _ = _classification_stats(field, xs, ys, half)
    except FinslerKitError as exc:
        return ClassificationReport(
            field_name=field.name, verdict="inconclusive",
            max_curvature_norm=math.nan, linearity_residual=math.nan,
            curvature_witness=None, linearity_witness=None,
            thresholds=thresholds, num_x=num_x, num_y=num_y, seed=seed,
            probed_region=probed_region,
            refinement={"base_step": spec.base_step, "status": "failed"},
            failures=[{"error": str(exc)}],
        )

    def verdict_of(c, l):
        return "berwald" if (c <= curvature_threshold and l <= linearity_threshold) \
            else "non_berwald"

    first = verdict_of(curv, lin)
    second = verdict_of(curv2, lin2)
    verdict = first if first == second else "inconclusive"

    refinement = {
        "base_step": spec.base_step,
        "halved_base_step": half.base_step,
        "max_curvature_norm": curv2,
        "linearity_residual": lin2,
        "verdict": second,
    }
    return ClassificationReport(
        field_name=field.name, verdict=verdict,
        max_curvature_norm=curv, linearity_residual=lin,
        curvature_witness=curv_w, linearity_witness=lin_w,
        thresholds=thresholds, num_x=num_x, num_y=num_y, seed=seed,
        probed_region=probed_region, refinement=refinement, failures=failures,
    )


# ---------------------------------------------------------------------------
# base connection extraction

def probe_directions(n):
    """2n signed axis directions plus 8 fixed random unit directions."""
    dirs = []
    for i in range(n):
        e = np.zeros(n); e[i] = 1.0
        dirs.append(e.copy())
        dirs.append(-e)
    rng = np.random.default_rng(_PROBE_SEED)
    for _ in range(8):
        d = rng.normal(size=n)
        dirs.append(d / np.linalg.norm(d))
    return dirs


def extract_base_connection(field, x, spec=DEFAULT_SPEC, tolerance=1e-2):
    """Average G^i_jk over probe directions; error out on fiber dependence.

    Returns (gamma, spread) where gamma is the (n, n, n) probe average and
    spread the largest normalized deviation of any probe from it. A
    spread above tolerance means the coefficients genuinely depend on the
    direction, so no position-only connection exists; that raises
    DirectionDependenceError instead of returning a misleading average.
    """
    tables = []
    for d in probe_directions(field.dimension):
        tables.append(berwald_coefficients(field, x, d, spec))
    stacked = np.stack(tables)
    gamma = stacked.mean(axis=0)
    scale = 1.0 + float(np.abs(gamma).max())
    spread = float(np.abs(stacked - gamma).max()) / scale
    if spread > tolerance:
        raise DirectionDependenceError(
            f"connection coefficients vary by {spread:.3e} (> {tolerance:.1e})"
            f" across fiber probes at x={np.asarray(x)!r}; the field is not"
            " Berwald there"
        )
    return gamma, spread


@dataclass(frozen=True, eq=False)
class BaseConnection:
    """A position-only (linear) connection usable for transport.

    gamma maps a chart point to the (n, n, n) table Gamma^i_jk.
    provenance records how the table was obtained.
    """

    dimension: int
    gamma: object
    provenance: str = "user"

    def __call__(self, x):
        return np.asarray(self.gamma(x), dtype=float)

    @classmethod
    def constant(cls, table, provenance="constant"):
        table = np.asarray(table, dtype=float)
        return cls(dimension=table.shape[0], gamma=lambda x: table,
                   provenance=provenance)

    @classmethod
    def from_berwald(cls, field, spec=DEFAULT_SPEC, tolerance=1e-2):
        """Extracted connection, memoized per chart point.

        The memo matters because transport integrators revisit stage
        points; extraction is by far the most expensive gamma source.
        """
        memo = {}

        def gamma(x):
            key = np.asarray(x, dtype=float).tobytes()
            hit = memo.get(key)
            if hit is None:
                hit, _ = extract_base_connection(field, x, spec, tolerance)
                memo[key] = hit
            return hit

        return cls(dimension=field.dimension, gamma=gamma,
                   provenance="extracted_from_berwald")
