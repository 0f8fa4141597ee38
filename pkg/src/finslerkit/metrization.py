"""Averaged (affine) metrization of a gauge field and related residuals.

The averaged bilinear form at a chart point x integrates the fundamental
tensor over the indicatrix {F(x, .) = 1} against the measure induced by
the normalized volume of the indicatrix body. Writing the integral in
polar form over the Euclidean unit sphere collapses it to the ratio

    b(v, w) = n * sum_k w_k g(x, u_k)(v, w) F(x, u_k)^-n
                / sum_k w_k F(x, u_k)^-n

over sphere nodes u_k with Euclidean-area weights w_k. The same polar
identity in integral form says that for any 0+ homogeneous h the mean of
h over the indicatrix body equals 1/n times its induced-measure integral
over the indicatrix; ball_sphere_consistency estimates both sides
independently so the reduction is testable, not just assumed.

For a constant-in-y fundamental tensor (Riemannian fields) the ratio
cancels and b = n * g(x) exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .connection import BaseConnection
from .derivatives import DEFAULT_SPEC, richardson
from .errors import EvaluationDomainError, SingularMetricError
from .fields import FinslerField, metric_tensor

SPHERE_MIN_NODES = {2: 64, 3: 500}
SPREAD_TOLERANCE = 1e-4


@dataclass(frozen=True)
class QuadratureSpec:
    """Sphere quadrature settings.

    scheme "sphere_product_grid" uses a trapezoid rule on the circle in
    n = 2 and a Gauss-Legendre (in cos polar) times trapezoid (azimuth)
    product in n = 3; both carry weights summing to the Euclidean sphere
    area to machine precision. Dimensions above 3 fall back to
    "monte_carlo" nodes automatically.
    """

    scheme: str = "sphere_product_grid"
    resolution: int = 64
    samples: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("sphere_product_grid", "monte_carlo"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.resolution < 1 or self.samples < 1:
            raise ValueError("resolution and samples must be positive")


DEFAULT_QUADRATURE = QuadratureSpec()


def sphere_area(n):
    """Surface area of the Euclidean unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def sphere_nodes(n, quadrature=DEFAULT_QUADRATURE):
    """Nodes and weights on the Euclidean unit sphere in R^n."""
    if n < 2:
        raise ValueError("sphere quadrature requires dimension >= 2")
    if quadrature.scheme == "monte_carlo" or n > 3:
        rng = np.random.default_rng(quadrature.seed)
        nodes = rng.normal(size=(quadrature.samples, n))
        nodes /= np.linalg.norm(nodes, axis=1)[:, None]
        weights = np.full(quadrature.samples, sphere_area(n) / quadrature.samples)
        return nodes, weights
    if n == 2:
        m = max(quadrature.resolution, SPHERE_MIN_NODES[2])
        angles = 2.0 * math.pi * np.arange(m) / m
        nodes = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        weights = np.full(m, 2.0 * math.pi / m)
        return nodes, weights
    # n == 3: Gauss-Legendre in u = cos(polar), trapezoid in azimuth
    target = max(quadrature.resolution, SPHERE_MIN_NODES[3])
    m_polar = max(int(math.ceil(math.sqrt(target / 2.0))), 4)
    m_az = 2 * m_polar
    while m_polar * m_az < target:
        m_polar += 1
        m_az = 2 * m_polar
    u, w_u = np.polynomial.legendre.leggauss(m_polar)
    phi = 2.0 * math.pi * np.arange(m_az) / m_az
    w_phi = 2.0 * math.pi / m_az
    s = np.sqrt(1.0 - u ** 2)
    nodes = np.empty((m_polar * m_az, 3))
    weights = np.empty(m_polar * m_az)
    k = 0
    for i in range(m_polar):
        for j in range(m_az):
            nodes[k] = (s[i] * math.cos(phi[j]), s[i] * math.sin(phi[j]), u[i])
            weights[k] = w_u[i] * w_phi
            k += 1
    return nodes, weights


@dataclass(frozen=True)
class IndicatrixMeasure:
    """Sphere nodes with weights and the indicatrix radii 1/F along them."""

    x: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    radii: np.ndarray

    @property
    def max_radius(self):
        return float(self.radii.max())


def indicatrix_measure(field, x, quadrature=DEFAULT_QUADRATURE):
    """Sample the indicatrix at x along sphere quadrature nodes."""
    nodes, weights = sphere_nodes(field.dimension, quadrature)
    radii = np.empty(len(nodes))
    for k, u in enumerate(nodes):
        value = float(field(x, u))
        if not (value > 0.0) or not math.isfinite(value):
            raise EvaluationDomainError(
                f"field is not positive along direction {u!r} at x={x!r}"
                f" (F = {value!r}); the indicatrix is not star-shaped there"
            )
        radii[k] = 1.0 / value
    return IndicatrixMeasure(
        x=np.asarray(x, dtype=float), nodes=nodes, weights=weights, radii=radii,
    )


@dataclass
class SymmetricBilinearForm:
    """A symmetric bilinear form with optional computation diagnostics."""

    matrix: np.ndarray
    diagnostics: dict = dataclass_field(default_factory=dict)

    def apply(self, v, w):
        return float(np.asarray(v) @ self.matrix @ np.asarray(w))

    def is_positive_definite(self):
        try:
            np.linalg.cholesky(self.matrix)
            return True
        except np.linalg.LinAlgError:
            return False


def _averaged_matrix(field, x, quadrature, spec):
    """One quadrature pass of the polar-reduced average."""
    n = field.dimension
    nodes, weights = sphere_nodes(n, quadrature)
    num_terms = [[[] for _ in range(n)] for _ in range(n)]
    den_terms = []
    for k in range(len(nodes)):
        u = nodes[k]
        value = float(field(x, u))
        if not (value > 0.0) or not math.isfinite(value):
            raise EvaluationDomainError(
                f"field is not positive along direction {u!r} at x={x!r}"
            )
        g = metric_tensor(field, x, u, spec, check=False)
        density = float(weights[k]) * value ** (-n)
        den_terms.append(density)
        for i in range(n):
            for j in range(i, n):
                num_terms[i][j].append(density * g[i, j])
    den = math.fsum(den_terms)
    b = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            # fsum in fixed node order keeps the reduction deterministic
            b[i, j] = b[j, i] = n * math.fsum(num_terms[i][j]) / den
    return b, len(nodes)


def _refined(quadrature):
    if quadrature.scheme == "monte_carlo":
        return QuadratureSpec(scheme="monte_carlo", samples=2 * quadrature.samples,
                              seed=quadrature.seed + 1)
    return QuadratureSpec(scheme="sphere_product_grid",
                          resolution=2 * quadrature.resolution,
                          samples=quadrature.samples, seed=quadrature.seed)


def averaged_metric(field, x, quadrature=DEFAULT_QUADRATURE, spec=DEFAULT_SPEC,
                    refine=True, spread_tolerance=SPREAD_TOLERANCE):
    """Averaged bilinear form of the field at x.

    With refine=True the quadrature is repeated one refinement level up
    and the relative spread recorded in the diagnostics; a spread above
    spread_tolerance sets the "flagged" bit (the refined value is kept).
    The result must come out positive definite or the input was not an
    admissible gauge on this fiber.
    """
    if field.dimension < 2:
        raise ValueError("averaged metric requires chart dimension >= 2")
    b, used = _averaged_matrix(field, x, quadrature, spec)
    diagnostics = {"scheme": quadrature.scheme, "nodes": used}
    if refine:
        b_fine, used_fine = _averaged_matrix(field, x, _refined(quadrature), spec)
        spread = float(np.abs(b_fine - b).max() / max(np.abs(b_fine).max(), 1e-300))
        diagnostics.update({
            "refined_nodes": used_fine,
            "spread": spread,
            "flagged": spread > spread_tolerance,
        })
        b = b_fine
    form = SymmetricBilinearForm(matrix=b, diagnostics=diagnostics)
    if not form.is_positive_definite():
        raise SingularMetricError(
            f"averaged form is not positive definite at x={np.asarray(x)!r}"
        )
    return form


def averaged_metric_field(field, quadrature=DEFAULT_QUADRATURE, spec=DEFAULT_SPEC):
    """The averaged metric as a chart-point function, for connection work."""

    def metric_fn(x):
        return averaged_metric(field, x, quadrature, spec, refine=False).matrix

    return metric_fn


def ball_sphere_consistency(field, x, h, quadrature=DEFAULT_QUADRATURE,
                            mc_samples=200000, seed=0, spec=DEFAULT_SPEC):
    """Estimate both sides of the polar identity for a 0+ homogeneous h.

    Returns the Monte-Carlo mean of h over the indicatrix body (the
    "ball" side), the quadrature integral of h against the induced
    indicatrix measure (the "sphere" side, which should equal n times the
    ball side), and the Monte-Carlo standard error of the ball side.
    """
    n = field.dimension
    measure = indicatrix_measure(field, x, quadrature)
    densities = measure.weights * measure.radii ** n  # w_k F^{-n}
    den = math.fsum(densities)
    sphere = n * math.fsum(
        d * float(h(measure.nodes[k])) for k, d in enumerate(densities)
    ) / den

    rng = np.random.default_rng(seed)
    bound = 1.05 * measure.max_radius
    values = []
    batch = 8192
    tried = 0
    while len(values) < mc_samples and tried < 1000 * mc_samples:
        pts = rng.uniform(-bound, bound, size=(batch, n))
        tried += batch
        for p in pts:
            if float(field(x, p)) <= 1.0 and p.any():
                values.append(float(h(p)))
                if len(values) >= mc_samples:
                    break
    if len(values) < 2:
        raise EvaluationDomainError("rejection sampling failed to hit the body")
    arr = np.asarray(values)
    ball = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(len(arr)))
    return {
        "dimension": n,
        "ball_estimate": ball,
        "sphere_estimate": sphere,
        "mc_standard_error": se,
        "mc_samples": len(values),
    }


# ---------------------------------------------------------------------------
# Riemannian side: Levi-Civita and residuals

def _metric_callable(metric_like):
    if isinstance(metric_like, FinslerField):
        if metric_like.metric_matrix is None:
            raise ValueError(
                f"field {metric_like.name!r} carries no metric matrix evaluator"
            )
        return metric_like.metric_matrix
    if callable(metric_like):
        return metric_like
    raise TypeError("expected a riemannian field or a callable x -> matrix")


def _metric_x_derivatives(metric_fn, x, spec):
    """dg[k] = d g / dx_k by central differences with Richardson."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    sample = np.asarray(metric_fn(x), dtype=float)
    dg = np.empty((n,) + sample.shape)
    for k in range(n):
        h = max(spec.base_step * max(1.0, abs(float(x[k]))), 1e-6)
        values = []
        for level in range(spec.richardson_levels):
            hh = h / 2.0 ** level
            xp = x.copy(); xp[k] += hh
            xm = x.copy(); xm[k] -= hh
            values.append(
                (np.asarray(metric_fn(xp), dtype=float)
                 - np.asarray(metric_fn(xm), dtype=float)) / (2.0 * hh)
            )
        dg[k] = richardson(values)
    return sample, dg


def levi_civita(metric_like, x, spec=DEFAULT_SPEC):
    """Christoffel symbols Gamma^i_jk of a chart metric field at x."""
    metric_fn = _metric_callable(metric_like)
    g, dg = _metric_x_derivatives(metric_fn, x, spec)
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError:
        raise SingularMetricError(
            f"metric matrix is singular at x={np.asarray(x)!r}"
        ) from None
    # Gamma^i_jk = 1/2 g^{il} (d_j g_lk + d_k g_jl - d_l g_jk)
    term = dg.transpose(1, 0, 2) + dg.transpose(2, 1, 0) - dg
    # term[l, j, k] = d_j g_lk + d_k g_jl - d_l g_jk
    return 0.5 * np.einsum("il,ljk->ijk", ginv, term)


def levi_civita_connection(metric_like, dimension=None, spec=DEFAULT_SPEC):
    """Wrap levi_civita as a BaseConnection for transport."""
    metric_fn = _metric_callable(metric_like)
    if isinstance(metric_like, FinslerField):
        dimension = metric_like.dimension
    if dimension is None:
        raise ValueError("dimension is required when passing a bare callable")

    def gamma(x):
        return levi_civita(metric_fn, x, spec)

    return BaseConnection(dimension=dimension, gamma=gamma,
                          provenance="levi_civita")


def metric_compatibility_residual(metric_like, connection, x, spec=DEFAULT_SPEC):
    """Largest component of the covariant derivative of the metric at x.

    Zero exactly when the connection is metric for the given field; the
    residual is max_{k,i,j} |d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il|.
    """
    metric_fn = _metric_callable(metric_like)
    g, dg = _metric_x_derivatives(metric_fn, x, spec)
    if isinstance(connection, BaseConnection) or callable(connection):
        gamma = np.asarray(connection(x), dtype=float)
    else:
        gamma = np.asarray(connection, dtype=float)
    nabla = (dg
             - np.einsum("lki,lj->kij", gamma, g)
             - np.einsum("lkj,il->kij", gamma, g))
    return float(np.abs(nabla).max())


def euler_lagrange_residual(field, times, positions, velocities, spec=DEFAULT_SPEC):
    """Largest Euler-Lagrange defect of a sampled curve under the energy.

    The curve is given by samples (t_k, x_k, v_k) with v_k = dx/dt; the
    residual compares dE/dx_i along the curve against the time derivative
    of dE/dy_i taken by non-uniform central differences on the sample
    grid. Geodesics of the field null it to discretization accuracy.
    """
    from .derivatives import partial_x, partial_y

    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    velocities = np.asarray(velocities, dtype=float)
    m, n = positions.shape
    if m < 3:
        raise ValueError("need at least three samples for a time derivative")

    def energy_fn(x, y):
        value = field(x, y)
        return 0.5 * value * value

    p = np.empty((m, n))
    q = np.empty((m, n))
    for k in range(m):
        for i in range(n):
            p[k, i] = partial_y(energy_fn, positions[k], velocities[k], (i,), spec)
            q[k, i] = partial_x(energy_fn, positions[k], velocities[k], i, spec)

    worst = 0.0
    for k in range(1, m - 1):
        dt0 = times[k] - times[k - 1]
        dt1 = times[k + 1] - times[k]
        # non-uniform 3-point first derivative
        dpdt = (dt0 / dt1 * (p[k + 1] - p[k]) + dt1 / dt0 * (p[k] - p[k - 1])) \
            / (dt0 + dt1)
        worst = max(worst, float(np.abs(q[k] - dpdt).max()))
    return worst
