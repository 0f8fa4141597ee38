"""Loewner ellipsoid of the indicatrix and the induced quadratic form.

The minimum-volume origin-centered ellipsoid {v : vT A v <= 1} containing
the sampled indicatrix defines a scalar product A at each chart point.
Centering is imposed by symmetrizing the sample set {p_k} to {+-p_k};
since (-p)(-p)T = p pT, the D-optimal design formulation on the raw
points already solves the symmetrized problem, so no points are doubled.

The ascent is the Khachiyan multiplicative-weights iteration with
Wolfe-Atwood away steps (weights may decrease), stopped on the
D-optimality residual max(kappa_max/n - 1, 1 - kappa_min/n) over the
support, where kappa_p = pT V^-1 p and V = sum u_k p_k p_kT. At the
optimum A = V^-1 / n, and kappa_max/n - 1 bounds the worst containment
excess pT A p - 1 directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegeneratePointsError, EvaluationDomainError
from .metrization import SymmetricBilinearForm

DEFAULT_COUNTS = {2: 256, 3: 2048}
MVEE_TOLERANCE = 1e-7
MVEE_ITERATION_CAP = 100_000
_SUPPORT_FLOOR = 1e-12


def default_sample_count(n):
    return DEFAULT_COUNTS.get(n, 512 * n)


def sample_indicatrix(field, x, count=None, seed=0):
    """Points on the F-unit sphere at x, as rows of an (m, n) array.

    Directions are a uniform angle grid for n = 2 (so the grid hits the
    axes and diagonals exactly) and seeded uniform random unit vectors
    for n >= 3; each direction u is scaled to u / F(x, u).
    """
    n = field.dimension
    if count is None:
        count = default_sample_count(n)
    if count < 2 * n * (n + 1):
        raise ValueError(
            f"count={count} cannot determine an ellipsoid in dimension {n};"
            f" need at least {2 * n * (n + 1)}"
        )
    if n == 2:
        angles = 2.0 * math.pi * np.arange(count) / count
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(count, n))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    points = np.empty_like(dirs)
    for k, u in enumerate(dirs):
        value = float(field(x, u))
        if not (value > 0.0) or not math.isfinite(value):
            raise EvaluationDomainError(
                f"field is not positive along direction {u!r} at x={x!r}"
            )
        points[k] = u / value
    return points


@dataclass(frozen=True)
class EllipsoidForm:
    """Centered ellipsoid {v : vT A v <= 1} plus solver diagnostics."""

    A: SymmetricBilinearForm
    iterations: int
    residual: float

    @property
    def matrix(self):
        return self.A.matrix

    def contains(self, points, slack=0.0):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        quad = np.einsum("ki,ij,kj->k", points, self.matrix, points)
        return bool(np.all(quad <= 1.0 + slack))


def mvee_centered(points, tolerance=MVEE_TOLERANCE,
                  max_iterations=MVEE_ITERATION_CAP):
    """Minimum-volume centered ellipsoid of the symmetrized point set."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = P.shape
    if np.linalg.matrix_rank(P) < n:
        raise DegeneratePointsError(
            f"{m} points of rank < {n} cannot bound a full ellipsoid"
        )
    u = np.full(m, 1.0 / m)
    iterations = 0
    residual = math.inf
    for iterations in range(1, max_iterations + 1):
        V = (P * u[:, None]).T @ P
        try:
            Vinv = np.linalg.inv(V)
        except np.linalg.LinAlgError:
            raise DegeneratePointsError(
                "design matrix became singular during the ascent"
            ) from None
        kappa = np.einsum("ki,ij,kj->k", P, Vinv, P)
        j_up = int(np.argmax(kappa))
        err_up = kappa[j_up] / n - 1.0
        support = u > _SUPPORT_FLOOR
        kappa_dn = np.where(support, kappa, math.inf)
        j_dn = int(np.argmin(kappa_dn))
        err_dn = 1.0 - kappa_dn[j_dn] / n
        residual = max(err_up, err_dn)
        if residual <= tolerance:
            break
        if err_up >= err_dn:
            j, kappa_j = j_up, kappa[j_up]
            beta = (kappa_j - n) / (n * (kappa_j - 1.0))
        else:
            # away step; for kappa_j <= 1 the 1D optimum lies past the
            # feasible range and the correct move is dropping the weight
            j, kappa_j = j_dn, kappa[j_dn]
            if kappa_j > 1.0:
                beta = (kappa_j - n) / (n * (kappa_j - 1.0))
            else:
                beta = -math.inf
            beta = max(min(beta, 0.0), -u[j] / (1.0 - u[j]))
        u *= 1.0 - beta
        u[j] += beta
        np.clip(u, 0.0, None, out=u)
    else:
        raise ConvergenceError(
            f"ellipsoid ascent did not reach tolerance {tolerance:g}"
            f" in {max_iterations} iterations (residual {residual:.3e})"
        )
    V = (P * u[:, None]).T @ P
    A = np.linalg.inv(V) / n
    A = 0.5 * (A + A.T)
    form = SymmetricBilinearForm(matrix=A, diagnostics={
        "iterations": iterations,
        "residual": float(residual),
        "support_size": int(np.count_nonzero(u > _SUPPORT_FLOOR)),
    })
    return EllipsoidForm(A=form, iterations=iterations, residual=float(residual))


def loewner_metric(field, x, count=None, tolerance=MVEE_TOLERANCE, seed=0):
    """The Loewner quadratic form of the field's indicatrix at x."""
    points = sample_indicatrix(field, x, count=count, seed=seed)
    ellipsoid = mvee_centered(points, tolerance=tolerance)
    A = ellipsoid.matrix
    quad = np.einsum("ki,ij,kj->k", points, A, points)
    form = SymmetricBilinearForm(matrix=A, diagnostics={
        **ellipsoid.A.diagnostics,
        "count": len(points),
        "max_quadratic": float(quad.max()),
        "min_quadratic": float(quad.min()),
        "contained": bool(quad.max() <= 1.0 + 10.0 * tolerance),
    })
    return form


def proportionality_check(g_loewner, g_reference, tolerance=1e-3):
    """Test g_loewner = lambda * g_reference for a positive scalar lambda.

    lambda is the trace-normalized ratio trace(gR^-1 gL)/n; the check
    succeeds when the Frobenius deviation ||gL - lambda gR|| stays within
    tolerance * ||gL|| and lambda is positive.
    """
    gl = g_loewner.matrix if isinstance(g_loewner, SymmetricBilinearForm) \
        else np.asarray(g_loewner, dtype=float)
    gr = g_reference.matrix if isinstance(g_reference, SymmetricBilinearForm) \
        else np.asarray(g_reference, dtype=float)
    n = gl.shape[0]
    lam = float(np.trace(np.linalg.solve(gr, gl)) / n)
    deviation = float(np.linalg.norm(gl - lam * gr) / np.linalg.norm(gl))
    return {
        "lambda": lam,
        "deviation": deviation,
        "success": bool(lam > 0.0 and deviation <= tolerance),
    }
