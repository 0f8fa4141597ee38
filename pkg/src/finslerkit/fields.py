"""Finsler fields on a chart and the axiom checker.

A field is a scalar evaluator F(x, y) over a chart of dimension n,
tagged with a declared family and a declared smoothness class:

    finsler     smooth away from y = 0, positive 1+ homogeneous, positive,
                with positive definite fundamental tensor
    gauge       as above but only subadditive in y; the fundamental tensor
                may degenerate in some directions
    pre_finsler only smoothness away from 0 and 1+ homogeneity are claimed

Validation samples the declared axioms; smoothness cannot be decided from
point samples, so instability of first fiber derivatives under step
halving is reported as a warning, never as pass/fail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .derivatives import DEFAULT_SPEC, DiffSpec, partial_y, radial_derivative
from .errors import EvaluationDomainError, FinslerKitError, SingularMetricError

DECLARED_CLASSES = ("finsler", "gauge", "pre_finsler")


@dataclass(frozen=True, eq=False)
class FinslerField:
    """A chart-local Finsler (or gauge) structure."""

    dimension: int
    func: object  # callable F(x, y) -> float
    name: str
    family: str
    declared_class: str = "finsler"
    metric_matrix: object = None  # callable x -> (n, n) array for riemannian fields
    params: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        if self.declared_class not in DECLARED_CLASSES:
            raise ValueError(f"unknown declared_class {self.declared_class!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    def __call__(self, x, y):
        return self.func(x, y)

    def squared(self, x, y):
        """F(x, y)^2, the function whose fiber Hessian is twice the metric."""
        value = self.func(x, y)
        return value * value


def _evaluator(field):
    return field.func if isinstance(field, FinslerField) else field


def energy(field, x, y):
    """Energy E = F^2 / 2.

    Raises EvaluationDomainError when the evaluator produces a non-finite
    or negative value, which no admissible field does away from y = 0.
    """
    value = _evaluator(field)(x, y)
    if not math.isfinite(value):
        raise EvaluationDomainError(f"evaluator returned non-finite {value!r}")
    if value < 0.0:
        raise EvaluationDomainError(f"evaluator returned negative {value!r}")
    return 0.5 * value * value


def metric_tensor(field, x, y, spec=DEFAULT_SPEC, check=True):
    """Fundamental tensor g_ij = (1/2) d^2 F^2 / dy_i dy_j at (x, y).

    Symmetric by construction (only the upper triangle is evaluated).
    With check=True a declared finsler field must yield a positive
    definite matrix, otherwise SingularMetricError is raised; gauges are
    allowed to degenerate, only non-finite entries are rejected.
    """
    n = field.dimension
    f2 = field.squared
    g = np.empty((n, n), dtype=float)
    for i in range(n):
        for j in range(i, n):
            value = 0.5 * partial_y(f2, x, y, (i, j), spec)
            g[i, j] = value
            g[j, i] = value
    if not np.all(np.isfinite(g)):
        raise SingularMetricError(
            f"non-finite fundamental tensor at x={np.asarray(x)!r}, y={np.asarray(y)!r}"
        )
    if check and field.declared_class == "finsler":
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise SingularMetricError(
                "fundamental tensor of a declared finsler field is not positive"
                f" definite at x={np.asarray(x)!r}, y={np.asarray(y)!r}"
            ) from None
    return g


def euler_residual(field, x, y, r, spec=DEFAULT_SPEC):
    """Radial derivative minus r times the value.

    Zero (to stencil accuracy) exactly for positively r-homogeneous
    functions of y; the sign and size of the residual show how the
    homogeneity fails.
    """
    f = _evaluator(field)
    return radial_derivative(f, x, y, spec) - r * f(x, y)


@dataclass
class CheckResult:
    passed: bool
    max_violation: float = 0.0
    witness: dict | None = None
    note: str = ""

    def to_dict(self):
        return {
            "passed": self.passed,
            "max_violation": self.max_violation,
            "witness": self.witness,
            "note": self.note,
        }


@dataclass
class ValidationReport:
    field_name: str
    dimension: int
    declared_class: str
    samples: int
    seed: int
    checks: dict
    smoothness_warnings: list
    evaluation_errors: list

    @property
    def passed(self):
        if self.evaluation_errors:
            return False
        return all(result.passed for result in self.checks.values())

    def to_dict(self):
        return {
            "field": self.field_name,
            "dimension": self.dimension,
            "declared_class": self.declared_class,
            "samples": self.samples,
            "seed": self.seed,
            "passed": self.passed,
            "checks": {key: result.to_dict() for key, result in self.checks.items()},
            "smoothness_warnings": self.smoothness_warnings,
            "evaluation_errors": self.evaluation_errors,
        }


HOMOGENEITY_TOL = 1e-8
SUBADDITIVITY_TOL = 1e-9


def _witness(x, y, value):
    return {"x": list(map(float, x)), "y": list(map(float, y)), "value": float(value)}


def validate(field, samples=500, seed=0, box=None, spec=DEFAULT_SPEC):
    """Sample the axioms appropriate to the field's declared class.

    Points are drawn uniformly from the chart box (default [-1, 1]^n) and
    fiber vectors from random directions with magnitudes in [0.2, 3].
    Homogeneity is probed with log-uniform scale factors in [1e-2, 1e2].
    The same seed always yields the same report.
    """
    n = field.dimension
    rng = np.random.default_rng(seed)
    if box is None:
        box = np.array([[-1.0, 1.0]] * n)
    else:
        box = np.asarray(box, dtype=float)
    f = field.func

    checks = {}
    warnings = []
    errors = []

    want_positivity = field.declared_class in ("finsler", "gauge")
    want_subadd = field.declared_class == "gauge"
    want_pd = field.declared_class == "finsler"

    positivity = CheckResult(True, max_violation=-math.inf)
    homogeneity = CheckResult(True)
    subadd = CheckResult(True, max_violation=-math.inf)
    pd_check = CheckResult(True, max_violation=-math.inf)

    for k in range(samples):
        x = rng.uniform(box[:, 0], box[:, 1])
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        y = direction * rng.uniform(0.2, 3.0)
        try:
            base = f(x, y)
            if not math.isfinite(base):
                raise EvaluationDomainError(f"non-finite value {base!r}")

            if want_positivity:
                if -base > positivity.max_violation:
                    positivity.max_violation = -base
                    positivity.witness = _witness(x, y, base)
                if base <= 0.0:
                    positivity.passed = False

            for lam in np.exp(rng.uniform(math.log(1e-2), math.log(1e2), size=2)):
                scaled = f(x, lam * y)
                violation = abs(scaled - lam * base) / max(abs(lam * base), 1e-30)
                if violation > homogeneity.max_violation:
                    homogeneity.max_violation = violation
                    homogeneity.witness = _witness(x, y, violation)
                    homogeneity.witness["lambda"] = float(lam)
                if violation > HOMOGENEITY_TOL:
                    homogeneity.passed = False

            if want_subadd:
                other = rng.normal(size=n)
                other /= np.linalg.norm(other)
                other *= rng.uniform(0.2, 3.0)
                gap = f(x, y + other) - base - f(x, other)
                scale = max(abs(base), 1.0)
                violation = gap / scale
                if violation > subadd.max_violation:
                    subadd.max_violation = violation
                    subadd.witness = _witness(x, y, violation)
                if violation > SUBADDITIVITY_TOL:
                    subadd.passed = False

            if want_pd:
                try:
                    g = metric_tensor(field, x, y, spec, check=False)
                    eigmin = float(np.linalg.eigvalsh(g)[0])
                except FinslerKitError as exc:
                    pd_check.passed = False
                    pd_check.note = str(exc)
                    eigmin = -math.inf
                if -eigmin > pd_check.max_violation:
                    pd_check.max_violation = -eigmin
                    pd_check.witness = _witness(x, y, eigmin)
                if eigmin <= 0.0:
                    pd_check.passed = False

            # cheap stability probe of dF/dy1 under step halving; sparse
            # because smoothness is a warning channel, not an axiom verdict
            if k % 25 == 0:
                plain = DiffSpec(base_step=spec.base_step, richardson_levels=1)
                halved = DiffSpec(base_step=spec.base_step / 2, richardson_levels=1)
                d1 = partial_y(f, x, y, (0,), plain)
                d2 = partial_y(f, x, y, (0,), halved)
                if abs(d1 - d2) > 1e-3 * max(abs(d1), abs(d2), 1.0):
                    warnings.append(_witness(x, y, abs(d1 - d2)))
        except (EvaluationDomainError, FinslerKitError) as exc:
            errors.append({**_witness(x, y, 0.0), "error": str(exc)})

    checks["homogeneity"] = homogeneity
    if want_positivity:
        checks["positivity"] = positivity
    if want_subadd:
        checks["subadditivity"] = subadd
    if want_pd:
        checks["metric_positive_definite"] = pd_check

    return ValidationReport(
        field_name=field.name,
        dimension=n,
        declared_class=field.declared_class,
        samples=samples,
        seed=seed,
        checks=checks,
        smoothness_warnings=warnings,
        evaluation_errors=errors,
    )
