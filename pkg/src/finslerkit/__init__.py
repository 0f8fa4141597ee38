"""Chart-local numerical Finsler geometry.

Evaluate a Finsler or gauge function on a coordinate chart and compute
its fundamental tensor, canonical spray, Berwald connection and
curvature; classify Berwald metrics; integrate geodesics and parallel
transport; and build Riemannian proxies via indicatrix averaging and the
Loewner ellipsoid. Everything is finite-difference based and works from
nothing but a callable F(x, y).
"""

from .catalog import (CORPUS, DSL_SOURCES, REGISTRY, available_fields,
                      conformal_exp, euclidean, from_expression, load_field,
                      minkowski_quartic, randers, riemannian, sphere_stereo)
from .connection import (BaseConnection, ClassificationReport,
                         berwald_coefficients, berwald_curvature,
                         classify_berwald, extract_base_connection,
                         nonlinear_connection, spray_coefficients,
                         spray_directional)
from .derivatives import (DEFAULT_SPEC, DiffSpec, directional_y, partial_x,
                          partial_y, radial_derivative, richardson)
from .dsl import MetricExpression, parse_expression
from .ellipsoid import (EllipsoidForm, loewner_metric, mvee_centered,
                        proportionality_check, sample_indicatrix)
from .errors import (ChartBoxError, ConfigError, ConvergenceError,
                     DegeneratePointsError, DirectionDependenceError,
                     EvaluationDomainError, ExpressionError, FinslerKitError,
                     IntegrationError, SingularMetricError, StencilError)
from .fields import (FinslerField, ValidationReport, energy, euler_residual,
                     metric_tensor, validate)
from .metrization import (IndicatrixMeasure, QuadratureSpec,
                          SymmetricBilinearForm, averaged_metric,
                          averaged_metric_field, ball_sphere_consistency,
                          euler_lagrange_residual, indicatrix_measure,
                          levi_civita, levi_civita_connection,
                          metric_compatibility_residual, sphere_area,
                          sphere_nodes)
from .transport import (CircleArc, Curve, ParametricCurve, Polyline, Segment,
                        Trajectory, holonomy_loop, integrate_geodesic,
                        norm_preservation_residual, parallel_transport,
                        rotation_angle)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
