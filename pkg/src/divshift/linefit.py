"""Least-squares line fits, probit axis transforms, and cubic trend fits.

The default transform is the identity; a probit transform (normal quantile
of the metric normalized by its notion bound) is available for bounded
notions. Unbounded notions cannot be probit-transformed and silently fall
back to the identity with a flag set on the resulting fit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import DegenerateAbscissa, ShapeMismatch, SingularFit, ValidationError
from .divergence import Notion

PROBIT_CLAMP_EPS = 1e-4
R2_SLACK = 1e-12


class TransformKind(enum.Enum):
    IDENTITY = "identity"
    PROBIT = "probit"

    @classmethod
    def from_name(cls, name: str) -> "TransformKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown transform {name!r}") from None


@dataclass(frozen=True)
class LineFit:
    """Slope, intercept and R-squared of an x-y regression."""

    slope: float
    intercept: float
    r2: float
    n_points: int
    transform: TransformKind = TransformKind.IDENTITY
    notion: Notion | None = None
    transform_downgraded: bool = False

    def __post_init__(self):
        if self.n_points < 2:
            raise ValidationError(f"a line fit needs >= 2 points, got {self.n_points}")
        if not -R2_SLACK <= self.r2 <= 1.0 + R2_SLACK:
            raise ValidationError(f"r2 {self.r2} outside [0, 1]")
        object.__setattr__(self, "r2", min(max(self.r2, 0.0), 1.0))

    def predict(self, x: float) -> float:
        return self.slope * x + self.intercept


# ---------------------------------------------------------------------------
# Standard normal quantile and CDF. The quantile uses Acklam's rational
# approximation refined by one Halley step on erfc, accurate to ~1e-15.

_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
             6.680131188771972e+01, -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
             3.754408661907416e+00)

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_quantile(p: float) -> float:
    """Inverse of the standard normal CDF for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValidationError(f"normal quantile needs p in (0, 1), got {p}")
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
             / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
             / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
              / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    # One Halley step against the exact CDF.
    e = normal_cdf(x) - p
    u = e * _SQRT_2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def resolve_transform(kind: TransformKind, notion: Notion | None):
    """Effective transform for a notion: probit degrades to identity on
    unbounded notions. Returns (kind, downgraded)."""
    if kind is TransformKind.PROBIT and notion is not None and not notion.bounded:
        return TransformKind.IDENTITY, True
    return kind, False


def apply_transform(
    kind: TransformKind,
    notion: Notion | None,
    value: float,
    clamp_eps: float = PROBIT_CLAMP_EPS,
) -> float:
    """Map a metric value onto the fitting axis.

    The probit path normalizes by the notion's bound first and clamps the
    ratio to [clamp_eps, 1 - clamp_eps] before taking the normal quantile.
    """
    kind, _ = resolve_transform(kind, notion)
    if kind is TransformKind.IDENTITY:
        return float(value)
    if not 0.0 < clamp_eps < 0.5:
        raise ValidationError(f"clamp_eps must be in (0, 0.5), got {clamp_eps}")
    if value < 0.0:
        raise ValidationError(f"probit transform needs a nonnegative value, got {value}")
    bound = notion.bound if notion is not None else 1.0
    u = min(max(value / bound, clamp_eps), 1.0 - clamp_eps)
    return normal_quantile(u)


def invert_transform(kind: TransformKind, notion: Notion | None, value: float) -> float:
    kind, _ = resolve_transform(kind, notion)
    if kind is TransformKind.IDENTITY:
        return float(value)
    bound = notion.bound if notion is not None else 1.0
    return normal_cdf(value) * bound


def transform_values(
    kind: TransformKind,
    notion: Notion | None,
    values,
    clamp_eps: float = PROBIT_CLAMP_EPS,
) -> np.ndarray:
    return np.array([apply_transform(kind, notion, float(v), clamp_eps) for v in np.asarray(values)])


# ---------------------------------------------------------------------------
# Fits.


def ols_fit(
    xs,
    ys,
    *,
    notion: Notion | None = None,
    transform: TransformKind = TransformKind.IDENTITY,
    transform_downgraded: bool = False,
) -> LineFit:
    """Ordinary least squares y = a x + b with R-squared.

    Centered closed form, so the fit is invariant to shifting the data.
    All-identical xs raise DegenerateAbscissa; all-identical ys yield R2 = 1
    when the residuals vanish and 0 otherwise.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeMismatch(f"xs and ys must be equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ValidationError(f"a line fit needs >= 2 points, got {x.size}")
    xm = math.fsum(x) / x.size
    ym = math.fsum(y) / y.size
    dx = x - xm
    dy = y - ym
    sxx = math.fsum(dx * dx)
    if sxx == 0.0:
        raise DegenerateAbscissa("all x values identical")
    sxy = math.fsum(dx * dy)
    slope = sxy / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    ss_res = math.fsum(resid * resid)
    ss_tot = math.fsum(dy * dy)
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    r2 = min(max(r2, 0.0), 1.0)
    return LineFit(
        slope=float(slope),
        intercept=float(intercept),
        r2=float(r2),
        n_points=int(x.size),
        transform=transform,
        notion=notion,
        transform_downgraded=transform_downgraded,
    )


def fit_transformed(xs, ys, notion: Notion | None, transform: TransformKind) -> LineFit:
    """OLS on transformed axes; the effective transform is recorded on the fit."""
    kind, downgraded = resolve_transform(transform, notion)
    tx = transform_values(kind, notion, xs)
    ty = transform_values(kind, notion, ys)
    return ols_fit(tx, ty, notion=notion, transform=kind, transform_downgraded=downgraded)


_POLY3_COND_LIMIT = 1e10
_POLY3_RANK_TOL = 1e-10


def polyfit3(xs, ys) -> np.ndarray:
    """Least-squares cubic fit; returns coefficients (c0, c1, c2, c3).

    Solves the normal equations of the Vandermonde system, switching to a QR
    solve when the system is badly conditioned. Fewer than 4 distinct
    abscissae make the system singular.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeMismatch(f"xs and ys must be equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 4:
        raise ValidationError(f"a cubic fit needs >= 4 points, got {x.size}")
    vand = np.vander(x, 4, increasing=True)
    if np.linalg.matrix_rank(vand, tol=None) < 4:
        raise SingularFit("fewer than 4 distinct x values")
    gram = vand.T @ vand
    if np.linalg.cond(gram) < _POLY3_COND_LIMIT:
        coeffs = np.linalg.solve(gram, vand.T @ y)
    else:
        q, r = np.linalg.qr(vand)
        if np.min(np.abs(np.diag(r))) <= _POLY3_RANK_TOL * np.max(np.abs(np.diag(r))):
            raise SingularFit("rank-deficient Vandermonde system")
        coeffs = np.linalg.solve(r, q.T @ y)
    return coeffs


def poly3_eval(coeffs, x):
    """Evaluate an ascending-order cubic at x (scalar or array)."""
    c = np.asarray(coeffs, dtype=np.float64)
    if c.shape != (4,):
        raise ShapeMismatch(f"expected 4 coefficients, got shape {c.shape}")
    xv = np.asarray(x, dtype=np.float64)
    return ((c[3] * xv + c[2]) * xv + c[1]) * xv + c[0]
