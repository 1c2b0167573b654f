"""Log-log exponent fitting for rate experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RangeError, UsageError


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    ci95: float

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "ci95": self.ci95}


def fit_exponent(xs, ys) -> ExponentFit:
    """Least-squares slope of log(y) against log(x) with a 95% interval.

    The interval is 1.96 times the standard error of the slope estimate.
    Requires at least three strictly positive points.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise UsageError("xs and ys must be 1-d arrays of equal length")
    if len(xs) < 3:
        raise UsageError(f"need at least 3 points, got {len(xs)}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise RangeError("log-log fit requires strictly positive data")
    lx = np.log(xs)
    ly = np.log(ys)
    mx = lx.mean()
    sxx = np.sum((lx - mx) ** 2)
    if sxx == 0:
        raise RangeError("degenerate abscissae: all xs equal")
    slope = float(np.sum((lx - mx) * ly) / sxx)
    intercept = float(ly.mean() - slope * mx)
    resid = ly - (slope * lx + intercept)
    dof = len(xs) - 2
    se = float(np.sqrt(np.sum(resid**2) / dof / sxx)) if dof > 0 else 0.0
    return ExponentFit(slope=slope, intercept=intercept, ci95=1.96 * se)
