"""Mahalanobis distance and chi-squared inlier/outlier classification.

A measurement's squared Mahalanobis distance d = e^T S^-1 e is chi-squared
distributed with dof = 6 (full pose) when the filter model holds, so a
quantile of that distribution is the natural gate. The boundary d equal to
the threshold classifies as outlier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import gammainc, ndtri

from .bmfls import Innovation
from .errors import DegenerateCovarianceError

__all__ = [
    "GateConfig",
    "GatingRecord",
    "mahalanobis_sq",
    "chi2_threshold",
    "classify",
]


def mahalanobis_sq(inn: Innovation) -> float:
    """Squared Mahalanobis distance e^T S^-1 e, via Cholesky solve.

    Raises ``DegenerateCovarianceError`` if S is not positive definite.
    """
    try:
        cho = scipy.linalg.cho_factor(inn.S, lower=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise DegenerateCovarianceError(
            "innovation covariance is not positive definite"
        ) from exc
    d = float(inn.e @ scipy.linalg.cho_solve(cho, inn.e))
    # Round-off can push an exact zero slightly negative.
    return max(d, 0.0)


def chi2_threshold(dof: int, p: float) -> float:
    """p-quantile of the chi-squared distribution with ``dof`` degrees of freedom.

    Computed by bisection on the regularized lower incomplete gamma
    function, bracketed from a Wilson-Hilferty initial guess; accurate to
    well under 1e-6.
    """
    if int(dof) != dof or dof < 1:
        raise ValueError(f"dof must be an integer >= 1, got {dof}")
    dof = int(dof)
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie in (0, 1), got {p}")

    half = 0.5 * dof

    def cdf(x: float) -> float:
        return float(gammainc(half, 0.5 * x))

    # Wilson-Hilferty approximation seeds the bracket.
    z = float(ndtri(p))
    c = 2.0 / (9.0 * dof)
    guess = dof * (1.0 - c + z * math.sqrt(c)) ** 3
    hi = max(guess, float(dof), 1.0)
    while cdf(hi) < p:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


@dataclass
class GateConfig:
    """Chi-squared gate: degrees of freedom, confidence level, threshold.

    The threshold is derived from (dof, p) when not given; an explicit
    threshold must agree with the derived one to 1e-3.
    """

    dof: int = 6
    p: float = 0.95
    threshold: float | None = None

    def __post_init__(self):
        derived = chi2_threshold(self.dof, self.p)
        if self.threshold is None:
            self.threshold = derived
        elif abs(self.threshold - derived) > 1e-3:
            raise ValueError(
                f"threshold {self.threshold} inconsistent with chi2({self.dof}, "
                f"{self.p}) = {derived:.6f}"
            )


def classify(d: float, cfg: GateConfig) -> bool:
    """True if the distance passes the gate (inlier); the boundary is an outlier."""
    if d < 0.0:
        raise ValueError(f"distance must be >= 0, got {d}")
    return d < cfg.threshold


@dataclass
class GatingRecord:
    """Gate evaluation of one measurement in one smoothing pass."""

    meas_index: int
    t: float
    d: float
    inlier: bool
    iteration: int

    @property
    def label(self) -> str:
        return "inlier" if self.inlier else "outlier"
