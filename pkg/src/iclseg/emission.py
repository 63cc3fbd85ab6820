"""Emission families for segment models: normal, Poisson, negative binomial.

Each segment k carries its own level parameter (mean or rate); the normal
family optionally shares one variance across segments and the negative
binomial always shares one dispersion. Parameters are floored away from the
boundary of the parameter space so every log-density stays finite on observed
data:

    rates / NB means >= EPS_RATE
    variances        >= EPS_VAR
    dispersion phi in (0, PHI_MAX]

The negative binomial uses the mean/dispersion parameterization with
variance m + m^2 / phi, so phi -> inf recovers the Poisson limit and
PHI_MAX acts as a near-Poisson sentinel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import gammaln

if TYPE_CHECKING:
    from .seginit import ChangePointSet

__all__ = [
    "EPS_RATE",
    "EPS_VAR",
    "PHI_MAX",
    "FAMILIES",
    "NumericalError",
    "DataSeries",
    "EmissionSpec",
    "log_pdf",
    "log_density_matrix",
    "mle_fit",
    "fit_global_variance",
    "fit_global_dispersion",
]


class NumericalError(RuntimeError):
    """A float64 computation lost the answer despite the built-in safeguards.

    Raised when a forward/backward column underflows to all zeros or a cost
    accumulator overflows; position (0-based) and, where known, the segment
    count K locate the failure.
    """

    def __init__(self, message: str, position: int | None = None, k: int | None = None):
        super().__init__(message)
        self.position = position
        self.k = k

EPS_RATE = 1e-6
EPS_VAR = 1e-8
PHI_MAX = 1e8

FAMILIES = ("normal", "poisson", "negbin")
_COUNT_FAMILIES = ("poisson", "negbin")

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class DataSeries:
    """A 1-D series of observations, stored as float64.

    Count families (poisson, negbin) additionally require the values to be
    nonnegative integers; call :meth:`validate_counts` to enforce that.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError(f"data must be 1-D, got shape {values.shape}")
        if values.size < 1:
            raise ValueError("data must contain at least one observation")
        if not np.all(np.isfinite(values)):
            raise ValueError("data must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def validate_counts(self) -> None:
        """Raise ValueError unless all values are nonnegative integers."""
        v = self.values
        if np.any(v < 0):
            raise ValueError("count data must be nonnegative")
        if np.any(v != np.floor(v)):
            raise ValueError("count data must be integral")


@dataclass(frozen=True)
class EmissionSpec:
    """Per-segment emission parameters for one of the supported families.

    Fields
    ------
    family : {"normal", "poisson", "negbin"}
    means : (K,) segment means (rates for poisson).
    variances : (K,) segment variances, normal only (None otherwise). With
        ``shared_variance`` all entries are equal.
    shared_variance : whether the normal variance is global across segments.
    dispersion : global NB dispersion phi, negbin only (None otherwise).
    """

    family: str
    means: np.ndarray
    variances: np.ndarray | None = None
    shared_variance: bool = True
    dispersion: float | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        means = np.atleast_1d(np.asarray(self.means, dtype=np.float64))
        means.setflags(write=False)
        object.__setattr__(self, "means", means)
        if self.family in _COUNT_FAMILIES:
            if np.any(means < EPS_RATE):
                raise ValueError(f"rates must be >= {EPS_RATE}")
        if self.family == "normal":
            if self.variances is None:
                raise ValueError("normal family requires variances")
            var = np.atleast_1d(np.asarray(self.variances, dtype=np.float64))
            if var.shape != means.shape:
                raise ValueError("variances must match means in shape")
            if np.any(var < EPS_VAR):
                raise ValueError(f"variances must be >= {EPS_VAR}")
            if self.shared_variance and np.any(var != var[0]):
                raise ValueError("shared_variance set but variances differ")
            var.setflags(write=False)
            object.__setattr__(self, "variances", var)
        elif self.variances is not None:
            raise ValueError(f"variances not meaningful for {self.family}")
        if self.family == "negbin":
            if self.dispersion is None:
                raise ValueError("negbin family requires a dispersion")
            if not 0.0 < float(self.dispersion) <= PHI_MAX:
                raise ValueError(f"dispersion must be in (0, {PHI_MAX:g}]")
            object.__setattr__(self, "dispersion", float(self.dispersion))
        elif self.dispersion is not None:
            raise ValueError(f"dispersion not meaningful for {self.family}")

    @property
    def k(self) -> int:
        return int(self.means.size)


def _check_support(spec: EmissionSpec, x: np.ndarray) -> None:
    if spec.family in _COUNT_FAMILIES:
        if np.any(x < 0) or np.any(x != np.floor(x)):
            raise ValueError(f"{spec.family} support is nonnegative integers")


def log_pdf(spec: EmissionSpec, k: int, x: float | np.ndarray) -> float | np.ndarray:
    """Log-density of observation(s) x under segment k's parameters.

    k is a 0-based segment index in [0, K).
    """
    if not 0 <= k < spec.k:
        raise ValueError(f"segment index {k} out of range for K={spec.k}")
    x = np.asarray(x, dtype=np.float64)
    _check_support(spec, x)
    m = spec.means[k]
    if spec.family == "normal":
        v = spec.variances[k]
        out = -0.5 * (LOG_2PI + np.log(v) + (x - m) ** 2 / v)
    elif spec.family == "poisson":
        out = x * np.log(m) - m - gammaln(x + 1.0)
    else:
        phi = spec.dispersion
        out = (
            gammaln(x + phi)
            - gammaln(phi)
            - gammaln(x + 1.0)
            + phi * np.log(phi / (phi + m))
            + x * np.log(m / (phi + m))
        )
    return out if out.ndim else float(out)


def log_density_matrix(spec: EmissionSpec, data: DataSeries) -> np.ndarray:
    """(n, K) matrix of log g_k(x_i) for all positions i and segments k."""
    x = data.values[:, None]
    _check_support(spec, data.values)
    m = spec.means[None, :]
    if spec.family == "normal":
        v = spec.variances[None, :]
        return -0.5 * (LOG_2PI + np.log(v) + (x - m) ** 2 / v)
    if spec.family == "poisson":
        return x * np.log(m) - m - gammaln(x + 1.0)
    phi = spec.dispersion
    return (
        gammaln(x + phi)
        - gammaln(phi)
        - gammaln(x + 1.0)
        + phi * np.log(phi / (phi + m))
        + x * np.log(m / (phi + m))
    )


def mle_fit(family: str, values: np.ndarray) -> float | tuple[float, float]:
    """Maximum-likelihood segment parameters for one contiguous slice.

    Returns the floored sample mean for the count families (the NB mean MLE
    at fixed dispersion is the sample mean), and a (mean, variance) pair for
    the normal family with the variance floored at EPS_VAR.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot fit an empty segment")
    mean = float(np.mean(values))
    if family == "normal":
        var = float(np.mean((values - mean) ** 2))
        return mean, max(var, EPS_VAR)
    if family in _COUNT_FAMILIES:
        return max(mean, EPS_RATE)
    raise ValueError(f"unknown family {family!r}")


def _segment_means(data: DataSeries, cps: "ChangePointSet") -> tuple[np.ndarray, np.ndarray]:
    """Per-position fitted segment mean and per-segment mean array."""
    bounds = cps.bounds()
    means = np.empty(cps.k)
    fitted = np.empty(data.n)
    for k in range(cps.k):
        seg = data.values[bounds[k] : bounds[k + 1]]
        means[k] = np.mean(seg)
        fitted[bounds[k] : bounds[k + 1]] = means[k]
    return means, fitted


def fit_global_variance(data: DataSeries, cps: "ChangePointSet") -> float:
    """Pooled residual variance around per-segment means, floored at EPS_VAR."""
    _, fitted = _segment_means(data, cps)
    rss = float(np.sum((data.values - fitted) ** 2))
    return max(rss / data.n, EPS_VAR)


def fit_global_dispersion(data: DataSeries, cps: "ChangePointSet") -> float:
    """Method-of-moments NB dispersion pooled across the segments of cps.

    Matches E(x - m)^2 = m + m^2/phi summed over all positions, with each
    position's m replaced by its segment's fitted mean:

        phi_hat = sum_i m_i^2 / (sum_i (x_i - m_i)^2 - sum_i m_i)

    An underdispersed pool (denominator <= 0) returns the PHI_MAX sentinel,
    i.e. the near-Poisson regime.
    """
    data.validate_counts()
    _, fitted = _segment_means(data, cps)
    resid2 = float(np.sum((data.values - fitted) ** 2))
    denom = resid2 - float(np.sum(fitted))
    if denom <= 0.0:
        return PHI_MAX
    phi = float(np.sum(fitted**2)) / denom
    return float(min(max(phi, 1.0 / PHI_MAX), PHI_MAX))
