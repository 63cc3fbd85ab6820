"""Constrained hidden Markov chain over segment labels.

States are segment indices 1..K (0-based internally); transitions move by
0 or +1 with a homogeneous probability eta, the chain starts in the first
segment, and conditioning on ending in segment K at position n plays the
role of an absorbing junk state: paths that exhaust their +1 moves early or
late carry no mass. The reachable cells form a band

    max(0, K-1 - (n-1-i)) <= k <= min(i, K-1)      (0-based i, k)

and all tables are exactly zero outside it.

Both the emission-weighted recursions (F, B) and the empty-emission ones
(F0, B0, every emission replaced by 1) are kept; their ratio converts the
geometric path prior eta^(K-1) (1-eta)^(n-K) into the uniform prior over
the C(n-1, K-1) admissible segmentations, which is what makes every
posterior quantity and the joint likelihood independent of eta.

Numerics: the recursions run in log space. Per-position scaling of linear
recursions bounds the size of each row but not the spread within a row,
and the spread of log F_i (and log B_i) across k grows linearly with the
distance to the data's best segmentation — thousands of nats for long
series — so row-normalized tables flush the very cells the smoothed
posteriors need. The log tables keep every feasible cell at full
precision; the row-normalized tables and per-position log normalizers are
derived from them for reporting and invariant checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scipy.special import gammaln

from . import _kernels
from .emission import DataSeries, EmissionSpec, NumericalError, log_density_matrix
from .seginit import ChangePointSet

__all__ = [
    "NumericalError",
    "ChmmSpec",
    "FBState",
    "Posteriors",
    "eta_default",
    "forward",
    "backward",
    "forward_backward",
    "prior_mass",
    "posteriors",
    "log_joint",
    "viterbi",
]

_ETA_CLIP = 1e-4


def _log_binom(n: int, k: int) -> float:
    """log C(n, k) via gammaln (exact to float precision at any size)."""
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def eta_default(n: int, k: int) -> float:
    """Transition probability maximizing the prior mass on K segments.

    (K-1)/(n-1) lands on the boundary for K=1 and K=n, so it is clipped to
    the open interval; any eta in (0,1) yields the same posteriors.
    """
    if n < 2:
        return 0.5
    return float(np.clip((k - 1) / (n - 1), _ETA_CLIP, 1.0 - _ETA_CLIP))


@dataclass(frozen=True)
class ChmmSpec:
    """Chain dimensions, transition probability, emissions, and log P(K)."""

    n: int
    k: int
    eta: float
    emission: EmissionSpec
    log_prior_k: float = 0.0

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= K <= n, got K={self.k}, n={self.n}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0, 1), got {self.eta}")
        if self.emission.k != self.k:
            raise ValueError(
                f"emission has {self.emission.k} segments, spec wants {self.k}"
            )


def band_bounds(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-position inclusive (kmin, kmax) of the jointly reachable states."""
    i = np.arange(n)
    kmin = np.maximum(0, (k - 1) - (n - 1 - i))
    kmax = np.minimum(i, k - 1)
    return kmin, kmax


def band_mask(n: int, k: int) -> np.ndarray:
    kmin, kmax = band_bounds(n, k)
    cols = np.arange(k)
    return (cols >= kmin[:, None]) & (cols <= kmax[:, None])


@dataclass(frozen=True)
class FBState:
    """Forward/backward tables plus their empty-emission twins.

    log_forward/log_backward hold log F_i(k) and log B_i(k) exactly (-inf
    on infeasible cells); logg is the banded emission log-density table
    they were built from. fhat/bhat are the row-normalized scaled tables
    (rows sum to 1 over the band) with per-position log normalizers logf
    and logb, so log F_i(k) = logf[i] + log fhat[i, k] and likewise for B;
    f0hat/b0hat/logf0/logb0 are the same for the empty-emission passes.
    log_total is log sum_S P(X, S | eta); log_prior_mass is
    log P(S in M_K | eta) from the empty-emission tables.
    """

    spec: ChmmSpec
    logg: np.ndarray
    log_forward: np.ndarray
    log_backward: np.ndarray
    fhat: np.ndarray
    logf: np.ndarray
    bhat: np.ndarray
    logb: np.ndarray
    f0hat: np.ndarray
    logf0: np.ndarray
    b0hat: np.ndarray
    logb0: np.ndarray
    log_total: float
    log_prior_mass: float


@dataclass(frozen=True)
class Posteriors:
    """Marginal and transition posteriors of the segment labels.

    mu[i, k] = P(S_i = k | X); pi_stay[i, k] = P(S_i = k | S_{i-1} = k, X)
    and pi_up[i, k] = P(S_i = k+1 | S_{i-1} = k, X) for i >= 1 (row 0 of the
    pi arrays is unused and zero). Cells whose conditioning event has zero
    probability hold 0.
    """

    mu: np.ndarray
    pi_stay: np.ndarray
    pi_up: np.ndarray


def _banded_logg(spec: ChmmSpec, data: DataSeries) -> np.ndarray:
    logg = log_density_matrix(spec.emission, data)
    return np.where(band_mask(spec.n, spec.k), logg, -np.inf)


def _empty_logg(spec: ChmmSpec) -> np.ndarray:
    return np.where(band_mask(spec.n, spec.k), 0.0, -np.inf)


def _forward_table(spec: ChmmSpec, logg: np.ndarray, label: str) -> np.ndarray:
    lf, status = _kernels.forward_log(logg, spec.eta)
    if status >= 0:
        raise NumericalError(
            f"{label}forward pass underflowed at position {status}", position=status, k=spec.k
        )
    return lf


def _backward_table(spec: ChmmSpec, logg: np.ndarray, label: str) -> np.ndarray:
    lb, status = _kernels.backward_log(logg, spec.eta)
    if status >= 0:
        raise NumericalError(
            f"{label}backward pass underflowed at position {status}", position=status, k=spec.k
        )
    return lb


def _normalize_rows(table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a log table into a row-stochastic part and log row normalizers."""
    m = np.max(table, axis=1, keepdims=True)
    w = np.exp(table - m)
    s = np.sum(w, axis=1, keepdims=True)
    lognorm = (m + np.log(s))[:, 0]
    return w / s, lognorm


def forward(spec: ChmmSpec, data: DataSeries) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized forward table and per-position log normalizers."""
    lf = _forward_table(spec, _banded_logg(spec, data), "")
    return _normalize_rows(lf)


def backward(spec: ChmmSpec, data: DataSeries) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized backward table and per-position log normalizers."""
    lb = _backward_table(spec, _banded_logg(spec, data), "")
    return _normalize_rows(lb)


def forward_backward(spec: ChmmSpec, data: DataSeries) -> FBState:
    """Both passes plus the empty-emission passes, bundled for reuse."""
    if data.n != spec.n:
        raise ValueError("data length does not match spec")
    logg = _banded_logg(spec, data)
    lf = _forward_table(spec, logg, "")
    lb = _backward_table(spec, logg, "")
    logg0 = _empty_logg(spec)
    lf0 = _forward_table(spec, logg0, "empty ")
    lb0 = _backward_table(spec, logg0, "empty ")
    fhat, logf = _normalize_rows(lf)
    bhat, logb = _normalize_rows(lb)
    f0hat, logf0 = _normalize_rows(lf0)
    b0hat, logb0 = _normalize_rows(lb0)
    return FBState(
        spec=spec,
        logg=logg,
        log_forward=lf,
        log_backward=lb,
        fhat=fhat,
        logf=logf,
        bhat=bhat,
        logb=logb,
        f0hat=f0hat,
        logf0=logf0,
        b0hat=b0hat,
        logb0=logb0,
        log_total=float(lf[-1, spec.k - 1]),
        log_prior_mass=float(lf0[-1, spec.k - 1]),
    )


def prior_mass(spec: ChmmSpec) -> float:
    """log P(S in M_K | eta) from the empty-emission forward recursion.

    Equals log [C(n-1, K-1) eta^(K-1) (1-eta)^(n-K)].
    """
    lf0 = _forward_table(spec, _empty_logg(spec), "empty ")
    return float(lf0[-1, spec.k - 1])


def posteriors(fb: FBState) -> Posteriors:
    """Marginals mu and transition rows (pi_stay, pi_up) from the tables.

    mu_i is proportional to F_i B_i; the transition rows condition on the
    previous state, pi(i-1, k -> k') = trans(k, k') g_{k'}(x_i) B_i(k') /
    B_{i-1}(k). Everything is formed from the log tables, where infeasible
    cells are exact -inf, so no intermediate can under- or overflow.
    """
    lw = fb.log_forward + fb.log_backward
    m = np.max(lw, axis=1, keepdims=True)
    w = np.exp(lw - m)
    mu = w / np.sum(w, axis=1, keepdims=True)
    n, k = mu.shape
    pi_stay = np.zeros_like(mu)
    pi_up = np.zeros_like(mu)
    if n > 1:
        lstay = float(np.log1p(-fb.spec.eta))
        lup = float(np.log(fb.spec.eta))
        cond = fb.log_backward[:-1]
        feasible = cond > -np.inf
        with np.errstate(invalid="ignore"):
            stay = lstay + fb.logg[1:] + fb.log_backward[1:] - cond
            up = np.full_like(stay, -np.inf)
            up[:, : k - 1] = (
                lup + fb.logg[1:, 1:] + fb.log_backward[1:, 1:] - cond[:, : k - 1]
            )
        pi_stay[1:] = np.where(feasible, np.exp(stay), 0.0)
        pi_up[1:] = np.where(feasible, np.exp(up), 0.0)
        pi_up[:, k - 1] = 0.0
    return Posteriors(mu=mu, pi_stay=pi_stay, pi_up=pi_up)


def log_joint(spec: ChmmSpec, fb: FBState) -> float:
    """Joint criterion term: log P(K) + log total - log prior mass - log C.

    Dividing the total by the empty-emission mass replaces the geometric
    path prior with the uniform prior over M_K, so the value does not
    depend on eta; the criterion then divides by the segmentation count
    C(n-1, K-1) once more. That second division makes the joint term a
    penalized mixture likelihood rather than a probability, with an extra
    ~log(n/K) cost per added segment — it is what keeps a barely-improving
    extra segment from beating the parsimonious fit, and selection behaves
    correctly only with it in place (without it, sweeps over clearly
    separated segments plateau near 2/3 recovery instead of 1).
    """
    return (
        spec.log_prior_k
        + fb.log_total
        - fb.log_prior_mass
        - _log_binom(spec.n - 1, spec.k - 1)
    )


def viterbi(spec: ChmmSpec, data: DataSeries) -> ChangePointSet:
    """Most probable segmentation; ties take the earliest breakpoints.

    The path prior is uniform on M_K after conditioning, so the MAP path
    maximizes the summed emission log-densities over the band.
    """
    if data.n != spec.n:
        raise ValueError("data length does not match spec")
    logg = log_density_matrix(spec.emission, data)
    logg = np.where(band_mask(spec.n, spec.k), logg, -np.inf)
    bps = _kernels.viterbi_kernel(logg)
    return ChangePointSet(spec.n, tuple(int(t) for t in bps))
