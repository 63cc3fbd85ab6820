"""Conditional ICL assembly: entropy of the segmentation posterior,
per-K records, and selection of the number of segments.

For each K the criterion is

    icl(K) = -log P(X, K | theta_hat_K) + H(S | X, K, theta_hat_K)

with parameters fixed at the segment-wise MLE of an initial segmentation.
The entropy decomposes over the chain as

    H = -sum_k mu_1(k) log mu_1(k)
        - sum_{i>=2} sum_k mu_{i-1}(k) sum_{k'} pi_i(k,k') log pi_i(k,k')

so one forward-backward pass per K gives the whole criterion in O(Kn).
K_hat is the argmin over K, ties resolved to the smaller K.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .chmm import (
    ChmmSpec,
    NumericalError,
    Posteriors,
    eta_default,
    forward_backward,
    log_joint,
    posteriors,
    viterbi,
)
from .emission import DataSeries, fit_global_variance
from .seginit import (
    ChangePointSet,
    SegPath,
    binary_segmentation,
    dp_segment,
    params_from_changepoints,
)

__all__ = ["IclRecord", "IclTable", "entropy", "icl_for_k", "select_k"]


def _xlogx(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0.0, p * np.log(p), 0.0)


def entropy(post: Posteriors) -> float:
    """Entropy (nats) of the posterior over segmentations; 0 log 0 := 0.

    Cells with mu_{i-1}(k) = 0 contribute nothing, which keeps the sum
    well defined where the transition rows are unnormalizable.
    """
    h = -float(np.sum(_xlogx(post.mu[0])))
    if post.mu.shape[0] > 1:
        step = _xlogx(post.pi_stay[1:]) + _xlogx(post.pi_up[1:])
        h -= float(np.sum(post.mu[:-1] * step))
    return h if h > 0.0 else 0.0


@dataclass(frozen=True)
class IclRecord:
    """One K's criterion pieces plus the MAP segmentation at that K."""

    k: int
    log_joint: float
    entropy: float
    icl: float
    map_cps: ChangePointSet
    init_method: str
    seconds: float


@dataclass(frozen=True)
class IclTable:
    """Records for K = 1..K_max and the selected K."""

    records: tuple[IclRecord, ...]
    k_hat: int

    def record_for(self, k: int) -> IclRecord:
        if not 1 <= k <= len(self.records):
            raise ValueError(f"K={k} outside 1..{len(self.records)}")
        return self.records[k - 1]


def icl_for_k(
    data: DataSeries,
    k: int,
    init: SegPath,
    family: str,
    *,
    eta: float | None = None,
    log_prior_k: float = 0.0,
    shared_variance: bool = True,
    variance: float | None = None,
    dispersion: float | None = None,
) -> IclRecord:
    """Assemble the conditional criterion for one K from its initializer."""
    start = time.perf_counter()
    cps = init.cps_for(k)
    emission = params_from_changepoints(
        data,
        cps,
        family,
        shared_variance=shared_variance,
        variance=variance,
        dispersion=dispersion,
    )
    spec = ChmmSpec(
        n=data.n,
        k=k,
        eta=eta if eta is not None else eta_default(data.n, k),
        emission=emission,
        log_prior_k=log_prior_k,
    )
    try:
        fb = forward_backward(spec, data)
        post = posteriors(fb)
        h = entropy(post)
        lj = log_joint(spec, fb)
        map_cps = viterbi(spec, data)
    except NumericalError as err:
        err.k = k
        raise
    return IclRecord(
        k=k,
        log_joint=lj,
        entropy=h,
        icl=h - lj,
        map_cps=map_cps,
        init_method=init.method,
        seconds=time.perf_counter() - start,
    )


def select_k(
    data: DataSeries,
    k_max: int,
    family: str = "poisson",
    init_method: str = "dp",
    *,
    eta: float | None = None,
    shared_variance: bool = True,
    dispersion: float | None = None,
    backend: str = "auto",
) -> IclTable:
    """Initialize once for all K, score each K, and pick the argmin.

    P(K) is uniform over 1..K_max (a constant log prior that shifts every
    record equally). The shared normal variance and the NB dispersion are
    fitted once from the K_max initialization and reused at every K.
    """
    if not 1 <= k_max <= data.n:
        raise ValueError(f"K_max must be in 1..{data.n}, got {k_max}")
    if init_method == "dp":
        path = dp_segment(
            data, family, k_max,
            shared_variance=shared_variance, dispersion=dispersion, backend=backend,
        )
    elif init_method == "binseg":
        path = binary_segmentation(
            data, family, k_max, shared_variance=shared_variance, dispersion=dispersion,
        )
    else:
        raise ValueError(f"unknown init_method {init_method!r}")
    variance = None
    if family == "normal" and shared_variance:
        variance = fit_global_variance(data, path.cps_for(k_max))
    if family == "negbin":
        dispersion = path.dispersion
    log_prior_k = -float(np.log(k_max))
    records = []
    for k in range(1, k_max + 1):
        records.append(
            icl_for_k(
                data,
                k,
                path,
                family,
                eta=eta,
                log_prior_k=log_prior_k,
                shared_variance=shared_variance,
                variance=variance,
                dispersion=dispersion,
            )
        )
    k_hat = 1
    best = records[0].icl
    for rec in records[1:]:
        if rec.icl < best:
            best = rec.icl
            k_hat = rec.k
    return IclTable(records=tuple(records), k_hat=k_hat)
