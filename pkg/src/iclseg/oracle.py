"""Brute-force references for small instances (n <= 20).

Everything here enumerates the C(n-1, K-1) segmentations explicitly, so it
is exponential-in-spirit but exact: posterior weights, marginals mu,
transition rows pi, entropy, the joint likelihood under the uniform
segmentation prior, the MAP segmentation, and the best-likelihood
segmentation. These are the ground truth the recursive implementations are
tested against.

Tie-break compatibility: log-likelihood totals are accumulated in the same
right-nested order as the DP and Viterbi recursions (last segment first),
so exactly tied optima resolve to the same (lexicographically smallest)
segmentation on both routes, bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .emission import EPS_RATE, EPS_VAR, DataSeries, EmissionSpec, log_density_matrix
from .seginit import ChangePointSet, _family_code, _prefix_sums, fit_global_dispersion

__all__ = [
    "MAX_ORACLE_N",
    "EnumeratedPosterior",
    "enumerate_segmentations",
    "brute_posterior",
    "brute_optimal_segmentation",
]

MAX_ORACLE_N = 20


def _guard(n: int, k: int) -> None:
    if n > MAX_ORACLE_N:
        raise ValueError(f"oracle refuses n={n} > {MAX_ORACLE_N}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= K <= n, got K={k}, n={n}")


def log_binom(n: int, k: int) -> float:
    """log C(n, k) exactly via integer arithmetic."""
    return float(np.log(float(math.comb(n, k))))


def enumerate_segmentations(n: int, k: int) -> tuple[ChangePointSet, ...]:
    """All of M_K in lexicographic breakpoint order."""
    _guard(n, k)
    return tuple(
        ChangePointSet(n, bps) for bps in combinations(range(1, n), k - 1)
    )


@dataclass(frozen=True)
class EnumeratedPosterior:
    """Exact posterior over M_K at fixed per-segment parameters.

    log_norm is log of the uniform-prior mixture sum_S P(X|S) / C(n-1,K-1);
    log_joint = log P(K) + log_norm - log C(n-1,K-1), the criterion's joint
    term, which divides by the segmentation count once more than the mixture
    does (see chmm.log_joint for the matching recursive form and rationale).
    mu, pi_stay, pi_up mirror the shapes of the recursive Posteriors for
    direct comparison.
    """

    segmentations: tuple[ChangePointSet, ...]
    probabilities: np.ndarray
    log_norm: float
    log_joint: float
    entropy: float
    mu: np.ndarray
    pi_stay: np.ndarray
    pi_up: np.ndarray
    map_cps: ChangePointSet


def _path_loglik(logg: np.ndarray, labels: np.ndarray) -> float:
    """Right-nested sum of logg[i, labels[i]], last position innermost."""
    total = 0.0
    for i in range(labels.size - 1, -1, -1):
        total = logg[i, labels[i]] + total
    return total


def brute_posterior(
    data: DataSeries, spec: EmissionSpec, k: int, *, log_prior_k: float = 0.0
) -> EnumeratedPosterior:
    """Exact posterior, entropy, joint likelihood, and MAP by enumeration."""
    n = data.n
    _guard(n, k)
    if spec.k != k:
        raise ValueError(f"emission has {spec.k} segments, expected {k}")
    logg = log_density_matrix(spec, data)
    segs = enumerate_segmentations(n, k)
    all_labels = [s.labels() for s in segs]
    logliks = np.array([_path_loglik(logg, lab) for lab in all_labels])

    map_idx = 0
    for idx in range(1, len(segs)):
        if logliks[idx] > logliks[map_idx]:
            map_idx = idx

    log_z = float(logsumexp(logliks))
    probs = np.exp(logliks - log_z)
    ent = -math.fsum(float(p) * math.log(p) for p in probs if p > 0.0)
    log_norm = log_z - log_binom(n - 1, k - 1)

    mu = np.zeros((n, k))
    joint_stay = np.zeros((n, k))
    joint_up = np.zeros((n, k))
    for lab, p in zip(all_labels, probs):
        for i in range(n):
            mu[i, lab[i]] += p
        for i in range(1, n):
            if lab[i] == lab[i - 1]:
                joint_stay[i, lab[i - 1]] += p
            else:
                joint_up[i, lab[i - 1]] += p
    pi_stay = np.zeros((n, k))
    pi_up = np.zeros((n, k))
    for i in range(1, n):
        for kk in range(k):
            m = mu[i - 1, kk]
            if m > 0.0:
                pi_stay[i, kk] = joint_stay[i, kk] / m
                pi_up[i, kk] = joint_up[i, kk] / m
    return EnumeratedPosterior(
        segmentations=segs,
        probabilities=probs,
        log_norm=log_norm,
        log_joint=log_prior_k + log_norm - log_binom(n - 1, k - 1),
        entropy=max(ent, 0.0),
        mu=mu,
        pi_stay=pi_stay,
        pi_up=pi_up,
        map_cps=segs[map_idx],
    )


def brute_optimal_segmentation(
    data: DataSeries,
    family: str,
    k: int,
    *,
    shared_variance: bool = True,
    dispersion: float | None = None,
) -> ChangePointSet:
    """Exhaustive best-likelihood segmentation at the segment-wise MLE.

    Costs and their accumulation order match dp_segment so ties agree; see
    the module docstring.
    """
    _guard(data.n, k)
    if family in ("poisson", "negbin"):
        data.validate_counts()
    phi = 0.0
    if family == "negbin":
        if dispersion is None:
            dispersion = fit_global_dispersion(
                data, brute_optimal_segmentation(data, "poisson", k)
            )
        phi = float(dispersion)
    fam = _family_code(family, shared_variance)
    p1, p2 = _prefix_sums(data)
    best_cps = None
    best_cost = np.inf
    for cps in enumerate_segmentations(data.n, k):
        bounds = cps.bounds()
        total = 0.0
        for j in range(k - 1, -1, -1):
            a, b = int(bounds[j]), int(bounds[j + 1])
            total = float(
                _kernels.seg_nll(
                    fam, p1[b] - p1[a], p2[b] - p2[a], b - a, phi, EPS_RATE, EPS_VAR
                )
            ) + total
        if total < best_cost:
            best_cost = total
            best_cps = cps
    return best_cps
