"""Segment initializers: exact DP and binary segmentation over K = 1..K_max.

Both initializers maximize the summed per-segment log-likelihood at the
segment-wise MLE (variance profiled out for the shared-variance normal
family, dispersion held fixed for negbin). The DP is exact; two backends
produce the same optimum:

  - "exact": plain O(K_max n^2) suffix DP, any family. Ties resolve to the
    lexicographically smallest breakpoint vector.
  - "pruned": functional pruning over the segment-rate parameter, Poisson
    only, near-linear in n. Tie-breaking between exactly tied optima is
    unspecified (ties do not occur on non-degenerate data).
  - "auto": pruned for Poisson above _PRUNED_MIN_N points, exact otherwise.

For family="negbin" with no dispersion supplied, initialization is
two-stage: a Poisson pass at K_max picks a segmentation, the global
dispersion is fitted to it by method of moments, and the pass is rerun
with negbin costs at that dispersion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import _kernels
from ._kernels import FAM_NEGBIN, FAM_NORMAL_PERSEG, FAM_NORMAL_SHARED, FAM_POISSON
from .emission import (
    EPS_RATE,
    EPS_VAR,
    LOG_2PI,
    DataSeries,
    EmissionSpec,
    NumericalError,
    fit_global_dispersion,
    fit_global_variance,
    mle_fit,
)

__all__ = [
    "ChangePointSet",
    "SegPath",
    "dp_segment",
    "binary_segmentation",
    "params_from_changepoints",
]

_PRUNED_MIN_N = 2000
_PRUNED_PIECE_CAP = 8192


@dataclass(frozen=True)
class ChangePointSet:
    """Breakpoints of a K-segment split of positions 0..n-1.

    breakpoints are strictly increasing positions in {1..n-1}; segment k
    (0-based) covers the half-open index range [bounds[k], bounds[k+1]).
    """

    n: int
    breakpoints: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        bps = tuple(int(t) for t in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        if any(not 0 < t < self.n for t in bps):
            raise ValueError(f"breakpoints must lie in 1..{self.n - 1}")
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    @property
    def k(self) -> int:
        return len(self.breakpoints) + 1

    def bounds(self) -> np.ndarray:
        """Segment boundaries [0, tau_1, ..., tau_{K-1}, n]."""
        return np.asarray((0, *self.breakpoints, self.n), dtype=np.int64)

    def segment_lengths(self) -> np.ndarray:
        return np.diff(self.bounds())

    def labels(self) -> np.ndarray:
        """0-based segment index of every position."""
        out = np.zeros(self.n, dtype=np.int64)
        for t in self.breakpoints:
            out[t:] += 1
        return out


@dataclass(frozen=True)
class SegPath:
    """Initial segmentations for every K in 1..K_max plus their log-likelihoods.

    dispersion records the global NB dispersion the costs were computed at
    (None for other families), so downstream selection reuses it.
    """

    family: str
    method: str
    changepoints: tuple[ChangePointSet, ...]
    logliks: tuple[float, ...]
    dispersion: float | None = None

    @property
    def k_max(self) -> int:
        return len(self.changepoints)

    def cps_for(self, k: int) -> ChangePointSet:
        if not 1 <= k <= self.k_max:
            raise ValueError(f"K={k} outside 1..{self.k_max}")
        return self.changepoints[k - 1]

    def loglik_for(self, k: int) -> float:
        if not 1 <= k <= self.k_max:
            raise ValueError(f"K={k} outside 1..{self.k_max}")
        return self.logliks[k - 1]


def _family_code(family: str, shared_variance: bool) -> int:
    if family == "normal":
        return FAM_NORMAL_SHARED if shared_variance else FAM_NORMAL_PERSEG
    if family == "poisson":
        return FAM_POISSON
    if family == "negbin":
        return FAM_NEGBIN
    raise ValueError(f"unknown family {family!r}")


def _prefix_sums(data: DataSeries) -> tuple[np.ndarray, np.ndarray]:
    p1 = np.zeros(data.n + 1)
    p2 = np.zeros(data.n + 1)
    with np.errstate(over="ignore"):
        np.cumsum(data.values, out=p1[1:])
        np.cumsum(data.values**2, out=p2[1:])
    for acc in (p1, p2):
        if not np.isfinite(acc[-1]):
            pos = int(np.argmax(~np.isfinite(acc))) - 1
            raise NumericalError(
                "segment cost accumulators overflow float64 at "
                f"position {pos}; observation magnitudes are too large",
                position=pos,
            )
    return p1, p2


def _logliks_from_costs(fam: int, costs: np.ndarray, data: DataSeries, phi: float) -> tuple[float, ...]:
    """Convert per-K minimized costs to true log-likelihoods."""
    n = data.n
    x = data.values
    if fam == FAM_NORMAL_SHARED:
        out = []
        for c in costs:
            rss = 2.0 * float(c)
            v = max(rss / n, EPS_VAR)
            out.append(-0.5 * n * (LOG_2PI + np.log(v)) - 0.5 * rss / v)
        return tuple(out)
    if fam == FAM_NORMAL_PERSEG:
        return tuple(-float(c) for c in costs)
    if fam == FAM_POISSON:
        const = -float(np.sum(gammaln(x + 1.0)))
    else:
        const = float(np.sum(gammaln(x + phi)) - n * gammaln(phi) - np.sum(gammaln(x + 1.0)))
    return tuple(const - float(c) for c in costs)


def _validate_init_args(data: DataSeries, family: str, k_max: int) -> None:
    if not 1 <= k_max <= data.n:
        raise ValueError(f"K_max must be in 1..{data.n}, got {k_max}")
    if family in ("poisson", "negbin"):
        data.validate_counts()


def _negbin_dispersion(
    data: DataSeries, k_max: int, run_poisson
) -> float:
    """Two-stage dispersion: fit to the Poisson-cost segmentation at K_max."""
    stage1 = run_poisson()
    return fit_global_dispersion(data, stage1.cps_for(k_max))


def dp_segment(
    data: DataSeries,
    family: str,
    k_max: int,
    *,
    shared_variance: bool = True,
    dispersion: float | None = None,
    backend: str = "auto",
) -> SegPath:
    """Optimal segmentations for every K in 1..K_max by exact DP."""
    _validate_init_args(data, family, k_max)
    if backend not in ("auto", "exact", "pruned"):
        raise ValueError(f"unknown backend {backend!r}")
    phi = 0.0
    if family == "negbin":
        if dispersion is None:
            dispersion = _negbin_dispersion(
                data, k_max, lambda: dp_segment(data, "poisson", k_max, backend=backend)
            )
        phi = float(dispersion)
    fam = _family_code(family, shared_variance)
    p1, p2 = _prefix_sums(data)
    n = data.n

    use_pruned = backend == "pruned" or (
        backend == "auto" and fam == FAM_POISSON and n > _PRUNED_MIN_N
    )
    if backend == "pruned" and fam != FAM_POISSON:
        raise ValueError("pruned backend supports the poisson family only")

    if use_pruned:
        dom_hi = float(np.max(data.values)) + 1.0
        g, bp, status = _kernels.dp_pruned_poisson(p1, k_max, EPS_RATE, dom_hi, _PRUNED_PIECE_CAP)
        if status == 0:
            costs = g[1:, n]
            cps = []
            for k in range(1, k_max + 1):
                rev = []
                i = n
                for level in range(k, 1, -1):
                    t = int(bp[level, i])
                    rev.append(t)
                    i = t
                cps.append(ChangePointSet(n, tuple(reversed(rev))))
            logliks = _logliks_from_costs(fam, costs, data, phi)
            return SegPath(family, "dp", tuple(cps), logliks, dispersion)
        # piece buffer overflow: fall through to the exact backend

    totals, splits = _kernels.dp_exact(fam, p1, p2, k_max, phi, EPS_RATE, EPS_VAR)
    cps = []
    for k in range(1, k_max + 1):
        bps = []
        a = 0
        for level in range(k, 1, -1):
            b = int(splits[level, a])
            bps.append(b)
            a = b
        cps.append(ChangePointSet(n, tuple(bps)))
    logliks = _logliks_from_costs(fam, totals[1:], data, phi)
    return SegPath(family, "dp", tuple(cps), logliks, dispersion)


@dataclass
class _Block:
    a: int
    b: int
    cost: float
    split_pos: int = -1
    split_cost: float = field(default=np.inf)


def binary_segmentation(
    data: DataSeries,
    family: str,
    k_max: int,
    *,
    shared_variance: bool = True,
    dispersion: float | None = None,
) -> SegPath:
    """Greedy best-single-split segmentations, nested across K."""
    _validate_init_args(data, family, k_max)
    phi = 0.0
    if family == "negbin":
        if dispersion is None:
            dispersion = _negbin_dispersion(
                data, k_max, lambda: binary_segmentation(data, "poisson", k_max)
            )
        phi = float(dispersion)
    fam = _family_code(family, shared_variance)
    p1, p2 = _prefix_sums(data)
    n = data.n

    def block_cost(a: int, b: int) -> float:
        return float(_kernels.seg_nll(fam, p1[b] - p1[a], p2[b] - p2[a], b - a, phi, EPS_RATE, EPS_VAR))

    def scanned(a: int, b: int) -> _Block:
        blk = _Block(a, b, block_cost(a, b))
        if b - a >= 2:
            pos, cost = _kernels.best_split(fam, p1, p2, a, b, phi, EPS_RATE, EPS_VAR)
            blk.split_pos = int(pos)
            blk.split_cost = float(cost)
        return blk

    blocks = [scanned(0, n)]
    costs = [blocks[0].cost]
    cps = [ChangePointSet(n, ())]
    taken: list[int] = []
    for _ in range(k_max - 1):
        best_idx = -1
        best_gain = -np.inf
        best_pos = n
        for idx, blk in enumerate(blocks):
            if blk.split_pos < 0:
                continue
            gain = blk.cost - blk.split_cost
            if gain > best_gain or (gain == best_gain and blk.split_pos < best_pos):
                best_idx = idx
                best_gain = gain
                best_pos = blk.split_pos
        if best_idx < 0:
            raise RuntimeError("no splittable block left before reaching K_max")
        blk = blocks.pop(best_idx)
        left = scanned(blk.a, blk.split_pos)
        right = scanned(blk.split_pos, blk.b)
        blocks.extend((left, right))
        taken.append(blk.split_pos)
        taken.sort()
        cps.append(ChangePointSet(n, tuple(taken)))
        costs.append(float(np.sum([b.cost for b in blocks])))
    logliks = _logliks_from_costs(fam, np.asarray(costs), data, phi)
    return SegPath(family, "binseg", tuple(cps), logliks, dispersion)


def params_from_changepoints(
    data: DataSeries,
    cps: ChangePointSet,
    family: str,
    *,
    shared_variance: bool = True,
    variance: float | None = None,
    dispersion: float | None = None,
) -> EmissionSpec:
    """Per-segment MLE parameters for a fixed segmentation.

    Global nuisance parameters (the shared normal variance, the NB
    dispersion) are fitted from this segmentation when not supplied;
    selection layers pass the values fitted once at K_max.
    """
    if cps.n != data.n:
        raise ValueError("changepoint set does not match data length")
    bounds = cps.bounds()
    if family in ("poisson", "negbin"):
        data.validate_counts()
        means = np.array(
            [mle_fit(family, data.values[a:b]) for a, b in zip(bounds, bounds[1:])]
        )
        if family == "poisson":
            return EmissionSpec("poisson", means)
        if dispersion is None:
            dispersion = fit_global_dispersion(data, cps)
        return EmissionSpec("negbin", means, dispersion=float(dispersion))
    if family != "normal":
        raise ValueError(f"unknown family {family!r}")
    fits = [mle_fit("normal", data.values[a:b]) for a, b in zip(bounds, bounds[1:])]
    means = np.array([m for m, _ in fits])
    if shared_variance:
        if variance is None:
            variance = fit_global_variance(data, cps)
        variances = np.full(cps.k, max(float(variance), EPS_VAR))
    else:
        variances = np.array([v for _, v in fits])
    return EmissionSpec("normal", means, variances=variances, shared_variance=shared_variance)
