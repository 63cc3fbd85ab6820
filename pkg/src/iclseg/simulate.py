"""Simulation designs and segmentation-comparison metrics.

Three Poisson designs with alternating or cycled segment means, seeded with
numpy's PCG64 generator so every acceptance number is reproducible:

  - small_design: n=500, breakpoints (22, 65, 108, 219, 252, 435); odd
    segments (1st, 3rd, ...) have mean 1, even segments mean 1 + lambda.
  - large_design: n=50,000, K=40; 39 breakpoints drawn uniformly without
    replacement, resampled until every segment is at least 25 long; the
    same alternating means.
  - baumwelch_design: n=1,000, breakpoints (100, 130, 200, 475, 500, 600,
    630, 800, 975); the five levels (1, 4.3, 1.15, 6, 4.2) cycled twice
    over the ten segments.

Replicate streams come from numpy's SeedSequence spawning, the documented
splitting rule: replicate r of a batch seeded with s uses
SeedSequence(s).spawn(r + 1)[r].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emission import DataSeries
from .seginit import ChangePointSet

__all__ = [
    "DesignSpec",
    "small_design",
    "large_design",
    "baumwelch_design",
    "replicate_seeds",
    "rand_index",
]

SeedLike = "int | np.random.SeedSequence | np.random.Generator | None"


@dataclass(frozen=True)
class DesignSpec:
    """Ground truth of one simulated series."""

    name: str
    n: int
    true_cps: ChangePointSet
    family: str
    means: tuple[float, ...]
    seed: object = None

    def __post_init__(self) -> None:
        if len(self.means) != self.true_cps.k:
            raise ValueError("means must have one entry per segment")
        if self.true_cps.n != self.n:
            raise ValueError("true_cps does not match n")


def _sample(design: DesignSpec, rng: np.random.Generator) -> DataSeries:
    per_position = np.repeat(design.means, design.true_cps.segment_lengths())
    return DataSeries(rng.poisson(per_position).astype(np.float64))


def _alternating_means(k: int, lambda_gap: float) -> tuple[float, ...]:
    return tuple(1.0 + (i % 2) * lambda_gap for i in range(k))


def small_design(lambda_gap: float, seed: SeedLike = None) -> tuple[DataSeries, DesignSpec]:
    """n=500 Poisson series with six fixed change-points."""
    if lambda_gap < 0:
        raise ValueError("lambda_gap must be >= 0")
    cps = ChangePointSet(500, (22, 65, 108, 219, 252, 435))
    design = DesignSpec(
        name="small",
        n=500,
        true_cps=cps,
        family="poisson",
        means=_alternating_means(7, lambda_gap),
        seed=seed,
    )
    return _sample(design, np.random.default_rng(seed)), design


_LARGE_N = 50_000
_LARGE_K = 40
_MIN_SEG = 25
_MAX_RESAMPLE = 10_000


def large_design(lambda_gap: float, seed: SeedLike = None) -> tuple[DataSeries, DesignSpec]:
    """n=50,000 Poisson series with 40 segments, each at least 25 long."""
    if lambda_gap < 0:
        raise ValueError("lambda_gap must be >= 0")
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_RESAMPLE):
        bps = np.sort(rng.choice(np.arange(1, _LARGE_N), size=_LARGE_K - 1, replace=False))
        lengths = np.diff(np.concatenate(([0], bps, [_LARGE_N])))
        if lengths.min() >= _MIN_SEG:
            break
    else:
        raise RuntimeError(
            f"could not draw breakpoints with all segments >= {_MIN_SEG} "
            f"after {_MAX_RESAMPLE} attempts"
        )
    cps = ChangePointSet(_LARGE_N, tuple(int(t) for t in bps))
    design = DesignSpec(
        name="large",
        n=_LARGE_N,
        true_cps=cps,
        family="poisson",
        means=_alternating_means(_LARGE_K, lambda_gap),
        seed=seed,
    )
    return _sample(design, rng), design


def baumwelch_design(seed: SeedLike = None) -> tuple[DataSeries, DesignSpec]:
    """n=1,000 Poisson series with ten segments over five cycled levels."""
    cps = ChangePointSet(1000, (100, 130, 200, 475, 500, 600, 630, 800, 975))
    levels = (1.0, 4.3, 1.15, 6.0, 4.2)
    design = DesignSpec(
        name="bw",
        n=1000,
        true_cps=cps,
        family="poisson",
        means=tuple(levels[i % 5] for i in range(10)),
        seed=seed,
    )
    return _sample(design, np.random.default_rng(seed)), design


def replicate_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent child streams for a replicate batch."""
    return np.random.SeedSequence(seed).spawn(count)


def rand_index(a: ChangePointSet, b: ChangePointSet) -> float:
    """Proportion of position pairs on which two segmentations agree.

    A pair agrees when it is co-segmented in both or split in both. Runs in
    O(K_a + K_b) by walking the merged breakpoints: overlap blocks give the
    co-segmented-in-both pair count, and inclusion-exclusion does the rest.
    All counting is exact integer arithmetic.
    """
    if a.n != b.n:
        raise ValueError("segmentations cover different lengths")
    n = a.n
    if n < 2:
        return 1.0
    ba = a.bounds()
    bb = b.bounds()
    same_both = 0
    ia = ib = 0
    pos = 0
    while pos < n:
        end = min(ba[ia + 1], bb[ib + 1])
        length = int(end - pos)
        same_both += length * (length - 1) // 2
        pos = end
        if end == ba[ia + 1]:
            ia += 1
        if end == bb[ib + 1]:
            ib += 1
    same_a = sum(int(l) * (int(l) - 1) // 2 for l in a.segment_lengths())
    same_b = sum(int(l) * (int(l) - 1) // 2 for l in b.segment_lengths())
    total = n * (n - 1) // 2
    return (total - same_a - same_b + 2 * same_both) / total
