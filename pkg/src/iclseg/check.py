"""Randomized oracle-equivalence battery for the recursive implementations.

Draws small instances (n <= 12, K <= 4, all families, random parameters),
computes posteriors/entropy/joint likelihood/MAP with the forward-backward
machinery, recomputes everything by brute-force enumeration, and reports
the worst deviations. Used by the `oracle-check` CLI subcommand and the
acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chmm import ChmmSpec, forward_backward, log_joint, posteriors, viterbi
from .emission import DataSeries, EmissionSpec
from .icl import entropy
from .oracle import brute_optimal_segmentation, brute_posterior
from .seginit import ChangePointSet, dp_segment

__all__ = ["BatteryResult", "random_instance", "oracle_battery"]


@dataclass
class BatteryResult:
    instances: int
    max_dev_mu: float = 0.0
    max_dev_pi: float = 0.0
    max_dev_entropy: float = 0.0
    max_dev_log_joint: float = 0.0
    map_mismatches: int = 0
    dp_mismatches: int = 0

    @property
    def max_dev(self) -> float:
        return max(
            self.max_dev_mu, self.max_dev_pi, self.max_dev_entropy, self.max_dev_log_joint
        )

    def passed(self, tol: float = 1e-8) -> bool:
        return self.max_dev < tol and self.map_mismatches == 0 and self.dp_mismatches == 0


def random_instance(
    rng: np.random.Generator,
) -> tuple[DataSeries, str, EmissionSpec, int]:
    """One random small instance: data, family, random theta-hat, K."""
    n = int(rng.integers(4, 13))
    k = int(rng.integers(1, min(4, n) + 1))
    family = str(rng.choice(["poisson", "normal", "negbin"]))
    true_bps = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False))
    lengths = np.diff(np.concatenate(([0], true_bps, [n]))).astype(int)
    if family == "normal":
        seg_means = rng.normal(0.0, 3.0, size=k)
        values = np.concatenate(
            [rng.normal(m, 1.0, size=ln) for m, ln in zip(seg_means, lengths)]
        )
        means = rng.normal(0.0, 3.0, size=k)
        shared = bool(rng.integers(0, 2))
        if shared:
            variances = np.full(k, rng.uniform(0.3, 4.0))
        else:
            variances = rng.uniform(0.3, 4.0, size=k)
        spec = EmissionSpec("normal", means, variances=variances, shared_variance=shared)
    else:
        seg_rates = rng.uniform(0.3, 9.0, size=k)
        values = np.concatenate(
            [rng.poisson(r, size=ln) for r, ln in zip(seg_rates, lengths)]
        ).astype(np.float64)
        means = rng.uniform(0.2, 10.0, size=k)
        if family == "poisson":
            spec = EmissionSpec("poisson", means)
        else:
            spec = EmissionSpec("negbin", means, dispersion=float(rng.uniform(0.5, 50.0)))
    return DataSeries(values), family, spec, k


def oracle_battery(instances: int, seed: int = 0) -> BatteryResult:
    """Compare the recursions against enumeration on random instances."""
    rng = np.random.default_rng(seed)
    res = BatteryResult(instances=instances)
    for _ in range(instances):
        data, family, spec, k = random_instance(rng)
        log_prior_k = -float(np.log(4.0))
        cspec = ChmmSpec(
            n=data.n,
            k=k,
            eta=float(rng.uniform(0.05, 0.95)),
            emission=spec,
            log_prior_k=log_prior_k,
        )
        fb = forward_backward(cspec, data)
        post = posteriors(fb)
        ref = brute_posterior(data, spec, k, log_prior_k=log_prior_k)
        res.max_dev_mu = max(res.max_dev_mu, float(np.max(np.abs(post.mu - ref.mu))))
        res.max_dev_pi = max(
            res.max_dev_pi,
            float(np.max(np.abs(post.pi_stay - ref.pi_stay))),
            float(np.max(np.abs(post.pi_up - ref.pi_up))),
        )
        res.max_dev_entropy = max(res.max_dev_entropy, abs(entropy(post) - ref.entropy))
        res.max_dev_log_joint = max(
            res.max_dev_log_joint, abs(log_joint(cspec, fb) - ref.log_joint)
        )
        if viterbi(cspec, data) != ref.map_cps:
            res.map_mismatches += 1

        dispersion = spec.dispersion if family == "negbin" else None
        shared = spec.shared_variance
        dp = dp_segment(
            data, family, k, shared_variance=shared, dispersion=dispersion
        ).cps_for(k)
        ref_opt = brute_optimal_segmentation(
            data, family, k, shared_variance=shared, dispersion=dispersion
        )
        if dp != ref_opt:
            res.dp_mismatches += 1
    return res
