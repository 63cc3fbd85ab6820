"""Change-point count selection for 1-D series.

The number of segments K is chosen by minimizing a conditional ICL
criterion: the joint likelihood of the data and K at plugged-in segment
parameters, penalized by the entropy of the posterior over all K-segment
segmentations. Both pieces come from one O(Kn) forward-backward pass over
a constrained hidden Markov chain whose paths are exactly the K-segment
segmentations.
"""

from .chmm import (
    ChmmSpec,
    FBState,
    NumericalError,
    Posteriors,
    backward,
    eta_default,
    forward,
    forward_backward,
    log_joint,
    posteriors,
    prior_mass,
    viterbi,
)
from .emission import (
    EPS_RATE,
    EPS_VAR,
    PHI_MAX,
    DataSeries,
    EmissionSpec,
    fit_global_dispersion,
    fit_global_variance,
    log_density_matrix,
    log_pdf,
    mle_fit,
)
from .icl import IclRecord, IclTable, entropy, icl_for_k, select_k
from .oracle import (
    EnumeratedPosterior,
    brute_optimal_segmentation,
    brute_posterior,
    enumerate_segmentations,
)
from .seginit import (
    ChangePointSet,
    SegPath,
    binary_segmentation,
    dp_segment,
    params_from_changepoints,
)
from .simulate import (
    DesignSpec,
    baumwelch_design,
    large_design,
    rand_index,
    replicate_seeds,
    small_design,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "EPS_RATE",
    "EPS_VAR",
    "PHI_MAX",
    "DataSeries",
    "EmissionSpec",
    "log_pdf",
    "log_density_matrix",
    "mle_fit",
    "fit_global_variance",
    "fit_global_dispersion",
    "ChangePointSet",
    "SegPath",
    "dp_segment",
    "binary_segmentation",
    "params_from_changepoints",
    "ChmmSpec",
    "FBState",
    "Posteriors",
    "NumericalError",
    "eta_default",
    "forward",
    "backward",
    "forward_backward",
    "prior_mass",
    "posteriors",
    "log_joint",
    "viterbi",
    "IclRecord",
    "IclTable",
    "entropy",
    "icl_for_k",
    "select_k",
    "EnumeratedPosterior",
    "enumerate_segmentations",
    "brute_posterior",
    "brute_optimal_segmentation",
    "DesignSpec",
    "small_design",
    "large_design",
    "baumwelch_design",
    "replicate_seeds",
    "rand_index",
]
