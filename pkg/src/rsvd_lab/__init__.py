"""
rsvd_lab: randomized subspace iteration for low-rank approximation,
singular value and norm estimation, with calculators for the matching
error bounds and a harness that checks them against an exact SVD.
"""

from .adaptive import AdaptiveConfig, adaptive_rsi, incremental_basis_update
from .bounds import (
    BoundReport,
    SpectrumView,
    average_bounds,
    deterministic_bounds,
    deviation_bounds,
    hmt_bound,
    optimal_ell,
    oversampling_p,
    reverse_ey,
)
from .densela import (
    QrFactors,
    SvdFactors,
    exact_svd,
    gaussian_matrix,
    norms,
    qr_factor,
    read_matrix,
    singular_values,
    truncated_svd,
    write_matrix,
)
from .estimator import RandomizedSVD
from .exceptions import ConvergenceError, DimensionError, RankCollapseError, RowRankError
from .normest import condition_estimate, hager_one_norm, randomized_hager
from .sketch import (
    LowRankApprox,
    SketchConfig,
    basic_randomized,
    improved_small_k,
    power_method,
    randomized_power_method,
    randomized_subspace_iteration,
    stabilized_power_basis,
    subspace_iteration,
)

__version__ = "0.1.0"
