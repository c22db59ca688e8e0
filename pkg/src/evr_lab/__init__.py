"""Type I error-count risk for many tests sharing one dataset.

Variance of the error count under correlated tests, expected-variance-ratio
bounds for subsampling designs, dataset capacity planning, seeded data
allocation and Monte Carlo reproduction of the worked examples.
"""

from .allocation import (
    AllocationError,
    OverlapMatrix,
    SplitPlan,
    SubsampleDraw,
    derive_seed,
    egalitarian_draw,
    overlap_stats,
    split_uniform,
    splitting_are,
)
from .evr_planner import (
    CapacityResult,
    DesignSpec,
    PerformanceCriteria,
    PowerQuery,
    capacity,
    certify_performant,
    evr_bound,
    expected_variance_bound,
    min_sample_size,
    optimize_rho0,
    power_two_sample_t,
    power_two_sample_z,
)
from .gaussian_core import BvnQuery, bvn_cdf, std_normal_cdf, std_normal_quantile
from .matrix_io import CorrelationMatrix, factorize, load_appendix_c, load_matrix
from .monte_carlo import (
    ErrorCountSummary,
    Rule,
    SimConfig,
    clt_joint_cov_check,
    simulate_control_group,
    simulate_sur,
)
from .rejection_calculus import (
    EquicorrDesign,
    Level,
    error_count_variance,
    excess_R,
    fwer_equicorrelated,
)
from .tail_bounds import OverlapGeometry, p_mixed

__version__ = "0.1.0"
