"""Simulation and inference for one-dimensional sticky diffusions.

Exact skeleton sampling of sticky Brownian motion with interval-hit flags,
crossing and bouncing statistics, stickiness estimators and a Monte Carlo
harness.
"""

from .errors import (
    ArgumentError,
    ConfigError,
    DomainError,
    ModelError,
    NumericError,
    StickyError,
    ValidationError,
)
from .estimate import (
    EstimateResult,
    EstimatorMethod,
    default_test_function,
    estimate_rho_crossing,
    estimate_rho_ito,
    estimate_rho_occupation,
)
from .path_model import (
    CountSeries,
    ModelKind,
    ObservationGrid,
    SamplePath,
    StatKind,
    StickyModel,
    read_path_csv,
    validate_path,
    write_path_csv,
)
from .simulate import (
    SimConfig,
    SimMethod,
    reflect_at_first_hit,
    sample_path,
    sample_sticky_bm_exact,
    sample_sticky_bm_timechange,
    sample_sticky_ito,
    sample_sticky_reflected,
)
from .statistics import (
    bouncings,
    conditional_crossings,
    crossings,
    differences,
    local_time_estimates,
    occupation_stat,
)

__version__ = "0.1.0"
