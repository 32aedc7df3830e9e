"""Coverage, spectral efficiency and ASE of PPP small-cell networks with LOS/NLOS path loss."""

__version__ = "0.1.0"

from .propagation import (  # noqa: E402
    THREEGPP_PICO,
    AlwaysLos,
    ExpLinear,
    NeverLos,
    PathLossParams,
    QuadExp,
    ThreeGpp,
    equivalent_distance,
    inverse_equivalent_distance,
    los_probability,
    path_gain,
)
from .analytics import (  # noqa: E402
    Curve,
    NetworkConfig,
    area_spectral_efficiency,
    mean_spectral_efficiency,
    outage_probability,
    serving_distance_pdf,
    serving_distance_tail,
    sir_ccdf,
    sir_ccdf_curve,
)
from .montecarlo import SimSpec, estimate_mean_se, estimate_sir_cdf, simulate  # noqa: E402
from .experiments import ResultTable, SweepSpec, find_optimal_density, run_sweep  # noqa: E402
