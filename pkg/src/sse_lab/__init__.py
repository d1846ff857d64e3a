"""Monte Carlo and closed-form tools for energy-driven stochastic
Schrodinger dynamics of discrete-level decay, zeno, and Rabi systems.
Hot per-step loops are numba-jitted with a vectorized numpy fallback
(select with SSE_LAB_DISABLE_NUMBA=1).

Layout:

- ``stochastic``: seeded RNG policy, Brownian paths, Gaussian quadrature
- ``system``: level/coupling specs, flat-bath builder, decay parameters
- ``kernels``: hot per-step loops (numba accelerated with numpy fallback)
- ``trajectory``: single-trajectory integrators and exact linear-SDE tools
- ``expectation``: density-matrix and coefficient-expectation evolution
- ``analytic``: closed-form survival/transition/line-shape expressions
- ``recipe``: Gaussian time-smearing transform of noise-free amplitudes
- ``zeno_rabi``: short-time expansion, driven two-level damping, bounds
- ``ensemble``: deterministic chunked ensemble runner and z-comparisons
- ``cli``: ``sse-lab`` command-line entry point
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationWarning,
    DomainWarning,
    GridMismatchError,
    NumericFailure,
)
from .stochastic import BrownianPath, RngPolicy
from .system import (
    NoiseParams,
    SystemSpec,
    WWParams,
    build_flat_bath,
    compute_ww_params,
)
from .ensemble import (
    EnsembleEstimate,
    EstimateTable,
    ExperimentPlan,
    compare_estimates,
    compare_to_oracle,
    run_ensemble,
)

__all__ = [
    "__version__",
    "BrownianPath",
    "ConfigurationWarning",
    "DomainWarning",
    "EnsembleEstimate",
    "EstimateTable",
    "ExperimentPlan",
    "GridMismatchError",
    "NoiseParams",
    "NumericFailure",
    "RngPolicy",
    "SystemSpec",
    "WWParams",
    "build_flat_bath",
    "compare_estimates",
    "compare_to_oracle",
    "compute_ww_params",
    "run_ensemble",
]
