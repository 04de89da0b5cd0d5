"""Cutoff stability of Hurwitz-stable Ornstein-Uhlenbeck systems.

Numerical library for the infinity/zero dichotomy of the scaled Wasserstein
distance W_p(X_{delta t_eps}(x), mu) / eps for multidimensional OU systems
driven by Brownian, symmetric alpha-stable, and compound-Poisson noise:
exact Gaussian distances, ergodicity bound bundles, spectral decay rates,
cutoff time scales, and the benchmark oscillator / Jacobi-chain models.
"""

__version__ = "0.1.0"

from .errors import (
    BlowUpError,
    CapacityError,
    CutoffError,
    DegenerateInitialStateError,
    DimensionError,
    DomainError,
    GenericityError,
    NotPSDError,
    NumericalFailure,
    OutOfScopeError,
    SizeError,
    StabilityError,
    UnsupportedBranchError,
    UnsupportedLawError,
    ValidationError,
)
from .linalg import ComplexEigenSystem, eig, lyapunov_solve, mat_exp, psd_sqrt
from .noise import (
    AlphaStable,
    Brownian,
    CompoundPoisson,
    Drift,
    FixedAtoms,
    IsotropicGaussian,
    NoiseSpec,
    RngStream,
    Sum,
    noise_from_dict,
    noise_mean,
    sample_increment,
    sample_increments,
)
from .ou import (
    GaussianLaw,
    HurwitzSumReport,
    OUSystem,
    SamplePath,
    build_system,
    gaussian_marginal,
    hurwitz_sum_check,
    sample_stationary,
    sigma_inf,
    sigma_t,
    simulate_endpoints,
    simulate_path,
    stationary_mean,
    transient_mean,
)
from .wasserstein import (
    BoundBundle,
    ergodicity_bounds,
    w2_commuting_diagnostics,
    w2_gaussian,
    w2_normal_spectral,
    wp_empirical,
)
from .cutoff import (
    CutoffReport,
    ObservableReport,
    RateAnalysis,
    WindowProfile,
    cutoff_time,
    dichotomy_sweep,
    mean_condition,
    observable_precutoff,
    rate_analysis,
    window_profile,
)
from .models import (
    JacobiParams,
    OscillatorParams,
    jacobi_system,
    oscillator_band_curve,
    oscillator_sigma12_closed,
    oscillator_system,
)
