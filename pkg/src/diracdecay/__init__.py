"""Spectral and dynamical toolkit for the 1D discrete Dirac operator in a
site-decaying random potential.

The operator acts on l2(N*, C^2) as D + V, where D is the free first-order
difference (Dirac) operator with mass m >= 0 and V multiplies the spin-up /
spin-down components by independent random couplings lambda * a_n * omega
with envelope a_n ~ n^(-alpha).  The package provides transfer matrices in
two coordinate systems, the rotating-frame (Pruefer) recursion, Lyapunov
exponents and the spectral phase diagram, finite-box Green's functions with
fractional-moment decay scans, and unitary dynamics diagnostics.
"""

from .errors import (
    ConfigError,
    ConvergenceFailure,
    DegenerateMultiplier,
    DiracChainError,
    EnergyOutOfBand,
    ExcludedK,
    InsufficientReplicas,
    NearBandEdge,
    NearBandEdgeWarning,
    NearSingular,
    NumericalFailure,
    PathTooShort,
    SiteOutOfRange,
    SubcriticalOnly,
    UnsupportedInitialState,
    WindowEmpty,
)
from .model import (
    BoxDescriptor,
    EnergyContext,
    ModelParams,
    SpectralWindow,
    TridiagonalOperator,
    assemble_operator,
    energy_context,
    in_band_interior,
)
from .disorder import (
    DistributionSpec,
    DisorderPath,
    dump_path_csv,
    load_path_csv,
    sample_path,
    validate_assumptions,
)
from .transfer import (
    ScaledProduct,
    TransferMatrix,
    decomposition_matrices,
    free_transfer,
    norm_from_two_angles,
    product,
    spectral_norm_2x2,
    transfer_at,
)
from .prufer import (
    BasisMatrix,
    PruferState,
    PruferTrajectory,
    basis_at,
    martingale_diagnostics,
    prufer_multiplier,
    prufer_step,
    run_prufer,
)
from .lyapunov import (
    LyapunovEstimate,
    RegimeReport,
    beta_closed_form,
    classify,
    critical_energies,
    estimate_beta,
    lambda_coupling_curve,
    lambda_critical,
    r4_boundedness_probe,
)
from .greens import (
    FmEstimate,
    GreenQuery,
    fractional_moment_scan,
    green,
    green_column,
    negative_moment_scan,
    block_moment_scan,
    verify_resolvent_identities,
)
from .dynamics import (
    CorrelatorTable,
    EvolutionTrace,
    SpectralDecomposition,
    correlator,
    diagonalize,
    eigenfunction_profile,
    evolve,
    project_to_window,
    rn_ratio_diagnostic,
    stretched_moment_probe,
    time_averaged_truncated_moment,
)

__version__ = "0.1.0"
