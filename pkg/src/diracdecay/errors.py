"""Exception types shared across the package."""


class DiracChainError(Exception):
    """Base class for domain errors."""


class ConfigError(DiracChainError):
    """Invalid experiment configuration (CLI exit code 2)."""


class NumericalFailure(DiracChainError):
    """Numerical breakdown inside an otherwise valid computation (CLI exit code 3)."""


class EnergyOutOfBand(DiracChainError):
    """Energy outside the open positive band (m, sqrt(m^2+4))."""


class NearBandEdge(NumericalFailure):
    """sin(2k) below the guard; formulas dividing by sin(2k) are unreliable."""


class NearBandEdgeWarning(UserWarning):
    """Non-fatal variant used by energy_context."""


class SiteOutOfRange(DiracChainError):
    """Requested site not covered by the disorder path."""


class PathTooShort(DiracChainError):
    """Disorder path shorter than the requested box."""


class ExcludedK(DiracChainError):
    """Quasimomentum within the guard radius of -5pi/8, -3pi/4 or -7pi/8,

    where the phase-sum control degrades."""


class DegenerateMultiplier(NumericalFailure):
    """Pruefer multiplier collapsed (radius would vanish)."""


class NearSingular(NumericalFailure):
    """Tridiagonal factorization hit a near-zero pivot (energy too close to a

    box eigenvalue); callers resample or perturb."""


class SubcriticalOnly(DiracChainError):
    """Operation defined only for alpha <= 1/2 (normalizer degenerates otherwise)."""


class ConvergenceFailure(NumericalFailure):
    """Eigensolver did not converge."""


class WindowEmpty(DiracChainError):
    """No eigenvalues inside the requested energy window."""


class UnsupportedInitialState(DiracChainError):
    """Initial state extends beyond the box."""


class InsufficientReplicas(NumericalFailure):
    """Monte Carlo too small to resolve the fitted decay (CI on slope includes 0)."""
