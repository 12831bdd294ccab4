"""Exception hierarchy shared by all imchaos modules.

Every failure that a caller can act on is a distinct subclass of
:class:`ImchaosError`; the CLI maps them to structured error reports.
"""


class ImchaosError(Exception):
    """Base class for all imchaos computational errors."""


class DiagonalSingularity(ImchaosError):
    """Kernel evaluated on (or too close to) its singular diagonal."""


class InvalidWidth(ImchaosError):
    """Seed bump width outside the admissible range (0, 0.5]."""


class AliasedGrid(ImchaosError):
    """Grid too coarse for the requested mode count (need n >= 4N)."""


class NotPositive(ImchaosError):
    """Covariance matrix is not positive semidefinite at grid scale."""


class IndexOutOfRange(ImchaosError):
    """Coefficient shift addresses a mode outside the basis."""


class GridMismatch(ImchaosError):
    """Test function and field sample live on different grids."""


class DivergentMoment(ImchaosError):
    """Untruncated moment integral is non-integrable for this beta."""


class SupportTouchesBoundary(ImchaosError):
    """Field support reaches the edge of a non-periodic window."""


class ZeroFunction(ImchaosError):
    """Operation requires a test function with positive L1 norm."""


class TargetTooLarge(ImchaosError):
    """Phase target modulus is not strictly below the L1 norm of f."""


class NonUnimodalBracket(ImchaosError):
    """Bisection could not bracket the requested modulus crossing."""


class NoConvergence(ImchaosError):
    """Newton schedule exhausted without meeting the residual tolerance."""


class DegeneratePerturbations(ImchaosError):
    """No perturbation pair meets the determinant criterion."""


class EmptyEnsemble(ImchaosError):
    """Monte Carlo operation invoked on an empty ensemble."""
