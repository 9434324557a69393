"""Exception and warning types shared by every module."""


class BifracError(Exception):
    """Base class for numerical failures raised by this package."""


class SpecialAngle(BifracError, ValueError):
    """A kernel was requested at an angle where it is a distribution."""


class AsymmetricGrid(BifracError, ValueError):
    """Parity reversal requested on a grid that is not symmetric about zero."""


class TailTooFat(BifracError, ValueError):
    """A sampled function does not decay at the grid boundary."""


class QuadratureDivergence(BifracError):
    """A quadrature failed its convergence certificate.

    Parameters
    ----------
    message : str
    diagnostics : dict, optional
        Free-form numbers explaining the failure (tail mass, last change,
        oscillation estimate, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in self.diagnostics.items())
        return f"{base} ({extra})"


class DimTooSmall(BifracError, ValueError):
    """Fock truncation below the supported minimum."""


class Overflow(BifracError, OverflowError):
    """Matrix exponential outside its documented range."""


class SpecialAngleNeedsLimit(BifracError, ValueError):
    """A closed-form term is singular at the requested angle."""


class ForbiddenBand(BifracError, ValueError):
    """Angle pair too close to theta_alpha - theta_beta = +-pi/2."""


class NotGaussian(BifracError):
    """Heisenberg-picture fit is not affine in (x, p)."""


class DegenerateGaussian(BifracError, ValueError):
    """Gaussian wavefunction with vanishing width parameter."""


class PNotSmooth(QuadratureDivergence):
    """The P-function integral has no convergence certificate."""


class UntrustedTruncation(BifracError):
    """Raised by consumers that refuse untrusted truncated results."""


class NormLoss(UserWarning):
    """A truncated expansion captures too little of the norm."""
