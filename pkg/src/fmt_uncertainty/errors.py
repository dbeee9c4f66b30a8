"""Exception types raised by the package."""


class FmtError(Exception):
    """Base class for all package errors."""


class DimensionOdd(FmtError, ValueError):
    """Matrix is not square with even dimension 2N."""


class DimensionMismatch(FmtError, ValueError):
    """Operands have incompatible dimensions."""


class NotSymplectic(FmtError, ValueError):
    """Symplectic residual exceeds the tolerance."""

    def __init__(self, residual, tol, name=None):
        self.residual = float(residual)
        self.tol = float(tol)
        self.name = name
        where = f" ({name})" if name else ""
        super().__init__(
            f"matrix{where} is not symplectic: residual {self.residual:.3e} > tol {self.tol:.1e}"
        )


class SingularB(FmtError, ValueError):
    """The B block is singular, so the matrix is not free."""


class DegenerateParameter(FmtError, ValueError):
    """A special-matrix parameter makes the matrix invalid or non-free."""


class GridTooSmall(FmtError, ValueError):
    """The grid box truncates a non-negligible part of the signal."""


class ZeroSignal(FmtError, ValueError):
    """The signal has zero norm."""


class NyquistViolated(FmtError, ValueError):
    """The chirped signal is not resolved by the grid step."""

    def __init__(self, axis, fraction, tol):
        self.axis = int(axis)
        self.fraction = float(fraction)
        super().__init__(
            f"band edge energy {fraction:.2e} exceeds {tol:.1e} on axis {axis}"
        )


class TooLarge(FmtError, ValueError):
    """Requested dense computation exceeds the size guard."""


class NotCentered(FmtError, ValueError):
    """Signal means are not zero within tolerance."""


class DiagonalRequired(FmtError, ValueError):
    """Bound needs diagonal A and B blocks."""


class ShapeRequired(FmtError, ValueError):
    """Bound needs blocks that are scalar multiples of one sign matrix."""


class ConfigError(FmtError, ValueError):
    """Run configuration could not be parsed or validated."""


class SignalLoadError(FmtError, ValueError):
    """Signal file could not be read."""


class MismatchBeyondTolerance(FmtError):
    """Reproduced value differs from its reference beyond tolerance."""
