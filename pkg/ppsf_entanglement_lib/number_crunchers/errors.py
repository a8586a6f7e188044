"""
Exception types raised by the number crunchers.

Every class derives from a builtin so callers that only know about
ValueError / ArithmeticError / OSError keep working. The command line maps
them to exit codes:

  ConfigError                      -> 2
  other ValueError/ArithmeticError -> 3
  OSError                          -> 4
"""


class ConfigError(ValueError):
    """A config file could not be parsed or violates an invariant."""


class InvalidParameterError(ValueError):
    """An argument is outside the range an operation accepts."""


class DomainError(ValueError):
    """A wavelength has no physical conjugate (idler frequency <= 0)."""


class InvalidStateError(ValueError):
    """A matrix is not a valid density matrix within tolerance."""


class NotMeasurableError(ArithmeticError):
    """A curve has no half-maximum crossing on one or both sides."""


class DegenerateStateError(ArithmeticError):
    """A joint spectral amplitude has zero norm."""


class NonInvertibleError(ArithmeticError):
    """Tomography settings do not span the operator space."""


class DegenerateDataError(ArithmeticError):
    """A measurement record holds no counts."""


class InversionError(ArithmeticError):
    """Delay-to-wavelength mapping is not monotone over the requested band."""


class EmptySpectrumError(ArithmeticError):
    """Nothing left to measure: zero pump power or no filter overlap."""
