"""Exception hierarchy shared by every layer of the package."""


class LatticeTagError(Exception):
    """Base class for all errors raised by latticetag."""


class DimensionMismatch(LatticeTagError, ValueError):
    """Operands disagree in length, shape or modulus."""


class ParameterError(LatticeTagError, ValueError):
    """A parameter set violates its invariants."""


class InvalidCredential(LatticeTagError, ValueError):
    """A credential fails A.x = y or the norm bound."""


class FormatError(LatticeTagError, ValueError):
    """A credential or registry file is malformed."""


class Malformed(LatticeTagError, ValueError):
    """A wire frame could not be decoded."""


class RoleMismatch(LatticeTagError, ValueError):
    """A credential was used for the wrong protocol role."""


class StateError(LatticeTagError, RuntimeError):
    """A protocol session was used out of order or after consumption."""


class ScriptError(LatticeTagError, RuntimeError):
    """An attack script referenced a frame that does not exist."""


class CounterMismatch(LatticeTagError, AssertionError):
    """Instrumented operation counts deviate from the closed forms."""

    def __init__(self, message, residues=None):
        super().__init__(message)
        self.residues = residues or {}
