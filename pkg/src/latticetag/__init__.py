"""Lattice (ISIS) based tag/reader/server mutual authentication.

The public surface is re-exported here; submodules hold the details.
"""

from .credentials import (
    HEADLINE,
    SMALL,
    Credential,
    Params,
    Role,
    ServerRegistry,
    generate_credential,
    load_credential,
    load_registry,
    register,
    save_credential,
    save_registry,
)
from .errors import (
    CounterMismatch,
    DimensionMismatch,
    FormatError,
    InvalidCredential,
    LatticeTagError,
    Malformed,
    ParameterError,
    RoleMismatch,
    ScriptError,
    StateError,
)
from .protocol import AuthOutcome, FailureReason
from .session import run_honest_session, run_session
from .zq import Rng

__version__ = "0.1.0"

__all__ = [
    "HEADLINE",
    "SMALL",
    "AuthOutcome",
    "CounterMismatch",
    "Credential",
    "DimensionMismatch",
    "FailureReason",
    "FormatError",
    "InvalidCredential",
    "LatticeTagError",
    "Malformed",
    "ParameterError",
    "Params",
    "Rng",
    "Role",
    "RoleMismatch",
    "ScriptError",
    "ServerRegistry",
    "StateError",
    "generate_credential",
    "load_credential",
    "load_registry",
    "register",
    "run_honest_session",
    "run_session",
    "save_credential",
    "save_registry",
]
