"""Complex k-Hessian equations with an isolated pole."""

from ._core import *  # noqa: F401,F403
from ._core import (
    ConfigurationError,
    NonconvergenceError,
    ValidationError,
    run_cli,
)

__all__ = [name for name in dir() if not name.startswith("_")]
