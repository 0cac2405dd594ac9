"""Exception hierarchy for warpsched.

Every failure raised by the library derives from :class:`WarpschedError` so
callers (the CLI in particular) can map categories to exit codes:

- ``ConfigError``: invalid configuration, template, bucket table or policy key
- ``KernelFormatError``: malformed kernel file (always names the line)
- ``UnschedulableKernelError``: a single thread block does not fit on an SM
- ``SimulationFault``: scheduler contract violation, cycle limit or a
  non-finite learning update
"""

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

from typing import Any


class WarpschedError(Exception):
    """Base class of all warpsched errors."""


class ConfigError(WarpschedError):
    """Raised when a configuration file or value fails validation."""


class KernelFormatError(WarpschedError):
    """Raised when a kernel file cannot be parsed.

    Args:
        line_no: 1-based line number of the offending line (0 if unknown)
        message: What is wrong with that line

    """

    def __init__(self, line_no: int, message: str) -> None:
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class UnschedulableKernelError(WarpschedError):
    """Raised when one TB's resource demand exceeds an empty SM's capacity."""


class SimulationFault(WarpschedError):
    """Raised when the simulation reaches a state it must not continue from.

    Args:
        message: Human-readable description
        state: Diagnostic dump (cycle, SM, θ snapshot, ...) for post-mortems

    """

    def __init__(self, message: str, state: dict[str, Any] | None = None) -> None:
        self.state = state or {}
        super().__init__(message)
