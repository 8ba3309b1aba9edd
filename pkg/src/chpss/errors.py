"""Fault types raised by the solver and its supporting operators.

Every detectable numerical failure has a dedicated exception so that run
control can map it to a termination record and the CLI to an exit code.
"""


class ChpssError(Exception):
    """Base class for all package faults."""


class NonFiniteFieldError(ChpssError):
    """A field contains NaN or Inf; carries the index of the first bad entry."""

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"non-finite value at lattice index {self.index}")


class UnsupportedOperationError(ChpssError):
    """Operation not available for this grid/method combination."""


class TailFault(ChpssError):
    """Solution mass reached the truncation boundary beyond tolerance."""

    def __init__(self, t, tail_max, threshold):
        self.t = float(t)
        self.tail_max = float(tail_max)
        self.threshold = float(threshold)
        super().__init__(
            f"tail monitor tripped at t={self.t:.6g}: "
            f"outer-zone max {self.tail_max:.3e} > {self.threshold:.3e}"
        )


class NanFault(ChpssError):
    """Time stepper produced a non-finite state."""

    def __init__(self, step_index, t):
        self.step_index = int(step_index)
        self.t = float(t)
        super().__init__(f"non-finite state after step {self.step_index} (t={self.t:.6g})")


class TrivialDatumError(ChpssError):
    """Identically-zero initial datum without the explicit override flag."""

    def __init__(self):
        super().__init__("non-trivial initial datum required (pass allow_trivial to override)")


class CharacteristicEscapeError(ChpssError):
    """A characteristic path left the truncated domain."""

    def __init__(self, seed, t, position, half_width):
        self.seed = float(seed)
        self.t = float(t)
        self.position = float(position)
        super().__init__(
            f"characteristic from x0={self.seed:.6g} reached x={self.position:.6g} "
            f"at t={self.t:.6g}, outside [{-half_width:.6g}, {half_width:.6g}]"
        )


class GeometryError(ChpssError):
    """Invalid input to a geometry operation (degenerate metric, bad lattice)."""


class ConfigError(ChpssError):
    """Scenario configuration fault; carries a line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
