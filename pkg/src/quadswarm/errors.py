"""Exception types shared across the simulator."""

from __future__ import annotations


class QuadSwarmError(Exception):
    """Base class for all simulator errors."""


class InfeasibleCommand(QuadSwarmError):
    """A wrench command maps to negative squared rotor speeds."""

    def __init__(self, squared_speeds):
        self.squared_speeds = tuple(squared_speeds)
        super().__init__(f"infeasible wrench: squared rotor speeds {self.squared_speeds}")


class ThrustTooLow(QuadSwarmError):
    """Tilt cannot be derived from an acceleration when thrust is near zero."""


class NumericDivergence(QuadSwarmError):
    """Plant state left the finite range; carries agent and tick when known."""

    def __init__(self, message: str, agent: int | None = None, tick: int | None = None):
        self.agent = agent
        self.tick = tick
        super().__init__(message)


class GraphError(QuadSwarmError):
    """Wrong graph kind or no spanning tree."""


class InvalidBounds(QuadSwarmError):
    """Min-max input bounds violate child > parent."""


class LawError(QuadSwarmError):
    """A distributed law failed for a specific agent."""

    def __init__(self, agent: int, cause: Exception):
        self.agent = agent
        self.cause = cause
        super().__init__(f"agent {agent + 1}: {cause}")


class ConfigError(QuadSwarmError):
    """Parse or validation failure in a scenario config.

    ``kind`` is ``"parse"`` or ``"validation"``; ``key`` is the dotted
    ``section.key`` name when one is known.
    """

    def __init__(self, message: str, key: str | None = None, line: int | None = None,
                 column: int | None = None, kind: str = "validation"):
        self.message = message
        self.key = key
        self.line = line
        self.column = column
        self.kind = kind
        super().__init__(self.diagnostic())

    def diagnostic(self) -> str:
        parts = [f"error[{self.kind}]"]
        if self.key:
            parts.append(f"key={self.key}")
        if self.line is not None:
            parts.append(f"line={self.line}")
        if self.column is not None:
            parts.append(f"col={self.column}")
        return " ".join(parts) + f": {self.message}"


class EmptyLogError(QuadSwarmError):
    """Nothing to plot or write."""
