"""Shared exception types."""

from __future__ import annotations


class LevnetError(Exception):
    """Base class for library-specific failures."""


class SpectralConvergenceError(LevnetError):
    """Power iteration failed; carries the last iterate and bracket residual."""

    def __init__(self, message, last_vector=None, residual=None):
        super().__init__(message)
        self.last_vector = last_vector
        self.residual = residual


class RasConvergenceError(LevnetError):
    """RAS balancing failed; carries the worst marginal residual seen."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RasInfeasibleError(LevnetError):
    """The RAS support cannot carry the requested marginals."""


class GenerationError(LevnetError):
    """A random-graph construction exhausted its retry budget."""


class PathwayError(LevnetError):
    """A pathway driver could not satisfy its construction invariants."""


class UnstableSequenceRequired(PathwayError):
    """Backwards pathway rejected: the fully grown graph is already stable."""
