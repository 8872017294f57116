"""Named failures raised by the laboratory.

Each error carries a stable exit code used by the command-line driver.
"""

from __future__ import annotations


class PvlabError(Exception):
    """Base class for all named failures."""

    exit_code = 1


class FrontTooLarge(PvlabError):
    exit_code = 10


class DegenerateJacobian(PvlabError):
    exit_code = 11


class NonpositivePressure(PvlabError):
    exit_code = 12


class HyperbolicityViolated(PvlabError):
    exit_code = 13


class CflViolated(PvlabError):
    exit_code = 14


class BoundaryTransportLeak(PvlabError):
    exit_code = 15


class CompatibilityViolated(PvlabError):
    exit_code = 16


class SolverDiverged(PvlabError):
    exit_code = 17


class EllipticSolveFailed(PvlabError):
    exit_code = 18


class StabilityViolated(PvlabError):
    exit_code = 19


class StepRejected(PvlabError):
    exit_code = 20


class OrderTooHighForGrid(PvlabError):
    exit_code = 21


class ConfigError(PvlabError):
    exit_code = 2
