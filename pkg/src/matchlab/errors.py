"""Exception hierarchy shared by all matchlab modules.

The CLI maps these onto exit codes: parameter/structural problems exit
with 2, I/O problems with 3 (plain OSError), and internal invariant
violations with 4.
"""


class MatchlabError(Exception):
    """Base class for all matchlab-specific errors."""


class ParameterError(MatchlabError, ValueError):
    """An argument is outside its documented domain."""


class StructuralError(MatchlabError, ValueError):
    """Structured input (instance, matching, trace) is malformed or inconsistent."""


class ScaleError(ParameterError):
    """A desk-scale-only operation was asked to run beyond its size guard."""


class PolicyContractError(ParameterError):
    """An adversary policy emitted a per-round probability outside its contract."""


class BoundUndefinedError(MatchlabError, ZeroDivisionError):
    """The p_good / p_bad**streak bound was requested with p_bad = 0."""


class InternalInvariantError(MatchlabError, RuntimeError):
    """A should-never-happen condition fired; indicates a defect, not bad input."""
