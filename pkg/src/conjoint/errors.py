"""Exception hierarchy and stable CLI exit codes."""

from __future__ import annotations


class ConjointError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(ConjointError):
    """Malformed or empty input (non-finite data, empty columns, bad sizes)."""


class InvalidLevel(ConjointError):
    """A value is not an admissible level of a non-continuous variable."""


class InvalidRank(ConjointError):
    """Requested eigenbasis rank exceeds the number of training instances minus one."""


class InvalidMode(ConjointError):
    """Principal-mode index outside [1, rank]."""


class InvalidTask(ConjointError):
    """Unknown block or variable name in a benchmark/report task."""


class InvalidConfig(ConjointError):
    """Inconsistent synthetic-cohort configuration."""


class DegenerateMarginal(ConjointError):
    """A parametric marginal cannot be fitted (zero-variance Gaussian column)."""


class SingularConditioning(ConjointError):
    """The observation system is singular (all sigmas zero on a degenerate basis).

    Refitting with a positive jitter, or observing with sigma > 0, resolves this.
    """


class LayoutMismatch(ConjointError):
    """Vector or mesh dimensions disagree with the instance layout."""


class CorrespondenceError(ConjointError):
    """Cohort meshes do not share vertex count and topology."""


class MissingRecord(ConjointError):
    """An instance has a mesh but no indicator row (or vice versa)."""


class FormatError(ConjointError):
    """A cohort or model file could not be parsed."""


# Stable, documented exit codes for the CLI (scriptability contract).
EXIT_CODES: dict[type[ConjointError], int] = {
    InvalidInput: 3,
    InvalidLevel: 4,
    InvalidRank: 5,
    SingularConditioning: 6,
    DegenerateMarginal: 7,
    LayoutMismatch: 8,
    CorrespondenceError: 9,
    MissingRecord: 10,
    FormatError: 11,
    InvalidMode: 12,
    InvalidTask: 13,
    InvalidConfig: 14,
}

USAGE_EXIT = 2
INTERNAL_EXIT = 70


def exit_code(exc: BaseException) -> int:
    """Map an exception to its documented CLI exit code."""
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return INTERNAL_EXIT
