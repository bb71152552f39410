"""Exception types shared across the package.

The CLI maps these onto stable exit codes, so estimator and solver code
should raise the specific class rather than a bare ValueError whenever a
caller might want to distinguish the failure mode.
"""


class ShiftRuleError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(ShiftRuleError, ValueError):
    """Malformed or out-of-range input."""


class BrokenInvariantError(ShiftRuleError):
    """An internal consistency check failed (e.g. imaginary residue too large)."""


class SizeLimitError(ShiftRuleError):
    """A combinatorial construction exceeded its configured explosion cap."""


class InvalidModelError(ShiftRuleError):
    """A measurement model was queried outside its validity range."""


class NoSolutionError(ShiftRuleError):
    """The shift-rule linear system is infeasible."""


class UnboundedError(ShiftRuleError):
    """The linear program is unbounded (should not occur for norm objectives)."""


class NumericFailureError(ShiftRuleError):
    """An iterative numeric procedure failed to converge or cycled."""


class IllConditionedError(ShiftRuleError):
    """A kernel matrix is too close to singular to invert reliably."""


class InsufficientShotsError(ShiftRuleError):
    """The shot budget cannot cover every nonzero coefficient."""


class DegenerateRuleError(ShiftRuleError):
    """A sampling rule discards almost every draw and cannot make progress."""


class InvalidRuleError(ShiftRuleError):
    """A shift rule violates a structural requirement of the operation."""


class TruncationError(ShiftRuleError):
    """A truncated state lost too much norm for the requested computation."""
