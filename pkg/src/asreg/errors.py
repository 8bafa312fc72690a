"""Exception types shared across the package."""


class AsregError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(AsregError):
    """Malformed triple file or rules file."""


class ClauseSyntaxError(ParseError):
    """Clause text that does not match the rule grammar.

    Carries the byte offset of the offending token in ``offset``.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnsafeClauseError(ParseError):
    """Head variable that does not occur in the clause body."""


class ClauseArityError(ParseError):
    """Atom whose argument list is not exactly binary."""


class UnknownSymbolError(AsregError):
    """Lookup of a name that is not in a frozen vocabulary."""


class DimensionMismatchError(AsregError):
    """Vectors of incompatible length passed to a scoring function."""


class DegenerateProjectionError(AsregError):
    """Zero vector cannot be projected onto the unit sphere."""


class TemplateUnsupportedError(AsregError):
    """Clause shape with no closed-form maximum-violation expression."""


class BudgetExceededError(AsregError):
    """Grounded enumeration would exceed the configured tuple budget."""

    def __init__(self, count, budget):
        super().__init__(f"grounding requires {count} tuples, budget is {budget}")
        self.count = count
        self.budget = budget


class ConfigError(AsregError):
    """Invalid training configuration or inconsistent inputs."""


class CheckpointError(AsregError):
    """Unreadable, truncated or version-mismatched checkpoint file."""


class UndefinedMetricError(AsregError):
    """Metric that is undefined for the given inputs (e.g. no positives)."""


class GenerationError(AsregError):
    """Synthetic instance generation failed after all retries."""
