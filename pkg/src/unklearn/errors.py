"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so the CLI can emit a
JSON error payload without string matching.
"""


class UnkError(ValueError):
    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class SchemaError(UnkError):
    code = "schema_error"


class ParseError(UnkError):
    code = "parse_error"

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row

    def to_dict(self):
        d = super().to_dict()
        d["row"] = self.row
        return d


class EmptyInputError(UnkError):
    code = "empty_input"


class InsufficientDataError(UnkError):
    code = "insufficient_data"


class NoEligibleAxisError(UnkError):
    code = "no_eligible_axis"


class ConfigError(UnkError):
    code = "config_error"


class FitError(UnkError):
    code = "fit_error"


class UnsupportedCombinationError(UnkError):
    code = "unsupported_combination"


class SynthesisSkipped(UnkError):
    """Raised when a bucket has too few distinct records to synthesize from."""

    code = "synthesis_skipped"
