"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` (bad input, CLI exit
code 2) and :class:`NumericalError` (a computation could not meet its accuracy
contract, CLI exit code 3).
"""


class BifurclabError(Exception):
    """Base class for every error raised by the package."""

    module = "bifurclab"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class ValidationError(BifurclabError):
    pass


class NumericalError(BifurclabError):
    pass


# -- family DSL ---------------------------------------------------------------

class DslSyntaxError(ValidationError, SyntaxError):
    """Malformed expression; ``pos`` is the 0-based character offset."""

    module = "family-dsl"

    def __init__(self, message, text="", pos=0):
        self.msg_text = message
        self.text_src = text
        self.pos = pos
        caret = ""
        if text:
            caret = f"\n    {text}\n    {' ' * pos}^"
        super().__init__(f"{message} at position {pos}{caret}")

    def __str__(self):
        return f"[{self.module}] {self.args[0]}"


class UnknownSymbol(DslSyntaxError):
    pass


class DimensionError(ValidationError):
    module = "family-dsl"


class DeterminantError(ValidationError):
    module = "family-dsl"


class ConfigError(ValidationError):
    module = "cli-io"


class PoleError(NumericalError):
    module = "family-dsl"


class SingularError(NumericalError):
    module = "family-dsl"


# -- numerics -----------------------------------------------------------------

class ConvergenceError(NumericalError):
    module = "matrix-core"


class RankCollapse(NumericalError):
    module = "matrix-core"


class InsufficientGrid(ValidationError):
    module = "param-scan"


class BoundaryZero(NumericalError):
    module = "divisors-volumes"


class NonIntegerWinding(NumericalError):
    module = "divisors-volumes"


class VolumeUnreliable(NumericalError):
    module = "divisors-volumes"


class ChartDegenerate(NumericalError):
    module = "measures"


class DegenerateLevel(NumericalError):
    """tr ρ_λ(w) − t vanishes identically on the region, so it has no divisor there."""

    module = "divisors-volumes"
