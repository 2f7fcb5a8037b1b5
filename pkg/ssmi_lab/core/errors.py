"""Exception hierarchy for ssmi-lab.

Every failure the library raises on purpose derives from ``SsmiError`` and
carries the process exit code the CLI maps it to.
"""


class SsmiError(Exception):
    """Base class for all ssmi-lab errors."""

    exit_code = 1


class DimensionError(SsmiError, ValueError):
    """Tensor shapes do not fit the requested operation."""

    def __init__(self, op: str, *shapes: tuple[int, ...]) -> None:
        self.op = op
        self.shapes = shapes
        rendered = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


class TokenIndexError(SsmiError, IndexError):
    """A token id lies outside the vocabulary."""

    def __init__(self, token_id: int, vocab: int) -> None:
        self.token_id = token_id
        self.vocab = vocab
        super().__init__(f"token id {token_id} out of range for vocab size {vocab}")


class ContractError(SsmiError):
    """A documented precondition was violated by the caller."""


class NonFiniteError(SsmiError, FloatingPointError):
    """An operation produced NaN or Inf."""

    def __init__(self, op: str) -> None:
        self.op = op
        super().__init__(f"{op} produced non-finite values")


class StabilityError(SsmiError):
    """A state transition matrix is not strictly stable."""

    def __init__(self, radius: float) -> None:
        self.radius = radius
        super().__init__(
            f"spectral radius {radius:.6g} >= 1; the resolvent series diverges"
        )


class ConfigError(SsmiError):
    """Malformed or incomplete experiment configuration."""

    exit_code = 3

    def __init__(
        self, message: str, field: str | None = None, line: int | None = None
    ) -> None:
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class CompatibilityError(SsmiError):
    """A checkpoint was produced by a different model configuration."""

    exit_code = 4

    def __init__(self, differing: dict[str, tuple[object, object]]) -> None:
        self.differing = differing
        rendered = ", ".join(
            f"{name} (checkpoint={old!r}, config={new!r})"
            for name, (old, new) in sorted(differing.items())
        )
        super().__init__(f"checkpoint incompatible with config: {rendered}")


class TrainingDivergence(SsmiError):
    """The loss became non-finite during training."""

    exit_code = 5

    def __init__(self, step: int, detail: str = "") -> None:
        self.step = step
        suffix = f" ({detail})" if detail else ""
        super().__init__(f"training diverged at step {step}{suffix}")


class CheckpointFormatError(SsmiError):
    """A checkpoint or dataset archive failed a structural check."""

    exit_code = 6

    def __init__(self, check: str, offset: int | None = None) -> None:
        self.check = check
        self.offset = offset
        at = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"checkpoint format error: {check}{at}")


class StageError(SsmiError):
    """A checkpoint is at the wrong training stage for the request."""

    exit_code = 7
