from typing import List, Optional, Sequence, Tuple

from config import ERROR_MESSAGES, exit_code_for


class ScenarioToolError(Exception):
    """Base class for every error raised by the toolkit."""

    @property
    def exit_code(self) -> int:
        return exit_code_for(self)


# Scenario model

class MalformedDocument(ScenarioToolError):
    """The document is not syntactically valid JSON of the expected shape."""


class SchemaViolation(ScenarioToolError):
    """The document parses but breaks the scenario template or taxonomy.

    Attributes:
        violations: (path, message) pairs, e.g. ("layers[4].objects[0].category", "...")
    """

    def __init__(self, violations: Sequence[Tuple[str, str]], source: Optional[str] = None):
        self.violations: List[Tuple[str, str]] = list(violations)
        self.source = source
        path, message = self.violations[0] if self.violations else ("", "invalid document")
        prefix = f"{source}: " if source else ""
        extra = f" (+{len(self.violations) - 1} more)" if len(self.violations) > 1 else ""
        super().__init__(f"{prefix}{path}: {message}{extra}")

    @property
    def path(self) -> str:
        return self.violations[0][0] if self.violations else ""

    def messages(self) -> List[str]:
        return [f"{path}: {message}" for path, message in self.violations]


class ModeMismatch(ScenarioToolError):
    pass


class NotApplicable(ScenarioToolError):
    """A component metric was requested for a free-text layer."""


class NotHardMode(ScenarioToolError):
    pass


# Embeddings and metrics

class DimensionMismatch(ScenarioToolError):
    pass


class ZeroNorm(ScenarioToolError):
    pass


class EmptyReference(ScenarioToolError):
    pass


class EmptyGenerated(ScenarioToolError):
    pass


class TooFewSamples(ScenarioToolError):
    pass


class EmptySet(ScenarioToolError):
    pass


class EmptyField(ScenarioToolError):
    pass


class ProviderUnavailable(ScenarioToolError):
    pass


# Augmentation

class ClientUnavailable(ScenarioToolError):
    pass


class ExhaustedRepairs(ScenarioToolError):
    """Every repair attempt produced an invalid scenario."""

    def __init__(self, messages: Sequence[str], attempts: int):
        self.messages = list(messages)
        self.attempts = attempts
        detail = "; ".join(self.messages[-3:])
        super().__init__(f"{ERROR_MESSAGES['exhausted_repairs'].format(attempts=attempts)}: {detail}")


class MissingTaskText(ScenarioToolError):
    pass


# Corpus

class ChecksumMismatch(ScenarioToolError):
    pass


class DuplicateScenarioId(ScenarioToolError):
    pass


class IoFailure(ScenarioToolError):
    pass


class QuarantineFailure(ScenarioToolError):
    """Raised in strict mode when any generated scenario was quarantined."""
