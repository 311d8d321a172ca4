"""Exception hierarchy shared across the toolkit.

Infrastructure problems (a sandbox that cannot spawn, an endpoint that never
answers) are kept distinct from task-level failures, which are data and never
raised as exceptions.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all qcodekit errors."""


class ConfigurationError(ToolkitError):
    """Invalid model, adapter, or run configuration."""


class CorpusError(ToolkitError):
    """Corpus file is unreadable or structurally broken (not a bad record)."""


class AugmentationError(ToolkitError):
    """Instruction augmentation failed; carries the backend diagnostic."""


class RetrievalBackendError(ToolkitError):
    """Remote embedding service unreachable or returned garbage."""


class IndexBuildError(ToolkitError):
    """Index build or persistence failure (duplicate ids, bad files)."""


class PromptBudgetError(ToolkitError):
    """Token budget too small to hold even the user query."""


class BackendError(ToolkitError):
    """Generation backend failure after retries.

    Attributes carry retry metadata so callers can report what was attempted.
    """

    def __init__(self, message: str, *, endpoint: str = "", attempts: int = 0):
        super().__init__(message)
        self.endpoint = endpoint
        self.attempts = attempts


class SandboxError(ToolkitError):
    """Sandbox infrastructure failure (spawn, not candidate behaviour)."""


class AggregationError(ToolkitError):
    """Result set cannot be aggregated (e.g. duplicate task ids)."""


class NonFiniteLossError(ToolkitError):
    """Training produced a non-finite loss; carries the offending step index."""

    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite loss {value!r} at training step {step}")
        self.step = step
        self.value = value
