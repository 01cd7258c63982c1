"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FablegenError(Exception):
    """Base class for all package-specific errors."""


class CorpusFormatError(FablegenError):
    """A corpus file could not be parsed. Carries the offending file and record."""

    def __init__(self, message: str, *, path: str | None = None, record: str | None = None):
        detail = message
        if path:
            detail += f" (file: {path}"
            detail += f", record: {record})" if record else ")"
        super().__init__(detail)
        self.path = path
        self.record = record


class CorpusValidationError(FablegenError):
    """One or more corpus invariants failed. Lists every violation, not just the first."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__(
            f"{len(self.violations)} validation error(s):\n"
            + "\n".join(f"  - {v}" for v in self.violations)
        )


class AnnotationError(FablegenError):
    """An annotation backend failed. Carries backend identity and cause."""

    def __init__(self, backend_id: str, cause: str):
        super().__init__(f"annotation backend '{backend_id}' failed: {cause}")
        self.backend_id = backend_id
        self.cause = cause


class GenerationError(FablegenError):
    """Question or answer generation failed."""


class LearnedBackendUnavailableError(FablegenError):
    """Raised when a learned backend cannot run (missing weights, hardware, or torch).

    Callers must surface this explicitly; there is no silent fallback to the
    template backend.
    """


class RankerError(FablegenError):
    """Ranker training or scoring violated its contract (bad labels, layout mismatch)."""


class ConfigError(FablegenError):
    """A pipeline or service configuration value is invalid."""
