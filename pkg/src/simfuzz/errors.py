"""Exception types raised across the package."""


class SimfuzzError(Exception):
    """Base class for all package errors."""


class ContractViolation(SimfuzzError, ValueError):
    """A caller broke an operation's precondition (length, width, emptiness)."""


class ConfigError(SimfuzzError):
    """Invalid configuration value or file."""


class CorpusError(SimfuzzError):
    """Unreadable or corrupt corpus directory."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{message}: {path}")
        self.path = path


class NoSeedsError(CorpusError):
    pass


class CorpusFullError(SimfuzzError):
    """The corpus reached ``max_corpus_size``; seeds are never evicted."""


class DutError(SimfuzzError):
    """A design under test failed outside of its check hook."""


class SubprocessDutError(DutError):
    """The external simulator child broke the wire protocol or timed out."""


class WorkerError(SimfuzzError):
    """A simulation worker failed; carries the worker index and cause."""

    def __init__(self, worker, cause):
        super().__init__(f"worker {worker} failed: {cause!r}")
        self.worker = worker
        self.cause = cause
