"""Exception hierarchy shared by the solvers and the CLI."""


class ConfigError(ValueError):
    """Invalid model, grid or command-line configuration."""


class DomainError(ValueError):
    """A function was evaluated outside its domain."""


class SolverError(RuntimeError):
    """A numerical method could not produce a trustworthy answer."""


class StabilityError(SolverError):
    """The requested grid violates the scheme's stability condition."""


class PicardError(SolverError):
    """Picard iteration failed to contract; carries the diagnostics gathered so far."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class RestartError(SolverError):
    """A terminal density lost linear decay at the threshold and cannot seed a new window."""
