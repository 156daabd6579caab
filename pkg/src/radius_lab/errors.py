"""Exception types; the CLI maps them to exit codes 1, 2 and 3."""


class ConfigError(ValueError):
    """Invalid system or run configuration."""


class NonConvergenceError(RuntimeError):
    """A numerical iteration (splitting, inversion, Newton) failed to converge."""


class TheoremViolation(AssertionError):
    """A theorem-backed inequality failed; this indicates a bug, not bad luck."""
