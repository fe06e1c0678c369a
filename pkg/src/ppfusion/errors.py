"""Exception types shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, NumericalError -> 3,
partial sweep failure -> 4.
"""


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


class NumericalError(Exception):
    """A numerical routine failed (factorization, divergent chain, ...)."""
