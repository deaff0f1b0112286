class ValidationError(ValueError):
    """Bad user input: malformed files, out-of-alphabet symbols, bad shapes."""


class InvariantError(RuntimeError):
    """An internal contract was violated (non-finite values, broken state)."""
