class InputError(ValueError):
    """Raised for malformed or inconsistent user input.

    ``line`` is the 1-based line number for file parsing errors, if known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.reason = message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
