"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class AccelExplorerError(Exception):
    exit_code = 1


class ParseError(AccelExplorerError):
    """Input text could not be decoded as JSON."""

    exit_code = 2

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(AccelExplorerError):
    exit_code = 2


class InfeasibleDesignError(AccelExplorerError):
    """No configuration satisfies the resource budget."""

    exit_code = 3


class ReportIOError(AccelExplorerError):
    exit_code = 4
