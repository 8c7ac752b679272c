"""Exception hierarchy shared by all linecomp modules."""


class LinecompError(Exception):
    """Base class for every error raised by this package."""


class LexError(LinecompError):
    def __init__(self, position, reason):
        self.position = position
        self.reason = reason
        line, col = position
        super().__init__(f"line {line}, column {col}: {reason}")


class EmptyCorpus(LinecompError):
    pass


class ParseError(LinecompError):
    def __init__(self, index, expected, message=""):
        self.index = index
        self.expected = tuple(sorted(expected))
        detail = f" ({message})" if message else ""
        super().__init__(f"token {index}: expected one of {list(self.expected)}{detail}")


class GrammarError(LinecompError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"grammar line {line}: {reason}")


class ConformanceError(LinecompError):
    pass


class InvalidAction(LinecompError):
    def __init__(self, state, action):
        self.state = state
        self.action = action
        super().__init__(f"{action!r} is not valid in state {state}")


class CompleteState(LinecompError):
    pass


class RenderError(LinecompError):
    pass


class IncompletePrefix(LinecompError):
    pass


class MalformedStream(LinecompError):
    pass


class ShapeError(LinecompError):
    pass


class Diverged(LinecompError):
    pass


class ContextTooLong(LinecompError):
    pass


class EmptyTarget(LinecompError):
    pass


class FileParseError(LinecompError):
    """Every per-line ParseError of a file, as (line number, error) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        first_line, first = self.errors[0]
        super().__init__(f"{len(self.errors)} unparseable line(s); first at line {first_line}: {first}")
