"""Exception and warning types shared across the package."""


class SymencError(Exception):
    """Base class for all package errors."""


class EmptyPiece(SymencError):
    pass


class ParseError(SymencError):
    """Raised for malformed input files.

    ``offset`` is a byte offset (MIDI) and ``line`` a source line (XML);
    whichever does not apply is ``None``.
    """

    def __init__(self, message, offset=None, line=None):
        where = []
        if offset is not None:
            where.append(f"byte {offset}")
        if line is not None:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.offset = offset
        self.line = line


class UnsupportedFormat(SymencError):
    pass


class UnsupportedCombination(SymencError):
    """A representation option is not defined for the given modality."""


class DecodeError(SymencError):
    def __init__(self, message, index):
        super().__init__(f"{message} at token {index}")
        self.index = index


class ZeroVariance(SymencError):
    pass


class FixtureMissing(SymencError):
    pass


class IngestWarning(UserWarning):
    """Recoverable problem found while reading an input file."""


class QuantizationWarning(UserWarning):
    """A value was clamped into the tokenizer's quantization range."""
