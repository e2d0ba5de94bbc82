"""Exception hierarchy shared by every module."""


class StdpSimError(Exception):
    """Base class for all errors raised by stdpsim."""


class ConfigurationError(StdpSimError, ValueError):
    """A parameter or configuration value is out of its valid range."""


class StructuralError(StdpSimError, ValueError):
    """Array shapes disagree with each other or with the network layout."""


class NumericalFault(StdpSimError, ArithmeticError):
    """A state variable or weight became non-finite."""


class InferenceError(StdpSimError):
    """Inference cannot proceed, e.g. no neuron carries a class label."""


class ParseError(StdpSimError):
    """Malformed binary input; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class IdxParseError(ParseError):
    pass


class ModelFileError(ParseError):
    pass
