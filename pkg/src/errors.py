"""
Exception types shared across the bandit laboratory
"""


class BanditLabError(Exception):
    """Base class for every error raised by the laboratory"""


class MalformedInputError(BanditLabError, ValueError):
    """Input has the wrong shape, dimension or domain"""


class ConstructionError(BanditLabError, ValueError):
    """A test function could not be built with the requested guarantees"""


class NumericalError(BanditLabError, ArithmeticError):
    """A factorization or quadratic form broke down"""


class PolicyContractError(BanditLabError, RuntimeError):
    """select/observe were called out of order"""


class ConfigError(BanditLabError, ValueError):
    """Experiment configuration could not be parsed or validated"""

    def __init__(self, message, path=None, line=None):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(str(self))

    def __str__(self):
        location = ''
        if self.path is not None:
            location = f"{self.path}:"
            if self.line is not None:
                location += f"{self.line}:"
            location += ' '
        elif self.line is not None:
            location = f"line {self.line}: "
        return f"{location}{self.message}"
