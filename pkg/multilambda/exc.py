"""
Multilambda exceptions.
"""

#-------------------------------------------------------------------------------

class DomainError(ValueError):
    """
    An argument lies outside the domain of an operation.
    """

    def __init__(self, message, value=None):
        super().__init__(
            message if value is None else f"{message}: {value!r}")
        self.value = value



class SingularDetuningError(DomainError):
    """
    A detuning entering an inverse sum is zero.
    """

    def __init__(self, *frequencies):
        super().__init__("singular detuning", frequencies)
        self.frequencies = frequencies



class GridMisfitError(DomainError):
    """
    A plane wave doesn't fit a whole number of periods into a periodic grid.
    """

    def __init__(self, kappa, length):
        super().__init__(f"momentum doesn't fit a periodic grid of length {length!r}", kappa)
        self.kappa = kappa
        self.length = length



class StiffnessError(RuntimeError):
    """
    The adaptive integrator could not advance.
    """

    def __init__(self, t, step, message):
        super().__init__(f"integration failed at t={t!r} (step {step!r}): {message}")
        self.t = t
        self.step = step



class InsufficientDataError(RuntimeError):
    """
    A trace is too short for the requested filter window.
    """

    def __init__(self, length, required):
        super().__init__(
            f"trace of {length} samples shorter than filter kernel of {required}")
        self.length = length
        self.required = required



class ModelInconsistencyError(RuntimeError):
    """
    The approximated square of the interaction is significantly negative.
    """

    def __init__(self, eigenvalue, scale):
        super().__init__(
            f"V² eigenvalue {eigenvalue!r} below tolerance for norm {scale!r}")
        self.eigenvalue = eigenvalue
        self.scale = scale



class ConfigError(RuntimeError):
    """
    A configuration file could not be parsed or failed validation.
    """

    def __init__(self, message, *, path=None, field=None, line=None, column=None):
        where = "" if path is None else str(path)
        if line is not None:
            where += f":{line}:{column}"
        prefix = (where + ": " if where else "") + (field + ": " if field else "")
        super().__init__(prefix + message)
        self.message = message
        self.path = path
        self.field = field
        self.line = line
        self.column = column



class ToleranceBreach(RuntimeError):
    """
    A checked quantity exceeded its tolerance.
    """

    def __init__(self, name, value, tolerance):
        super().__init__(f"{name} = {value!r} exceeds tolerance {tolerance!r}")
        self.name = name
        self.value = value
        self.tolerance = tolerance



