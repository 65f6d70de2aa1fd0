"""Exception types shared across the package."""


class ModelError(ValueError):
    """Invalid model parameters or arguments outside the documented domain."""


class NumericalError(ArithmeticError):
    """A computation could not be carried out to the required accuracy."""


class DefectiveSpectrumError(NumericalError):
    """The quadratic matrix polynomial has a non-semisimple root."""
