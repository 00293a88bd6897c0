"""Exception hierarchy for dynafit."""


class DynafitError(Exception):
    """Base class for all errors raised by dynafit."""


class ShapeMismatchError(DynafitError, ValueError):
    """Trajectories do not share the shape a kernel or model requires."""


class KernelDomainError(DynafitError, ValueError):
    """Input lies outside the domain of a kernel (e.g. logistic entries >= 1)."""


class NumericalError(DynafitError, ArithmeticError):
    """A computation produced a non-finite or numerically corrupt result."""


class NotPSDError(NumericalError):
    """Gram matrix has an eigenvalue too negative to be round-off."""


class DegenerateKernelError(NumericalError):
    """Gram matrix has no positive eigenvalue."""


class ModelFormatError(DynafitError, ValueError):
    """Model file is malformed or truncated."""


class ModelVersionError(ModelFormatError):
    """Model file carries an unknown format name or version."""


class ChecksumError(ModelFormatError):
    """Model file payload does not match its integrity checksum."""


class DatasetError(DynafitError, ValueError):
    """Dataset manifest or trajectory file is invalid."""


class GeneratorError(DynafitError, RuntimeError):
    """Synthetic data generation failed."""


class FeatureDimensionError(DynafitError, ValueError):
    """Explicit feature space is too large to materialise."""
