"""Exception hierarchy.

Every error raised by the library derives from :class:`EEAError` so callers
(and the CLI) can catch one base class. Most also derive from ``ValueError``
because they describe bad input rather than a programming fault.
"""


class EEAError(Exception):
    """Base class for all library errors."""


# -- data ingestion and synthetic generation ---------------------------------

class MissingColumn(EEAError, ValueError):
    pass


class BadCategoryLevel(EEAError, ValueError):
    pass


class NonFiniteValue(EEAError, ValueError):
    pass


class DuplicateDayId(EEAError, ValueError):
    pass


class PairingViolation(EEAError, ValueError):
    pass


class InsufficientSpan(EEAError, ValueError):
    pass


class DegenerateConfig(EEAError, ValueError):
    pass


class ProbabilityOutOfRange(EEAError, ValueError):
    pass


# -- model zoo ---------------------------------------------------------------

class SingleClassTraining(EEAError, ValueError):
    pass


class NonConvergence(EEAError, RuntimeError):
    def __init__(self, message, iterations=None, grad_norm=None):
        super().__init__(message)
        self.iterations = iterations
        self.grad_norm = grad_norm


class SchemaMismatch(EEAError, ValueError):
    pass


class EmptyGrid(EEAError, ValueError):
    pass


class UnknownHyperparameter(EEAError, ValueError):
    pass


# -- metrics -----------------------------------------------------------------

class SingleClass(EEAError, ValueError):
    pass


class DegenerateReference(EEAError, ValueError):
    pass


class AllZeroWeights(EEAError, ValueError):
    pass


class NonPositiveMean(EEAError, ValueError):
    pass


# -- attribution -------------------------------------------------------------

class ZeroMean(EEAError, ValueError):
    pass


class MisalignedPair(EEAError, ValueError):
    pass


class InSampleLeakage(EEAError, ValueError):
    pass


class DegenerateResample(EEAError, RuntimeError):
    pass


# -- shift diagnostics -------------------------------------------------------

class AllClipped(EEAError, ValueError):
    pass


class TooFewPerBin(EEAError, ValueError):
    pass


class RankDeficient(EEAError, ValueError):
    pass


# -- simulation harness ------------------------------------------------------

class DegenerateTruth(EEAError, ValueError):
    pass


class SingleClassReplicate(EEAError, ValueError):
    pass


class ZeroVariance(EEAError, ValueError):
    pass


class InsufficientModels(EEAError, ValueError):
    pass


# -- multiplicity ------------------------------------------------------------

class SingleModel(EEAError, ValueError):
    pass


class NonPositiveRR(EEAError, ValueError):
    pass


# -- CLI ---------------------------------------------------------------------

class ConfigParse(EEAError, ValueError):
    pass


class IoFailure(EEAError, OSError):
    pass


class InvalidValue(EEAError, ValueError):
    """A finite value outside its declared domain (e.g. negative fuel moisture)."""


class UnexpectedColumn(EEAError, ValueError):
    pass
