"""Exception types raised across the package."""


class RstabError(Exception):
    """Base class for all package errors."""


class NonSymmetricInput(RstabError, ValueError):
    pass


class OutsideDomain(RstabError, ValueError):
    pass


class InvalidSpec(RstabError, ValueError):
    pass


class DegenerateImmersion(RstabError, ValueError):
    pass


class MismatchedLeaf(RstabError, ValueError):
    pass


class CaseNotApplicable(RstabError):
    """The ambient manifold does not belong to a class where the identity holds."""


class NotConformal(RstabError):
    pass


class PreconditionFailed(RstabError):
    """A theorem's hypothesis does not hold on the scenario (not a bug)."""


class LeavesNotEquicurved(RstabError):
    pass


class HypothesisNotMet(RstabError):
    pass


class ConfigError(RstabError):
    exit_code = 2


class NumericalContractViolation(RstabError):
    exit_code = 1
