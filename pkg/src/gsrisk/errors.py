"""Exception hierarchy for gsrisk.

Input problems derive from InputError, numerical failures from NumericalError,
Monte Carlo tolerance failures from MonteCarloError.  The CLI maps these to
exit codes 1 / 2 / 3.
"""


class GsriskError(Exception):
    """Base class for all gsrisk errors."""


class InputError(GsriskError):
    """Invalid user input (configuration, parameters)."""


class NumericalError(GsriskError):
    """A numerical procedure failed or left its validated regime."""


class MonteCarloError(GsriskError):
    """A simulation failed to reach the requested tolerance."""


# -- input -----------------------------------------------------------------

class NonStochasticAlpha(InputError):
    pass


class InvalidSubintensity(InputError):
    pass


class InfiniteMean(InputError):
    pass


class SafetyLoadingViolated(InputError):
    pass


class InvalidComponent(InputError):
    pass


class PreconditionViolated(InputError):
    pass


class ParseError(InputError):
    pass


class SchemaError(InputError):
    pass


# -- numerical -------------------------------------------------------------

class SingularResolvent(NumericalError):
    pass


class TransformDivergence(NumericalError):
    pass


class SingularMatrix(NumericalError):
    pass


class DegenerateCancellation(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


class StepMismatch(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class RootCountMismatch(NumericalError):
    pass


class NonSimpleRoots(NumericalError):
    pass


class ZeroRow(NumericalError):
    pass


class SingularLambda(NumericalError):
    pass


class ZeroDerivative(NumericalError):
    pass


class ResidueImbalance(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class NonIntegrableKappa(NumericalError):
    pass


# -- monte carlo ------------------------------------------------------------

class InsufficientPaths(MonteCarloError):
    pass
