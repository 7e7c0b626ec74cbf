"""Secure ISAC exceptions"""


class SecureIsacError(Exception):
    """Base class of all errors raised by secure_isac"""


class ConfigError(SecureIsacError, ValueError):
    """Scenario could not be parsed or violates an invariant"""


class DegenerateDirection(SecureIsacError, ValueError):
    """A direction (steering or receive filter) is undefined"""


class InfeasibleScenario(SecureIsacError):
    """The sensing threshold cannot be met at the initial point"""

    def __init__(self, msg, slots=()):
        super(InfeasibleScenario, self).__init__(msg)
        self.slots = tuple(slots)


class SolverError(SecureIsacError):
    """Conic subproblem did not return an optimal point"""

    status = 'solver_error'

    def __init__(self, msg, problem=None, slot=None):
        """
        :param msg: error message, str
        :param problem: name of the failing problem, str
        :param slot: time slot the problem belongs to, int or None
        """
        if slot is not None:
            msg = "%s (slot %d)" % (msg, slot)
        super(SolverError, self).__init__(msg)
        self.problem = problem
        self.slot = slot


class ProblemInfeasible(SolverError):
    status = 'infeasible'


class ProblemUnbounded(SolverError):
    status = 'unbounded'


class NumericalFailure(SolverError):
    status = 'numerical_failure'
