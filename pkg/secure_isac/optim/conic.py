"""Conic backend - assemble and solve the convex subproblems"""

import dataclasses
import logging
import time

import cvxpy as cp
import numpy as np

from secure_isac.core.exceptions import NumericalFailure, ProblemInfeasible, ProblemUnbounded


LOG = logging.getLogger('secure-isac.conic')

DEFAULT_TOL = 1e-7
DEFAULT_SOLVER = 'CLARABEL'

_SOLVER_OPTIONS = {
    'CLARABEL': lambda tol: {'tol_gap_abs': tol, 'tol_gap_rel': tol, 'tol_feas': tol},
    'SCS': lambda tol: {'eps_abs': tol, 'eps_rel': tol, 'max_iters': 200000},
    'MOSEK': lambda tol: {},
}


def embed_hermitian(h) -> np.ndarray:
    """Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix"""
    h = np.asarray(h, dtype=complex)
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def recover_hermitian(z) -> np.ndarray:
    """Inverse of `embed_hermitian`

    Off-structure parts of `z` are averaged out, which maps any real PSD matrix
    to the Hermitian PSD matrix with the same embedded linear functionals.
    """
    z = np.asarray(z, dtype=float)
    m = z.shape[0] // 2
    real = (z[:m, :m] + z[m:, m:]) / 2.0
    imag = (z[m:, :m] - z[:m, m:]) / 2.0
    f = real + 1j * imag
    return (f + f.conj().T) / 2.0


def hermitian_inner(h, z):
    """Affine expression tr(H F) for the Hermitian F embedded in variable `z`"""
    return 0.5 * cp.sum(cp.multiply(embed_hermitian(h), z))


@dataclasses.dataclass
class Solution:
    status: str
    values: dict
    objective: float
    solve_time: float


class ConicProblem:
    """Maximization over nonnegative, second-order, PSD and exponential cones

    The objective is a linear part plus weighted logarithms of affine
    expressions; variables carry metadata mapping them back to (slot, entity).
    """

    def __init__(self, name):
        self.name = name
        self.variables = {}
        self.metadata = {}
        self.constraints = []
        self._linear = []
        self._logs = []
        self._constant = 0.0

    def variable(self, name, shape=(), meta=None, **kwargs) -> cp.Variable:
        if name in self.variables:
            raise ValueError("variable '%s' already defined in %s" % (name, self.name))
        var = cp.Variable(shape, name=name, **kwargs)
        self.variables[name] = var
        self.metadata[name] = meta
        return var

    def psd_variable(self, name, dim, meta=None) -> cp.Variable:
        """Real symmetric `dim` x `dim` variable constrained to the PSD cone"""
        var = self.variable(name, (dim, dim), meta=meta, symmetric=True)
        self.constraints.append(var >> 0)
        return var

    def add_linear(self, expr):
        self._linear.append(expr)

    def add_constant(self, value):
        self._constant += float(value)

    def add_log(self, weight, expr):
        """Add weight * sum(log(expr)); `expr` must be affine and `weight` positive"""
        if weight <= 0:
            raise ValueError("log terms need a positive weight, got %g" % weight)
        self._logs.append((float(weight), expr))

    def add_nonneg(self, expr):
        self.constraints.append(expr >= 0)

    def add_soc(self, t, x):
        """||x||_2 <= t"""
        self.constraints.append(cp.norm(x, 2) <= t)

    def add_constraint(self, constraint):
        self.constraints.append(constraint)

    def objective(self):
        total = cp.Constant(self._constant)
        for expr in self._linear:
            total = total + expr
        for weight, expr in self._logs:
            total = total + weight * cp.sum(cp.log(expr))
        return total

    def build(self) -> cp.Problem:
        return cp.Problem(cp.Maximize(self.objective()), self.constraints)

    def dump(self, path):
        """Write a readable text form of the assembled program to `path`"""
        with open(path, 'w', encoding='utf-8') as f:
            f.write("# problem: %s\n" % self.name)
            for name, meta in sorted(self.metadata.items()):
                f.write("# variable %s -> %s\n" % (name, meta))
            f.write(str(self.build()))
            f.write('\n')


def solve(problem: ConicProblem, tol=DEFAULT_TOL, solver=DEFAULT_SOLVER, slot=None) -> Solution:
    """Solve `problem` to tolerance `tol`
    :returns: Solution with status 'optimal' or 'optimal_inaccurate'
    :raises: ProblemInfeasible, ProblemUnbounded, NumericalFailure
    """
    prog = problem.build()
    options = _SOLVER_OPTIONS.get(solver, lambda _: {})(tol)
    start = time.perf_counter()
    try:
        prog.solve(solver=solver, **options)
    except cp.error.SolverError as exc:
        raise NumericalFailure("%s: solver %s failed: %s" % (problem.name, solver, exc),
                               problem=problem.name, slot=slot)
    elapsed = time.perf_counter() - start

    status = prog.status
    LOG.debug("%s: %s in %.3fs (objective %s)", problem.name, status, elapsed, prog.value)

    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        raise ProblemInfeasible("%s is infeasible" % problem.name,
                                problem=problem.name, slot=slot)
    if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        raise ProblemUnbounded("%s is unbounded" % problem.name,
                               problem=problem.name, slot=slot)
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or prog.value is None:
        raise NumericalFailure("%s: solver returned status %s" % (problem.name, status),
                               problem=problem.name, slot=slot)
    if status == cp.OPTIMAL_INACCURATE:
        LOG.warning("%s solved inaccurately", problem.name)

    values = {name: np.array(var.value) for name, var in problem.variables.items()}
    return Solution(status='optimal' if status == cp.OPTIMAL else 'optimal_inaccurate',
                    values=values, objective=float(prog.value), solve_time=elapsed)
