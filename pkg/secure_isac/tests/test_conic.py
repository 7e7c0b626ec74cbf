"""Tests for the conic backend"""

import math

import cvxpy as cp
import numpy as np
import pytest

from secure_isac.core.exceptions import ProblemInfeasible, ProblemUnbounded
from secure_isac.optim import conic
from secure_isac.tests.conftest import random_unit


def _hermitian(rng, M):
    a = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    return (a + a.conj().T) / 2.0


def test_log_maximization():
    prob = conic.ConicProblem('log')
    x = prob.variable('x')
    prob.add_log(1.0, x)
    prob.add_constraint(x <= math.e)

    solution = conic.solve(prob)
    assert solution.status == 'optimal'
    assert float(solution.values['x']) == pytest.approx(math.e, rel=1e-6)
    assert solution.objective == pytest.approx(1.0, abs=1e-6)


def test_symmetric_trace_maximization(rng):
    a = rng.standard_normal((4, 4))
    c = (a + a.T) / 2.0
    prob = conic.ConicProblem('sdp')
    x = prob.psd_variable('X', 4)
    prob.add_constraint(cp.trace(x) <= 1.0)
    prob.add_linear(cp.sum(cp.multiply(c, x)))

    solution = conic.solve(prob)
    assert solution.objective == pytest.approx(np.linalg.eigvalsh(c)[-1], abs=1e-6)


def test_hermitian_trace_maximization(rng):
    h = _hermitian(rng, 3)
    prob = conic.ConicProblem('hermitian')
    z = prob.psd_variable('Z', 6, meta=(0, 'user 0'))
    prob.add_constraint(0.5 * cp.trace(z) <= 1.0)
    prob.add_linear(conic.hermitian_inner(h, z))

    solution = conic.solve(prob)
    assert solution.objective == pytest.approx(np.linalg.eigvalsh(h)[-1], abs=1e-6)

    f = conic.recover_hermitian(solution.values['Z'])
    assert np.real(np.trace(f)) == pytest.approx(1.0, abs=1e-6)
    assert np.real(np.trace(h @ f)) == pytest.approx(solution.objective, abs=1e-6)


def test_infeasible_box():
    prob = conic.ConicProblem('box')
    x = prob.variable('x')
    prob.add_constraint(x >= 1.0)
    prob.add_constraint(x <= 0.0)
    prob.add_linear(x)

    with pytest.raises(ProblemInfeasible) as excinfo:
        conic.solve(prob, slot=4)
    assert excinfo.value.status == 'infeasible'
    assert excinfo.value.slot == 4
    assert '(slot 4)' in str(excinfo.value)


def test_unbounded():
    prob = conic.ConicProblem('ray')
    x = prob.variable('x')
    prob.add_nonneg(x)
    prob.add_linear(x)

    with pytest.raises(ProblemUnbounded):
        conic.solve(prob)


def test_second_order_cone():
    prob = conic.ConicProblem('soc')
    x = prob.variable('x', (2,))
    prob.add_soc(1.0, x)
    prob.add_linear(x[0] + x[1])

    solution = conic.solve(prob)
    assert solution.objective == pytest.approx(math.sqrt(2.0), abs=1e-6)


def test_embedding_round_trip(rng):
    h = _hermitian(rng, 4)
    np.testing.assert_allclose(conic.recover_hermitian(conic.embed_hermitian(h)), h, atol=1e-12)

    eigenvalues = np.linalg.eigvalsh(conic.embed_hermitian(h))
    np.testing.assert_allclose(eigenvalues, np.repeat(np.linalg.eigvalsh(h), 2), atol=1e-10)


def test_hermitian_inner_is_trace(rng):
    h = _hermitian(rng, 3)
    v = random_unit(rng, 3)
    f = np.outer(v, v.conj())

    value = conic.hermitian_inner(h, conic.embed_hermitian(f)).value
    assert value == pytest.approx(np.real(np.vdot(v, h @ v)), abs=1e-12)


def test_problem_bookkeeping(tmp_path):
    prob = conic.ConicProblem('book')
    x = prob.variable('x', meta=('slot', 'position'))
    with pytest.raises(ValueError, match='already defined'):
        prob.variable('x')
    with pytest.raises(ValueError, match='positive weight'):
        prob.add_log(-1.0, x)

    prob.add_constant(2.0)
    prob.add_linear(-x)
    prob.add_nonneg(x)
    path = tmp_path / 'book.txt'
    prob.dump(str(path))

    text = path.read_text()
    assert '# problem: book' in text
    assert "variable x -> ('slot', 'position')" in text
    assert conic.solve(prob).objective == pytest.approx(2.0, abs=1e-6)


def test_deterministic(rng):
    h = _hermitian(rng, 3)

    def solve_once():
        prob = conic.ConicProblem('repeat')
        z = prob.psd_variable('Z', 6)
        prob.add_constraint(0.5 * cp.trace(z) <= 1.0)
        prob.add_log(1.0, conic.hermitian_inner(h @ h.conj().T + np.eye(3), z))
        return conic.solve(prob).values['Z']

    np.testing.assert_array_equal(solve_once(), solve_once())
