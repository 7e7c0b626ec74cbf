"""Trajectory step - successive convex approximation around the previous path"""

import dataclasses
import logging
import math

import cvxpy as cp
import numpy as np

from secure_isac.core.channel import ChannelState
from secure_isac.core.exceptions import ProblemInfeasible
from secure_isac.core.scenario import ScenarioConfig, Trajectory
from secure_isac.optim import conic


LOG = logging.getLogger('secure-isac.trajectory')

LN2 = math.log(2.0)


@dataclasses.dataclass
class TrajectoryStepCoefficients:
    """Beam-dependent constants of the trajectory subproblem

    Every power coefficient is stored divided by C_beta = noise / (M beta0), so
    c[n, k] here is c_k[n] / C_beta and the slacks keep their squared-meter unit.
    """

    c: np.ndarray
    "|chi_k^H f_k|^2, (N_t, K)"
    c_e: np.ndarray
    "|chi_E^H f_k|^2, (N_t, K)"
    C: np.ndarray
    "sum over all beams of |chi_k^H f_i|^2, (N_t, K)"
    C_e: np.ndarray
    "sum over all beams of |chi_E^H f_i|^2, (N_t,)"
    c_beta: float
    anchor: np.ndarray
    "linearization trajectory, (N_t, 2)"
    alpha_anchor: np.ndarray
    gamma_anchor: np.ndarray
    sensing_bound: np.ndarray
    "upper bound on the squared echo range of every slot, inf when inactive"


SENSING_DISKS = ('beams', 'budget')


def compute_step_coefficients(f, w, channels: ChannelState, trajectory: Trajectory,
                              cfg: ScenarioConfig, sensing_disk='beams') -> TrajectoryStepCoefficients:
    """Coefficients at the linearization trajectory for fixed beams and filters
    :param f: transmit beams, (N_t, K+1, M)
    :param w: receive filters, (N_t, M)
    :param channels: LOS channels evaluated along `trajectory`
    :param trajectory: linearization point
    :param sensing_disk: 'beams' bounds the echo range for the given beams and
        filters; 'budget' only excludes ranges where no beams within the power
        budget reach the threshold, for callers re-adapting the beams afterwards
    """
    if sensing_disk not in SENSING_DISKS:
        raise ValueError("unknown sensing disk '%s'" % sensing_disk)
    K = cfg.K
    c_beta = cfg.noise_power / (cfg.M * cfg.beta0)

    # received[n, i, j] = |chi_i^H f_j|^2 over nodes i and beams j
    received = np.abs(np.einsum('nim,njm->nij', channels.chi.conj(), f)) ** 2
    users = np.arange(K)
    c = received[:, users, users]
    c_e = received[:, K, :K]
    C = received[:, :K, :].sum(axis=2)
    C_e = received[:, K, :].sum(axis=1)

    anchor = trajectory.points.copy()
    alpha_anchor = _squared_ranges(anchor, cfg.user_array, cfg.altitude)
    gamma_anchor = _squared_ranges(anchor, cfg.eve_array[None, :], cfg.altitude)[:, 0]

    bound = np.full(len(anchor), np.inf)
    if cfg.gamma_th > 0 and sensing_disk == 'budget':
        # matched filter, no leakage and the whole budget towards the eavesdropper
        bound[:] = math.sqrt(cfg.M ** 2 * cfg.beta0 * cfg.rcs * cfg.p_max
                             / (cfg.gamma_th * cfg.noise_power))
    elif cfg.gamma_th > 0:
        chi_e = channels.chi[:, K]
        gain = np.abs(np.einsum('nm,nm->n', w.conj(), chi_e)) ** 2
        echo = gain * C_e
        leak_dirs = np.einsum('nji,nj->ni', channels.h_si.conj(), w)  # H_SI^H w
        leak = np.sum(np.abs(np.einsum('nim,nm->ni', f, leak_dirs.conj())) ** 2, axis=1)
        denominator = leak + cfg.noise_power
        bound = np.sqrt(cfg.M ** 2 * cfg.beta0 * cfg.rcs * echo / (cfg.gamma_th * denominator))

    return TrajectoryStepCoefficients(
        c=c / c_beta, c_e=c_e / c_beta, C=C / c_beta, C_e=C_e / c_beta, c_beta=c_beta,
        anchor=anchor, alpha_anchor=alpha_anchor, gamma_anchor=gamma_anchor,
        sensing_bound=bound)


def _squared_ranges(points, nodes, altitude) -> np.ndarray:
    """H^2 + |q[n] - node_j|^2, (N_t, len(nodes))"""
    diff = points[:, None, :] - nodes[None, :, :]
    return altitude ** 2 + np.sum(diff ** 2, axis=2)


def tight_slacks(points, cfg: ScenarioConfig):
    """Slacks alpha, gamma meeting their defining inequalities with equality"""
    points = np.asarray(points, dtype=float)
    alpha = _squared_ranges(points, cfg.user_array, cfg.altitude)
    gamma = _squared_ranges(points, cfg.eve_array[None, :], cfg.altitude)[:, 0]
    return alpha, gamma


def linearized_gamma_bound(points, coeffs: TrajectoryStepCoefficients, cfg: ScenarioConfig):
    """Right-hand side of the first-order lower bound on H^2 + |q - q_E|^2"""
    points = np.asarray(points, dtype=float)
    offset = coeffs.anchor - cfg.eve_array
    return (cfg.altitude ** 2 + np.sum(offset ** 2, axis=1)
            + 2.0 * np.sum(offset * (points - coeffs.anchor), axis=1))


def _eve_leakage(coeffs, gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)[:, None]
    return np.log2(1.0 + coeffs.c_e / (coeffs.C_e[:, None] - coeffs.c_e + gamma))


def slack_objective(coeffs: TrajectoryStepCoefficients, alpha, gamma) -> float:
    """Exact objective of the slack reformulation for given slacks"""
    user = np.log2(1.0 + coeffs.c / (coeffs.C - coeffs.c + alpha))
    return float(np.sum(user - _eve_leakage(coeffs, gamma)))


def taylor_objective(coeffs: TrajectoryStepCoefficients, alpha, gamma) -> float:
    """Concave surrogate of `slack_objective`, tangent at the anchor slacks"""
    interference = coeffs.C - coeffs.c + coeffs.alpha_anchor
    user = (np.log2(coeffs.C + alpha)
            - (alpha - coeffs.alpha_anchor) / (LN2 * interference)
            - np.log2(interference))
    return float(np.sum(user - _eve_leakage(coeffs, gamma)))


def surrogate_value(points, coeffs: TrajectoryStepCoefficients, cfg: ScenarioConfig) -> float:
    """Surrogate at `points` with alpha tight and gamma on its linearized bound"""
    alpha, _ = tight_slacks(points, cfg)
    return taylor_objective(coeffs, alpha, linearized_gamma_bound(points, coeffs, cfg))


@dataclasses.dataclass
class TrajectoryStepResult:
    trajectory: Trajectory
    alpha: np.ndarray
    gamma: np.ndarray
    objective: float
    status: str
    solve_time: float


def build_trajectory_problem(prev: Trajectory, coeffs: TrajectoryStepCoefficients,
                             cfg: ScenarioConfig) -> conic.ConicProblem:
    """Assemble the convex trajectory subproblem around `prev`"""
    n_slots, K = coeffs.c.shape
    h2 = cfg.altitude ** 2
    prob = conic.ConicProblem('trajectory')

    q = prob.variable('q', (n_slots, 2), meta=('slot', 'position'))
    alpha = prob.variable('alpha', (n_slots, K), meta=('slot', 'user'))
    gamma = prob.variable('gamma', (n_slots,), meta=('slot', 'eavesdropper'))
    leak = prob.variable('leak', (n_slots, K), meta=('slot', 'user'))

    # Endpoints and travel limit
    prob.add_constraint(q[0] == np.asarray(cfg.q0))
    prob.add_constraint(q[n_slots - 1] == np.asarray(cfg.qf))
    if n_slots > 1:
        dq = q[1:] - q[:-1]
        if cfg.paper_literal_velocity:
            prob.add_constraint(cp.sum(cp.square(dq), axis=1) <= cfg.speed_cap)
        else:
            prob.add_constraint(cp.norm(dq, 2, axis=1) <= cfg.speed_cap)

    # alpha_k >= H^2 + |q - q_k|^2
    for k, q_k in enumerate(cfg.user_array):
        prob.add_constraint(h2 + cp.sum(cp.square(q - q_k[None, :]), axis=1) <= alpha[:, k])

    # gamma below the tangent of H^2 + |q - q_E|^2
    offset = coeffs.anchor - cfg.eve_array
    prob.add_constraint(
        gamma <= h2 + np.sum(offset ** 2, axis=1)
        + 2.0 * cp.sum(cp.multiply(offset, q - coeffs.anchor), axis=1))

    # Sensing disk around the eavesdropper
    active = np.flatnonzero(np.isfinite(coeffs.sensing_bound))
    if active.size:
        base = 0.0 if cfg.paper_literal_sensing_gain else h2
        short = active[coeffs.sensing_bound[active] < base]
        if short.size:
            raise ProblemInfeasible("sensing disk radius is imaginary", problem=prob.name,
                                    slot=int(short[0]))
        prob.add_constraint(
            base + cp.sum(cp.square(q[active] - cfg.eve_array[None, :]), axis=1)
            <= coeffs.sensing_bound[active])

    # User terms: log2(C + alpha) minus the tangent of log2(C - c + alpha)
    scale = coeffs.C + coeffs.alpha_anchor
    interference = coeffs.C - coeffs.c + coeffs.alpha_anchor
    prob.add_log(1.0 / LN2, cp.multiply(1.0 / scale, coeffs.C + alpha))
    prob.add_constant(np.sum(np.log2(scale)) - np.sum(np.log2(interference)))
    prob.add_linear(-cp.sum(cp.multiply(1.0 / (LN2 * interference),
                                        alpha - coeffs.alpha_anchor)))

    # Eavesdropper terms: leak <= -ln(1 + c_E / (C_E - c_E + gamma)) written as
    # exp(leak) + c_E / (C_E + gamma) <= 1
    ref = coeffs.C_e + coeffs.gamma_anchor
    for k in range(K):
        prob.add_constraint(
            cp.exp(leak[:, k])
            + cp.multiply(coeffs.c_e[:, k] / ref, cp.inv_pos(cp.multiply(1.0 / ref, coeffs.C_e + gamma)))
            <= 1.0)
    prob.add_linear(cp.sum(leak) / LN2)
    return prob


def solve_trajectory_step(prev: Trajectory, coeffs: TrajectoryStepCoefficients,
                          cfg: ScenarioConfig, solver=None, tol=None, dump=None) -> TrajectoryStepResult:
    """Maximize the trajectory surrogate around `prev` for frozen beams
    :param prev: previous trajectory, also the linearization point of `coeffs`
    :param solver: conic solver name (default from `cfg`)
    :param tol: solver tolerance (default from `cfg`)
    :param dump: optional path for a text dump of the program
    :raises: ProblemInfeasible naming the slot, SolverError
    """
    prob = build_trajectory_problem(prev, coeffs, cfg)
    if dump:
        prob.dump(dump)
    solution = conic.solve(prob, tol=tol or cfg.solver_tol, solver=solver or cfg.solver)

    points = solution.values['q'].reshape(len(prev), 2)
    points[0], points[-1] = cfg.q0, cfg.qf
    LOG.debug("trajectory step: surrogate %.6g, max move %.3g m", solution.objective,
              float(np.max(np.linalg.norm(points - prev.points, axis=1))))
    return TrajectoryStepResult(
        trajectory=Trajectory(points),
        alpha=solution.values['alpha'].reshape(coeffs.c.shape),
        gamma=solution.values['gamma'].reshape(-1),
        objective=solution.objective,
        status=solution.status,
        solve_time=solution.solve_time)


def max_feasible_fraction(prev: Trajectory, candidate: Trajectory, cfg: ScenarioConfig) -> float:
    """Largest t in [0, 1] keeping prev + t (candidate - prev) within the travel limit

    `prev` must satisfy the limit; each transition gives a quadratic in t.
    """
    if len(prev) < 2:
        return 1.0
    b = np.diff(prev.points, axis=0)
    a = np.diff(candidate.points, axis=0) - b
    limit = cfg.speed_cap if cfg.paper_literal_velocity else cfg.speed_cap ** 2

    aa = np.sum(a * a, axis=1)
    ab = np.sum(a * b, axis=1)
    slack = limit - np.sum(b * b, axis=1)
    t = np.ones_like(aa)
    moving = aa > 0
    disc = np.maximum(ab[moving] ** 2 + aa[moving] * np.maximum(slack[moving], 0.0), 0.0)
    t[moving] = (-ab[moving] + np.sqrt(disc)) / aa[moving]
    return float(np.clip(t.min(), 0.0, 1.0))


def blend(prev: Trajectory, candidate: Trajectory, t) -> Trajectory:
    points = prev.points + t * (candidate.points - prev.points)
    points[0], points[-1] = prev.points[0], prev.points[-1]
    return Trajectory(points)
