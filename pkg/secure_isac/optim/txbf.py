"""Transmit beamforming step - SDP relaxation with a Taylor secrecy surrogate"""

import dataclasses
import logging
import math

import cvxpy as cp
import numpy as np

from secure_isac.core.channel import ChannelState
from secure_isac.core.metrics import sensing_terms
from secure_isac.core.scenario import ScenarioConfig
from secure_isac.optim import conic
from secure_isac.optim.rx_beamform import rx_filter_or_fallback


LOG = logging.getLogger('secure-isac.txbf')

LN2 = math.log(2.0)
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-8

SENSING_MARGIN = 1e-6
"Relative margin above the sensing threshold kept by the covariance step"


def mrt_beams(channels: ChannelState, cfg: ScenarioConfig, scale=1.0) -> np.ndarray:
    """Equal-power maximum ratio beams towards every user and the eavesdropper

    f_i[n] = scale * sqrt(P_max / (K+1)) h_i[n] / |h_i[n]|, shape (N_t, K+1, M).
    """
    h = np.sqrt(channels.beta)[:, :, None] * channels.chi
    norms = np.linalg.norm(h, axis=2, keepdims=True)
    return scale * math.sqrt(cfg.p_max / (cfg.K + 1)) * h / norms


def track_beams(f, chi_from, chi_to, p_max) -> np.ndarray:
    """Carry beams over to new channel directions keeping every received amplitude

    Each beam gets the smallest correction making chi_to^H f equal to
    chi_from^H f for every node (least squares with more nodes than antennas).
    Slots whose power then exceeds `p_max` are scaled back.

    :param f: beams, (N_t, K+1, M)
    :param chi_from: directions the beams were designed for, (N_t, K+1, M)
    :param chi_to: new directions, (N_t, K+1, M)
    """
    f = np.asarray(f, dtype=complex)
    target = np.einsum('nim,njm->nij', np.conj(chi_from), f)
    current = np.einsum('nim,njm->nij', np.conj(chi_to), f)
    correction = np.linalg.pinv(np.conj(chi_to)) @ (target - current)
    tracked = f + np.swapaxes(correction, 1, 2)

    power = np.maximum(np.sum(np.abs(tracked) ** 2, axis=(1, 2)), np.finfo(float).tiny)
    return tracked * np.sqrt(np.minimum(1.0, p_max / power))[:, None, None]


@dataclasses.dataclass
class CovarianceSet:
    """Beam covariances F_1..F_K, F_E of one slot, shape (K+1, M, M)"""

    matrices: np.ndarray
    slot: int = None

    @classmethod
    def from_beams(cls, f, slot=None) -> 'CovarianceSet':
        f = np.asarray(f, dtype=complex)
        return cls(np.einsum('im,in->imn', f, f.conj()), slot=slot)

    @property
    def K(self) -> int:
        return self.matrices.shape[0] - 1

    def total(self) -> np.ndarray:
        return self.matrices.sum(axis=0)

    def power(self) -> float:
        return float(np.real(np.trace(self.total())))

    def violations(self, p_max=None) -> list:
        problems = []
        for j, mat in enumerate(self.matrices):
            if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL * max(1.0, np.abs(mat).max()):
                problems.append("F[%d] is not Hermitian" % j)
            elif np.linalg.eigvalsh(mat).min() < -PSD_TOL:
                problems.append("F[%d] is not positive semidefinite" % j)
        if p_max is not None and self.power() > p_max * (1.0 + 1e-9):
            problems.append("trace power %.6g exceeds %.6g" % (self.power(), p_max))
        return problems


def _quad(h, mat) -> float:
    return float(np.real(np.vdot(h, mat @ h)))


def _received(F: CovarianceSet, h):
    """h^H F_j h for every covariance"""
    return np.array([_quad(h, mat) for mat in F.matrices])


def covariance_secrecy_rate(F: CovarianceSet, channels: ChannelState, slot, k) -> float:
    """Unclipped secrecy rate of user `k` for covariances `F`"""
    h = channels.h(slot)
    noise = channels.noise_power
    user, eve = _received(F, h[k]), _received(F, h[-1])
    return float(np.log2(user.sum() + noise) - np.log2(user.sum() - user[k] + noise)
                 - np.log2(eve.sum() + noise) + np.log2(eve.sum() - eve[k] + noise))


def taylor_secrecy_surrogate(F: CovarianceSet, F_anchor: CovarianceSet,
                             channels: ChannelState, slot, k) -> float:
    """Concave lower bound of the secrecy rate of user `k`, tight at `F_anchor`

    The two logarithms entering with a minus sign are replaced by their
    tangents at the anchor; the others are kept exact.
    """
    h = channels.h(slot)
    noise = channels.noise_power
    user, eve = _received(F, h[k]), _received(F, h[-1])
    user0, eve0 = _received(F_anchor, h[k]), _received(F_anchor, h[-1])

    interference = user.sum() - user[k]
    interference0 = user0.sum() - user0[k] + noise
    leakage0 = eve0.sum() + noise

    return float(np.log2(user.sum() + noise) - np.log2(interference0)
                 - (interference + noise - interference0) / (LN2 * interference0)
                 - (eve.sum() + noise - leakage0) / (LN2 * leakage0)
                 - np.log2(leakage0) + np.log2(eve.sum() - eve[k] + noise))


def sensing_matrix(w, channels: ChannelState, cfg: ScenarioConfig, slot, gamma=None) -> np.ndarray:
    """L with tr(L sum_j F_j) + gamma * noise <= 0 equivalent to the sensing constraint
    :param gamma: threshold, defaults to `cfg.gamma_th`
    """
    if gamma is None:
        gamma = cfg.gamma_th
    chi_e = channels.chi_e(slot)
    a = channels.zeta[slot] * chi_e * np.vdot(chi_e, w)
    b = channels.h_si[slot].conj().T @ w
    return gamma * np.outer(b, b.conj()) - np.outer(a, a.conj())


def build_txbf_problem(F_anchor: CovarianceSet, w, channels: ChannelState,
                       cfg: ScenarioConfig, slot) -> conic.ConicProblem:
    """Assemble the relaxed beamforming program of one slot

    Covariances are optimized as F_j = P_max X_j with X_j embedded in real
    2M x 2M PSD variables; received powers are normalized by the noise power.
    """
    K, M = cfg.K, cfg.M
    noise = channels.noise_power
    prob = conic.ConicProblem('txbf[%d]' % slot)

    z = [prob.psd_variable('Z%d' % j, 2 * M, meta=(slot, 'jamming' if j == K else 'user %d' % j))
         for j in range(K + 1)]

    prob.add_constraint(sum(0.5 * cp.trace(zj) for zj in z) <= 1.0)

    h = channels.h(slot)
    gains = [cfg.p_max / noise * np.outer(hi, hi.conj()) for hi in h]
    anchor = np.array([[_quad(hi, mat) / noise for mat in F_anchor.matrices] for hi in h])
    received = [[conic.hermitian_inner(g, zj) for zj in z] for g in gains]

    eve_total = sum(received[K])
    leakage0 = anchor[K].sum() + 1.0
    for k in range(K):
        user_total = sum(received[k])
        user_interf = sum(received[k][j] for j in range(K + 1) if j != k)
        eve_interf = sum(received[K][j] for j in range(K + 1) if j != k)

        signal0 = anchor[k].sum() + 1.0
        interference0 = signal0 - anchor[k, k]
        jam0 = leakage0 - anchor[K, k]

        prob.add_log(1.0 / LN2, (user_total + 1.0) / signal0)
        prob.add_log(1.0 / LN2, (eve_interf + 1.0) / jam0)
        prob.add_linear(-(user_interf + 1.0 - interference0) / (LN2 * interference0))
        prob.add_linear(-(eve_total + 1.0 - leakage0) / (LN2 * leakage0))
        prob.add_constant(math.log2(signal0) - math.log2(interference0)
                          - math.log2(leakage0) + math.log2(jam0))

    if cfg.gamma_th > 0:
        lhs = cfg.p_max / noise * sensing_matrix(w, channels, cfg, slot)
        scale = max(np.abs(lhs).max(), cfg.gamma_th)
        prob.add_constraint(
            sum(conic.hermitian_inner(lhs / scale, zj) for zj in z) <= -cfg.gamma_th / scale)
    return prob


def _project_psd(mat) -> np.ndarray:
    mat = (mat + mat.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.maximum(vals, 0.0)) @ vecs.conj().T


def _sensing_excess(matrices, L, gamma, noise) -> float:
    """-(tr(L sum_j F_j) + gamma noise), nonnegative when the threshold is met"""
    return -(float(np.real(np.trace(L @ matrices.sum(axis=0)))) + gamma * noise)


def _restore_sensing(matrices, F_anchor: CovarianceSet, w, channels: ChannelState,
                     cfg: ScenarioConfig, slot) -> np.ndarray:
    """Pull covariances back towards a sensing-feasible reference

    The sensing constraint is affine in the covariances, so the point of the
    segment meeting it with equality has a closed form. The reference is the
    anchor when it qualifies, otherwise the whole budget on the covariance of
    the last entity along the best sensing direction.
    """
    noise = channels.noise_power
    strict = cfg.gamma_th * (1.0 + SENSING_MARGIN)
    L = sensing_matrix(w, channels, cfg, slot, gamma=strict)
    excess = _sensing_excess(matrices, L, strict, noise)
    if excess >= 0.0:
        return matrices

    references = [(F_anchor.matrices, strict), (F_anchor.matrices, cfg.gamma_th)]
    _, vecs = np.linalg.eigh(-(L + L.conj().T) / 2.0)
    best = np.zeros_like(matrices)
    best[-1] = cfg.p_max * np.outer(vecs[:, -1], vecs[:, -1].conj())
    references.append((best, strict))

    for reference, gamma in references:
        L = sensing_matrix(w, channels, cfg, slot, gamma=gamma)
        reference_excess = _sensing_excess(reference, L, gamma, noise)
        if reference_excess > 0.0:
            excess = _sensing_excess(matrices, L, gamma, noise)
            if excess >= 0.0:
                return matrices
            theta = reference_excess / (reference_excess - excess)
            LOG.debug("slot %d: covariances moved %.3g of the way back to meet sensing",
                      slot, 1.0 - theta)
            return theta * matrices + (1.0 - theta) * reference

    LOG.debug("slot %d: no sensing-feasible reference, covariances kept", slot)
    return matrices


def solve_txbf_step(F_anchor: CovarianceSet, w, channels: ChannelState, cfg: ScenarioConfig,
                    slot, solver=None, tol=None, dump=None) -> CovarianceSet:
    """Maximize the summed secrecy surrogate of one slot over covariances

    The solver output is projected onto the PSD cone and the power budget, then
    moved back towards a feasible reference if it misses the sensing threshold.

    :param F_anchor: Taylor anchor, feasible covariances of the slot
    :param w: receive filter of the slot
    :raises: ProblemInfeasible with the slot index, SolverError
    """
    prob = build_txbf_problem(F_anchor, w, channels, cfg, slot)
    if dump:
        prob.dump(dump)
    solution = conic.solve(prob, tol=tol or cfg.solver_tol, solver=solver or cfg.solver,
                           slot=slot)

    matrices = np.array([_project_psd(cfg.p_max * conic.recover_hermitian(solution.values['Z%d' % j]))
                         for j in range(cfg.K + 1)])
    power = float(np.real(np.trace(matrices.sum(axis=0))))
    if power > cfg.p_max:
        matrices *= cfg.p_max / power
    if cfg.gamma_th > 0:
        matrices = _restore_sensing(matrices, F_anchor, w, channels, cfg, slot)
    return CovarianceSet(matrices, slot=slot)


@dataclasses.dataclass
class ExtractionResult:
    f: np.ndarray
    "beams of the slot, (K+1, M)"
    rho: float
    sensing_sinr: float
    w: np.ndarray
    "receive filter the sensing SINR was evaluated with"
    eigen_ratio: np.ndarray
    "lambda_max / trace of every covariance"
    flagged: bool


def extract_rank1(F: CovarianceSet, w, channels: ChannelState, cfg: ScenarioConfig,
                  slot) -> ExtractionResult:
    """Principal-eigenvector beams scaled for power and sensing feasibility

    A common factor rho starts at min(1, sqrt(P_max / sum lambda_max)); when the
    sensing SINR falls short it is raised to the smallest value meeting the
    threshold, never beyond the power budget. If the budget is not enough with
    `w`, the filter is re-matched to the extracted beams first. The slot is
    flagged when no factor exists even then.
    """
    beams, ratio = [], []
    for mat in F.matrices:
        vals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2.0)
        lam = max(vals[-1], 0.0)
        beams.append(math.sqrt(lam) * vecs[:, -1])
        trace = float(np.sum(np.maximum(vals, 0.0)))
        ratio.append(lam / trace if trace > 0 else 1.0)
    beams = np.array(beams)

    total = float(np.sum(np.abs(beams) ** 2))
    cap = math.sqrt(cfg.p_max / total) if total > 0 else 1.0
    rho = min(1.0, cap)

    chi_e, zeta, h_si = channels.chi_e(slot), channels.zeta[slot], channels.h_si[slot]
    noise = channels.noise_power
    w = np.asarray(w, dtype=complex)
    echo, leak = sensing_terms(beams, w, chi_e, zeta, h_si, 0.0)

    def sinr(r):
        return r * r * echo / (r * r * leak + noise)

    def required_scale():
        margin = echo - cfg.gamma_th * leak
        if margin <= 0:
            return math.inf
        return math.sqrt(cfg.gamma_th * noise / margin) * (1.0 + 1e-9)

    flagged = False
    if cfg.gamma_th > 0 and sinr(rho) < cfg.gamma_th:
        needed = required_scale()
        if needed > cap:
            w = rx_filter_or_fallback(cap * beams, chi_e, zeta, h_si, noise)
            echo, leak = sensing_terms(beams, w, chi_e, zeta, h_si, 0.0)
            needed = required_scale()
        if needed <= cap:
            rho = max(rho, needed)
        else:
            rho = cap
            flagged = True
            LOG.debug("slot %d: sensing threshold unreachable after extraction", slot)

    return ExtractionResult(f=rho * beams, rho=rho, sensing_sinr=sinr(rho), w=w,
                            eigen_ratio=np.array(ratio), flagged=flagged)
