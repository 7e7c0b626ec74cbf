"""Secure ISAC Manager - block coordinate descent over trajectory and beams"""

import dataclasses
import logging
import os
import sys
import time
from typing import Optional

import numpy as np

from secure_isac.core.channel import ChannelState, channel_state
from secure_isac.core.exceptions import InfeasibleScenario, SolverError
from secure_isac.core.metrics import (BeamformerSet, nlos_sum_secrecy_rate, sensing_sinrs,
                                      sensing_terms, slot_secrecy_rate, slot_secrecy_rates,
                                      sum_secrecy_rate)
from secure_isac.core.scenario import ScenarioConfig, Trajectory, straight_line_trajectory
from secure_isac.optim.rx_beamform import rx_filter_or_fallback, rx_filters
from secure_isac.optim.trajectory import (blend, compute_step_coefficients,
                                          max_feasible_fraction, solve_trajectory_step)
from secure_isac.optim.txbf import (CovarianceSet, extract_rank1, mrt_beams,
                                    solve_txbf_step, track_beams)


LOG = logging.getLogger('secure-isac.manager')

SCHEMES = ('proposed', 'no-traj', 'no-txbf')

TRAJECTORY_BACKTRACK = 6
"Halvings of the trajectory step before the incumbent is kept"

JAMMING_GRID = 20
"Power fractions tried when moving user power to the jamming beam"

SENSING_RTOL = 1e-6

TRAJECTORY_MIN_GAIN = 1e-6
"Relative sum-rate gain a trajectory candidate needs to be accepted"


class ExceptionHandler:
    """Exception hook that shows a traceback only in debug mode"""

    def __init__(self, debug=True):
        """
        :param debug: log the full traceback, bool
        """
        self.debug = debug
        self.debug_hook = sys.excepthook

    def __call__(self, exc_type, exc, exc_tb):
        if self.debug:
            LOG.exception(exc, exc_info=(exc_type, exc, exc_tb))
        else:
            LOG.debug(exc, exc_info=(exc_type, exc, exc_tb))
            LOG.error("%s: %s", exc_type.__name__, exc)


class IterateRecord(dict):
    """Log entry of one outer iteration

    Keys are available as attributes as well.
    """

    def __init__(self, iteration: int, **fields):
        super(IterateRecord, self).__init__(iteration=iteration, **fields)

    def __getattr__(self, name):
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name)


@dataclasses.dataclass
class RunResult:
    scheme: str
    cfg: ScenarioConfig
    trajectory: Trajectory
    beams: BeamformerSet
    log: list
    "IterateRecord per outer iteration"
    initial_sum_secrecy_rate: float
    sum_secrecy_rate: float
    slot_rates: np.ndarray
    sensing_sinr: np.ndarray
    eigen_ratio: np.ndarray
    "lambda_max / trace of the last solved covariances, (N_t, K+1), nan if never solved"
    converged: bool
    flagged_slots: list
    total_time: float
    nlos_sum_secrecy_rate: Optional[float] = None

    @property
    def outer_iterations(self) -> int:
        return len(self.log)

    @property
    def txbf_passes(self) -> int:
        return sum(r.txbf_passes for r in self.log)

    @property
    def solves(self) -> int:
        return sum(r.solves for r in self.log)

    @property
    def status(self) -> str:
        return 'flagged' if self.flagged_slots else 'optimal'

    def min_eve_distance(self) -> float:
        """Smallest horizontal UAV-eavesdropper distance along the trajectory, meters"""
        return float(self.trajectory.distances_to(self.cfg.eavesdropper).min())


def relative_change(current, previous) -> float:
    return abs(current - previous) / max(current, 1e-12)


class BCDManager:
    """Alternate trajectory, receive filter and transmit beam updates"""

    def __init__(self, cfg: ScenarioConfig, dump_dir=None):
        """
        :param cfg: scenario
        :param dump_dir: directory receiving text dumps of every conic program
        """
        self.cfg = cfg
        self.dump_dir = dump_dir
        if dump_dir:
            os.makedirs(dump_dir, exist_ok=True)

    # Helpers
    # -------

    def _dump_path(self, *parts) -> Optional[str]:
        if not self.dump_dir:
            return None
        return os.path.join(self.dump_dir, '_'.join(str(p) for p in parts) + '.txt')

    def _sensing_shortfall(self, channels: ChannelState, beams: BeamformerSet) -> np.ndarray:
        """Mask of slots where the sensing SINR is below the threshold"""
        if self.cfg.gamma_th == 0:
            return np.zeros(channels.slot_count, dtype=bool)
        return sensing_sinrs(channels, beams) < self.cfg.gamma_th * (1.0 - SENSING_RTOL)

    def _beams_at(self, scheme, channels: ChannelState, moved: ChannelState,
                  beams: BeamformerSet) -> BeamformerSet:
        """Beams to use after the UAV moved from `channels` to `moved`

        MRT follows the channel for `no-txbf`; optimized beams are tracked so
        that every node keeps its received amplitudes.
        """
        if scheme == 'no-txbf':
            f = mrt_beams(moved, self.cfg)
        else:
            f = track_beams(beams.f, channels.chi, moved.chi, self.cfg.p_max)
        return BeamformerSet(f=f, w=rx_filters(moved, f))

    def _adapt_sensing(self, iteration, channels: ChannelState, beams: BeamformerSet,
                       exempt, record) -> Optional[BeamformerSet]:
        """Re-solve the beams of slots that a move left below the sensing threshold

        :param exempt: mask of slots allowed to stay short
        :returns: adapted beams, or None when some slot cannot be repaired
        """
        short = np.flatnonzero(self._sensing_shortfall(channels, beams) & ~exempt)
        for n in short:
            record['solves'] += 1
            record['readapted'] += 1
            try:
                covariances = solve_txbf_step(
                    CovarianceSet.from_beams(beams.f[n], slot=n), beams.w[n], channels,
                    self.cfg, n, dump=self._dump_path('iter%02d' % iteration, 'adapt', '%03d' % n))
            except SolverError as exc:
                LOG.debug("slot %d cannot follow the trajectory candidate: %s", n, exc)
                return None
            extracted = extract_rank1(covariances, beams.w[n], channels, self.cfg, n)
            beams.f[n] = extracted.f
            beams.w[n] = rx_filter_or_fallback(extracted.f, channels.chi_e(n), channels.zeta[n],
                                               channels.h_si[n], channels.noise_power)
            if self._sensing_shortfall_slot(channels, beams, n):
                LOG.debug("slot %d stays below the sensing threshold after re-adaptation", n)
                return None
        return beams

    def initial_point(self, scheme='proposed'):
        """Straight line, scaled MRT beams and matched receive filters

        For the optimized-beam schemes, slots missing the sensing threshold get
        part of the user power moved to the jamming beam.

        :returns: (Trajectory, ChannelState, BeamformerSet)
        :raises: InfeasibleScenario naming the slots that stay below threshold
        """
        trajectory = straight_line_trajectory(self.cfg)
        channels = channel_state(self.cfg, trajectory)
        if scheme == 'no-txbf':
            f = mrt_beams(channels, self.cfg)
        else:
            f = mrt_beams(channels, self.cfg, scale=self.cfg.initial_beam_scale)
            f = self._repair_sensing(channels, f)
        return trajectory, channels, BeamformerSet(f=f, w=rx_filters(channels, f))

    def _repair_sensing(self, channels: ChannelState, f) -> np.ndarray:
        cfg = self.cfg
        beams = BeamformerSet(f=f, w=rx_filters(channels, f))
        short = np.flatnonzero(self._sensing_shortfall(channels, beams))
        failed = []
        for n in short:
            eve = channels.h(n)[-1]
            direction = eve / np.linalg.norm(eve)
            user_power = float(np.sum(np.abs(f[n, :-1]) ** 2))
            jam_power = float(np.sum(np.abs(f[n, -1]) ** 2))

            for fraction in np.linspace(0.0, 1.0, JAMMING_GRID + 1)[1:]:
                trial = f[n].copy()
                trial[:-1] *= np.sqrt(1.0 - fraction)
                trial[-1] = np.sqrt(jam_power + fraction * user_power) * direction
                w = rx_filter_or_fallback(trial, channels.chi_e(n), channels.zeta[n],
                                          channels.h_si[n], channels.noise_power)
                num, den = sensing_terms(trial, w, channels.chi_e(n), channels.zeta[n],
                                         channels.h_si[n], channels.noise_power)
                if num / den >= cfg.gamma_th:
                    LOG.debug("slot %d: %.0f%% of the user power moved to jamming",
                              n, 100 * fraction)
                    f[n] = trial
                    break
            else:
                failed.append(int(n))

        if failed:
            raise InfeasibleScenario(
                "sensing threshold %.4g unreachable at the initial point in slot(s) %s"
                % (cfg.gamma_th, ', '.join(str(n) for n in failed)), slots=failed)
        return f

    # Blocks
    # ------

    def _trajectory_block(self, scheme, iteration, trajectory, channels, beams, record):
        """One trajectory step with backtracking; falls back to the incumbent

        With optimized beams the step only sees the budget limit of the sensing
        constraint; candidates are judged after tracking the beams and
        re-solving the slots left below the threshold. A candidate must gain
        more than solver noise.
        """
        cfg = self.cfg
        rate = sum_secrecy_rate(channels, beams)
        required = rate + TRAJECTORY_MIN_GAIN * max(abs(rate), 1.0)
        short = self._sensing_shortfall(channels, beams)
        adaptive = scheme != 'no-txbf'

        coeffs = compute_step_coefficients(beams.f, beams.w, channels, trajectory, cfg,
                                           sensing_disk='budget' if adaptive else 'beams')
        # Slots already below threshold are only required not to get worse
        coeffs.sensing_bound[short] = np.inf

        record['solves'] += 1
        try:
            step = solve_trajectory_step(trajectory, coeffs, cfg,
                                         dump=self._dump_path('iter%02d' % iteration, 'trajectory'))
        except SolverError as exc:
            LOG.warning("trajectory step failed, keeping the incumbent: %s", exc)
            record['statuses']['trajectory'] = exc.status
            return trajectory, channels, beams
        record['statuses']['trajectory'] = step.status

        t = max_feasible_fraction(trajectory, step.trajectory, cfg)
        for _ in range(TRAJECTORY_BACKTRACK + 1):
            if t <= 0.0:
                break
            candidate = blend(trajectory, step.trajectory, t)
            cand_channels = channel_state(cfg, candidate)
            cand_beams = self._beams_at(scheme, channels, cand_channels, beams)
            if adaptive:
                cand_beams = self._adapt_sensing(iteration, cand_channels, cand_beams, short, record)
            if cand_beams is not None:
                cand_short = self._sensing_shortfall(cand_channels, cand_beams)
                cand_rate = sum_secrecy_rate(cand_channels, cand_beams)
                if cand_rate >= required and not np.any(cand_short & ~short):
                    record['trajectory_step'] = t
                    LOG.debug("trajectory accepted with step %.4g: %.6g -> %.6g",
                              t, rate, cand_rate)
                    return candidate, cand_channels, cand_beams
            t /= 2.0

        LOG.debug("no trajectory improvement, keeping the incumbent")
        return trajectory, channels, beams

    def _txbf_block(self, iteration, channels, beams: BeamformerSet, record, eigen_ratio):
        """Inner transmit beamforming passes with per-slot incumbent acceptance"""
        cfg = self.cfg
        beams = beams.copy()
        rate = sum_secrecy_rate(channels, beams)

        for inner in range(cfg.txbf_inner_iters):
            accepted = 0
            for n in range(channels.slot_count):
                anchor = CovarianceSet.from_beams(beams.f[n], slot=n)
                record['solves'] += 1
                try:
                    covariances = solve_txbf_step(
                        anchor, beams.w[n], channels, cfg, n,
                        dump=self._dump_path('iter%02d' % iteration, 'pass%d' % inner,
                                             'txbf', '%03d' % n))
                except SolverError as exc:
                    LOG.debug("beamforming step skipped: %s", exc)
                    record['statuses']['txbf'][exc.status] = \
                        record['statuses']['txbf'].get(exc.status, 0) + 1
                    continue
                record['statuses']['txbf']['optimal'] = \
                    record['statuses']['txbf'].get('optimal', 0) + 1

                extracted = extract_rank1(covariances, beams.w[n], channels, cfg, n)
                eigen_ratio[n] = extracted.eigen_ratio
                if extracted.flagged:
                    LOG.warning("slot %d: rank-1 beams miss the sensing threshold, "
                                "keeping the incumbent", n)
                    record['extraction_flags'].append(n)
                    continue

                previous_f, previous_w = beams.f[n].copy(), beams.w[n].copy()
                previous_rate = slot_secrecy_rate(channels, beams, n)
                beams.f[n] = extracted.f
                beams.w[n] = rx_filter_or_fallback(extracted.f, channels.chi_e(n),
                                                   channels.zeta[n], channels.h_si[n],
                                                   channels.noise_power)
                feasible = not self._sensing_shortfall_slot(channels, beams, n)
                if feasible and slot_secrecy_rate(channels, beams, n) >= previous_rate:
                    accepted += 1
                else:
                    beams.f[n], beams.w[n] = previous_f, previous_w

            record['txbf_passes'] += 1
            record['txbf_accepted'] += accepted
            new_rate = sum_secrecy_rate(channels, beams)
            LOG.debug("beamforming pass %d: %d slot(s) improved, %.6g -> %.6g",
                      inner + 1, accepted, rate, new_rate)
            converged = relative_change(new_rate, rate) <= cfg.epsilon
            rate = new_rate
            if converged:
                break
        return beams

    def _sensing_shortfall_slot(self, channels, beams, n) -> bool:
        if self.cfg.gamma_th == 0:
            return False
        num, den = sensing_terms(beams.f[n], beams.w[n], channels.chi_e(n), channels.zeta[n],
                                 channels.h_si[n], channels.noise_power)
        return num / den < self.cfg.gamma_th * (1.0 - SENSING_RTOL)

    # Driver
    # ------

    def run(self, scheme='proposed') -> RunResult:
        """Run the alternating optimization for `scheme`
        :param scheme: 'proposed', 'no-traj' (straight line kept) or
            'no-txbf' (MRT beams kept)
        :returns: RunResult holding the best iterate and the iteration log
        :raises: InfeasibleScenario
        """
        if scheme not in SCHEMES:
            raise ValueError("unknown scheme '%s', choose from %s" % (scheme, ', '.join(SCHEMES)))
        cfg = self.cfg
        start = time.perf_counter()

        trajectory, channels, beams = self.initial_point(scheme)
        initial_rate = sum_secrecy_rate(channels, beams)
        LOG.info("[%s] initial sum secrecy rate %.6g bit/s/Hz", scheme, initial_rate)

        eigen_ratio = np.full((cfg.slot_count, cfg.K + 1), np.nan)
        log = []
        previous, converged = 0.0, False
        for iteration in range(1, cfg.max_outer_iters + 1):
            record = IterateRecord(iteration, solves=0, txbf_passes=0, txbf_accepted=0,
                                   readapted=0, trajectory_step=0.0, extraction_flags=[],
                                   statuses={'trajectory': 'skipped', 'txbf': {}},
                                   time={})

            tick = time.perf_counter()
            if scheme != 'no-traj':
                trajectory, channels, beams = self._trajectory_block(
                    scheme, iteration, trajectory, channels, beams, record)
            record['time']['trajectory'] = time.perf_counter() - tick

            tick = time.perf_counter()
            beams = BeamformerSet(f=beams.f, w=rx_filters(channels, beams.f))
            record['time']['rx'] = time.perf_counter() - tick

            tick = time.perf_counter()
            if scheme != 'no-txbf':
                beams = self._txbf_block(iteration, channels, beams, record, eigen_ratio)
            record['time']['txbf'] = time.perf_counter() - tick

            rate = sum_secrecy_rate(channels, beams)
            sinr = sensing_sinrs(channels, beams)
            record.update(sum_secrecy_rate=rate,
                          sensing_sinr=sinr.tolist(),
                          min_sensing_sinr=float(sinr.min()),
                          min_eve_distance=float(trajectory.distances_to(cfg.eavesdropper).min()))
            log.append(record)

            LOG.info("[%s] iteration %2d: R_sec %.6g, min sensing SINR %.2f dB, "
                     "trajectory step %.3g, beams improved in %d slot(s)",
                     scheme, iteration, rate, _db(record.min_sensing_sinr),
                     record.trajectory_step, record.txbf_accepted)

            converged = relative_change(rate, previous) <= cfg.epsilon
            previous = rate
            if converged:
                break

        flagged = np.flatnonzero(self._sensing_shortfall(channels, beams)).tolist()
        if flagged:
            LOG.warning("[%s] sensing threshold missed in slot(s) %s", scheme,
                        ', '.join(str(n) for n in flagged))

        result = RunResult(
            scheme=scheme, cfg=cfg, trajectory=trajectory, beams=beams, log=log,
            initial_sum_secrecy_rate=initial_rate,
            sum_secrecy_rate=sum_secrecy_rate(channels, beams),
            slot_rates=slot_secrecy_rates(channels, beams),
            sensing_sinr=sensing_sinrs(channels, beams),
            eigen_ratio=eigen_ratio, converged=converged, flagged_slots=flagged,
            total_time=time.perf_counter() - start)

        if cfg.evaluate_with_nlos:
            result.nlos_sum_secrecy_rate = nlos_sum_secrecy_rate(
                cfg, trajectory, beams, cfg.evaluate_with_nlos)
            LOG.info("[%s] mean sum secrecy rate over %d Rician draws: %.6g", scheme,
                     cfg.evaluate_with_nlos, result.nlos_sum_secrecy_rate)
        return result

    def run_baseline_no_trajectory(self) -> RunResult:
        return self.run('no-traj')

    def run_baseline_no_txbf(self) -> RunResult:
        return self.run('no-txbf')

    def print_summary(self, result: RunResult):
        """Log the final per-slot metrics as a table"""
        format_str = "{:>5} | {:>9} {:>9} | {:>10} | {:>10}"
        header_str = format_str.format("SLOT", "X [m]", "Y [m]", "SENS [dB]", "R_SEC")
        LOG.info(header_str)
        LOG.info("{:-<{len}}".format("", len=len(header_str)))
        for n, (x, y) in enumerate(result.trajectory.points):
            LOG.info(format_str.format(n, "%.2f" % x, "%.2f" % y,
                                       "%.2f" % _db(result.sensing_sinr[n]),
                                       "%.4f" % result.slot_rates[n]))
        LOG.info("{:-<{len}}".format("", len=len(header_str)))
        LOG.info("sum secrecy rate: %.6g bit/s/Hz after %d iteration(s)%s",
                 result.sum_secrecy_rate, result.outer_iterations,
                 "" if result.converged else " (not converged)")


def _db(value) -> float:
    return 10.0 * np.log10(value) if value > 0 else -np.inf


def run(cfg: ScenarioConfig, scheme='proposed', dump_dir=None) -> RunResult:
    return BCDManager(cfg, dump_dir=dump_dir).run(scheme)
