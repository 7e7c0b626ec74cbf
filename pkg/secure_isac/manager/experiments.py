"""Experiments - parameter sweeps over mission time and sensing threshold"""

import concurrent.futures
import logging
import math
import os

from secure_isac.core.exceptions import ConfigError, InfeasibleScenario
from secure_isac.core.scenario import ScenarioConfig
from secure_isac.manager.manager import SCHEMES, BCDManager


LOG = logging.getLogger('secure-isac.experiments')


def _label(name, value, scheme) -> str:
    return "%s=%g_%s" % (name, value, scheme)


def _run_point(cfg: ScenarioConfig, scheme, label, out=None, writer=None, dump=None):
    """Run one sweep point
    :returns: (label, RunResult or None, reason it was skipped or None)
    """
    directory = os.path.join(out, label) if out else None
    dump_dir = os.path.join(dump, label) if dump else None
    try:
        result = BCDManager(cfg, dump_dir=dump_dir).run(scheme)
    except InfeasibleScenario as exc:
        LOG.warning("%s: %s", label, exc)
        return label, None, str(exc)
    if writer is not None and directory:
        writer(result, directory)
    return label, result, None


def _execute(points, jobs=1, out=None, writer=None, dump=None) -> dict:
    """Run (label, cfg, scheme) points, concurrently when `jobs` > 1
    :returns: {label: (RunResult or None, reason)}
    """
    outcomes = {}
    if jobs <= 1:
        for label, cfg, scheme in points:
            _, result, reason = _run_point(cfg, scheme, label, out, writer, dump)
            outcomes[label] = (result, reason)
        return outcomes

    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_point, cfg, scheme, label, out, writer, dump)
                   for label, cfg, scheme in points]
        for future in concurrent.futures.as_completed(futures):
            label, result, reason = future.result()
            outcomes[label] = (result, reason)
    return outcomes


def sweep_mission_time(cfg: ScenarioConfig, mission_times, schemes=SCHEMES, jobs=1,
                       out=None, writer=None, dump=None) -> list:
    """Sum secrecy rate of every scheme versus the mission time

    The slot length is kept and N_t re-derived for every T. Points whose
    endpoints are unreachable or whose initial point misses the sensing
    threshold give rows with status 'infeasible'.

    :param mission_times: mission durations, seconds
    :param writer: callable(result, directory) storing the artifacts of a point
    :returns: rows {mission_time_s, scheme, sum_secrecy_rate, status, ...} in input order
    """
    points, skipped = [], {}
    for T in mission_times:
        for scheme in schemes:
            label = _label('T', T, scheme)
            try:
                points.append((label, cfg.replace(mission_time=float(T)), scheme))
            except ConfigError as exc:
                LOG.warning("%s: %s", label, exc)
                skipped[label] = str(exc)

    outcomes = _execute(points, jobs=jobs, out=out, writer=writer, dump=dump)

    rows = []
    for T in mission_times:
        for scheme in schemes:
            label = _label('T', T, scheme)
            result, reason = outcomes.get(label, (None, skipped.get(label)))
            rows.append({
                'mission_time_s': float(T),
                'scheme': scheme,
                'sum_secrecy_rate': result.sum_secrecy_rate if result else math.nan,
                'status': result.status if result else 'infeasible',
                'iterations': result.outer_iterations if result else 0,
                'min_eve_distance_m': result.min_eve_distance() if result else math.nan,
            })
            if reason:
                LOG.debug("%s skipped: %s", label, reason)
    return rows


def sweep_sensing_threshold(cfg: ScenarioConfig, thresholds, scheme='proposed', jobs=1,
                            out=None, writer=None, dump=None) -> list:
    """Optimized trajectory for every sensing threshold
    :param thresholds: linear sensing SINR thresholds
    :returns: rows {gamma_th, gamma_th_db, n, x, y, min_eve_distance_m, status}, one per slot
    """
    points = [(_label('gamma', g, scheme), cfg.replace(gamma_th=float(g)), scheme)
              for g in thresholds]
    outcomes = _execute(points, jobs=jobs, out=out, writer=writer, dump=dump)

    rows = []
    for label, point_cfg, _ in points:
        result, _ = outcomes[label]
        gamma = point_cfg.gamma_th
        gamma_db = 10.0 * math.log10(gamma) if gamma > 0 else -math.inf
        if result is None:
            rows.append({'gamma_th': gamma, 'gamma_th_db': gamma_db, 'n': -1,
                         'x': math.nan, 'y': math.nan, 'min_eve_distance_m': math.nan,
                         'status': 'infeasible'})
            continue
        distance = result.min_eve_distance()
        for n, (x, y) in enumerate(result.trajectory.points):
            rows.append({'gamma_th': gamma, 'gamma_th_db': gamma_db, 'n': n,
                         'x': float(x), 'y': float(y), 'min_eve_distance_m': distance,
                         'status': result.status})
    return rows
