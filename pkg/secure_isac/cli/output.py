"""Artifact writers for runs and sweeps"""

import json
import logging
import math
import os

from abc import ABCMeta, abstractmethod

import numpy as np
import pandas as pd

from secure_isac.core.scenario import config_hash, scenario_to_dict


LOG = logging.getLogger('secure-isac.output')

FLOAT_FORMAT = '%.12g'


class Writer(metaclass=ABCMeta):
    """Callable storing one artifact at a path"""

    @abstractmethod
    def __call__(self, data, path):
        ...


class CsvWriter(Writer):
    def __init__(self, columns=None):
        """
        :param columns: fixed column order, list of str (default: order of the first row)
        """
        self.columns = columns

    def __call__(self, rows, path):
        """
        Write `rows` (list of dicts) with a header row
        :param rows: one dict per line
        :param path: target file
        """
        frame = pd.DataFrame(list(rows), columns=self.columns)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding='utf-8')
        LOG.debug("%d row(s) written to %s", len(frame), path)


class JsonWriter(Writer):
    def __call__(self, document, path):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(_plain(document), f, indent=2, sort_keys=True)
            f.write('\n')
        LOG.debug("document written to %s", path)


def _plain(value):
    """JSON-safe copy: numpy scalars and arrays unwrapped, non-finite floats as null"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def _db(value) -> float:
    return 10.0 * math.log10(value) if value > 0 else -math.inf


CONVERGENCE_COLUMNS = ['iteration', 'sum_secrecy_rate', 'min_sensing_sinr',
                       'min_sensing_sinr_db', 'min_eve_distance_m', 'trajectory_step',
                       'txbf_passes', 'txbf_accepted', 'solves']


def convergence_rows(result) -> list:
    return [{
        'iteration': record.iteration,
        'sum_secrecy_rate': record.sum_secrecy_rate,
        'min_sensing_sinr': record.min_sensing_sinr,
        'min_sensing_sinr_db': _db(record.min_sensing_sinr),
        'min_eve_distance_m': record.min_eve_distance,
        'trajectory_step': record.trajectory_step,
        'txbf_passes': record.txbf_passes,
        'txbf_accepted': record.txbf_accepted,
        'solves': record.solves,
    } for record in result.log]


def trajectory_rows(result) -> list:
    return [{'n': n, 'x': float(x), 'y': float(y)}
            for n, (x, y) in enumerate(result.trajectory.points)]


def beams_summary_columns(K) -> list:
    entities = ['user_%d' % k for k in range(K)] + ['jamming']
    return (['slot'] + ['power_%s' % e for e in entities] + ['total_power']
            + ['eigen_ratio_%s' % e for e in entities]
            + ['sensing_sinr_db', 'secrecy_rate'])


def beams_summary_rows(result) -> list:
    K = result.beams.K
    columns = beams_summary_columns(K)
    power = result.beams.entity_power()
    rows = []
    for n in range(len(power)):
        values = ([n] + power[n].tolist() + [float(power[n].sum())]
                  + result.eigen_ratio[n].tolist()
                  + [_db(result.sensing_sinr[n]), float(result.slot_rates[n])])
        rows.append(dict(zip(columns, values)))
    return rows


def result_document(result) -> dict:
    cfg = result.cfg
    timings = {block: sum(r.time.get(block, 0.0) for r in result.log)
               for block in ('trajectory', 'rx', 'txbf')}
    timings['total'] = result.total_time
    finite_ratio = result.eigen_ratio[np.isfinite(result.eigen_ratio)]
    return {
        'scheme': result.scheme,
        'status': result.status,
        'config_hash': config_hash(cfg),
        'seed': cfg.seed,
        'config': scenario_to_dict(cfg),
        'sum_secrecy_rate': result.sum_secrecy_rate,
        'initial_sum_secrecy_rate': result.initial_sum_secrecy_rate,
        'nlos_sum_secrecy_rate': result.nlos_sum_secrecy_rate,
        'nlos_draws': cfg.evaluate_with_nlos,
        'converged': result.converged,
        'outer_iterations': result.outer_iterations,
        'txbf_passes': result.txbf_passes,
        'solves': result.solves,
        'flagged_slots': result.flagged_slots,
        'min_eve_distance_m': result.min_eve_distance(),
        'min_sensing_sinr': float(result.sensing_sinr.min()),
        'median_eigen_ratio': float(np.median(finite_ratio)) if finite_ratio.size else None,
        'statuses': [r.statuses for r in result.log],
        'extraction_flags': [r.extraction_flags for r in result.log],
        'timings_s': timings,
    }


def write_run(result, directory):
    """Write every artifact of one run into `directory`"""
    os.makedirs(directory, exist_ok=True)
    CsvWriter(CONVERGENCE_COLUMNS)(convergence_rows(result),
                                   os.path.join(directory, 'convergence.csv'))
    CsvWriter(['n', 'x', 'y'])(trajectory_rows(result),
                               os.path.join(directory, 'trajectory.csv'))
    CsvWriter(beams_summary_columns(result.beams.K))(beams_summary_rows(result),
                                                     os.path.join(directory, 'beams_summary.csv'))
    JsonWriter()(result_document(result), os.path.join(directory, 'result.json'))
    LOG.info("artifacts written to %s", directory)


MISSION_TIME_COLUMNS = ['mission_time_s', 'scheme', 'sum_secrecy_rate', 'status',
                        'iterations', 'min_eve_distance_m']
THRESHOLD_COLUMNS = ['gamma_th', 'gamma_th_db', 'n', 'x', 'y', 'min_eve_distance_m', 'status']


def write_mission_time_sweep(rows, directory) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, 'secrecy_vs_T.csv')
    CsvWriter(MISSION_TIME_COLUMNS)(rows, path)
    return path


def write_threshold_sweep(rows, directory) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, 'trajectory_by_gamma.csv')
    CsvWriter(THRESHOLD_COLUMNS)(rows, path)
    return path
