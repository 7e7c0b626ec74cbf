"""Tests for the block coordinate descent driver"""

import logging
import math
import os

import numpy as np
import pytest

from secure_isac.core.channel import channel_state
from secure_isac.core.exceptions import InfeasibleScenario
from secure_isac.core.metrics import BeamformerSet
from secure_isac.core.scenario import Trajectory, straight_line_trajectory
from secure_isac.manager import manager
from secure_isac.manager.manager import (BCDManager, ExceptionHandler, IterateRecord,
                                         relative_change)
from secure_isac.optim.txbf import mrt_beams


def test_relative_change():
    assert relative_change(1.0, 0.0) == 1.0
    assert relative_change(2.0, 1.5) == 0.25
    assert relative_change(0.0, 0.0) == 0.0


def test_iterate_record():
    record = IterateRecord(3, solves=7)
    assert record.iteration == 3
    assert record['solves'] == 7
    with pytest.raises(AttributeError):
        record.missing


def test_exception_handler(caplog):
    caplog.set_level(logging.DEBUG, logger='secure-isac')
    try:
        raise ValueError("boom")
    except ValueError as exc:
        info = (type(exc), exc, exc.__traceback__)

    ExceptionHandler(debug=False)(*info)
    assert "ValueError: boom" in caplog.text
    errors = [r for r in caplog.records if r.levelno == logging.ERROR]
    assert errors and errors[0].exc_info is None

    caplog.clear()
    ExceptionHandler(debug=True)(*info)
    assert caplog.records[-1].exc_info is not None
    assert "Traceback" in caplog.text


def test_unknown_scheme(small_cfg):
    with pytest.raises(ValueError, match="unknown scheme 'bogus'"):
        BCDManager(small_cfg).run('bogus')


def test_initial_point(small_cfg):
    trajectory, channels, beams = BCDManager(small_cfg).initial_point()
    assert trajectory == straight_line_trajectory(small_cfg)
    np.testing.assert_allclose(beams.power(), 0.99 ** 2 * small_cfg.p_max)
    np.testing.assert_allclose(np.linalg.norm(beams.w, axis=1), 1.0)

    _, channels, beams = BCDManager(small_cfg).initial_point('no-txbf')
    np.testing.assert_allclose(beams.f, mrt_beams(channels, small_cfg))


def test_unreachable_sensing_threshold(small_cfg):
    cfg = small_cfg.replace(gamma_th=1e30)
    with pytest.raises(InfeasibleScenario) as excinfo:
        BCDManager(cfg).initial_point()
    assert excinfo.value.slots == (0, 1, 2, 3, 4)
    assert "unreachable" in str(excinfo.value)


@pytest.mark.slow
def test_single_iteration(small_cfg):
    result = BCDManager(small_cfg.replace(epsilon=math.inf)).run()

    assert result.outer_iterations == 1
    assert result.converged
    record = result.log[0]
    assert record.txbf_passes == 1
    assert record.solves == 1 + small_cfg.slot_count + record.readapted
    assert result.solves == record.solves


@pytest.mark.slow
def test_proposed_run(small_cfg):
    result = BCDManager(small_cfg).run()

    rates = [result.initial_sum_secrecy_rate] + [r.sum_secrecy_rate for r in result.log]
    assert all(b >= a - 1e-9 for a, b in zip(rates, rates[1:]))
    assert result.sum_secrecy_rate == pytest.approx(rates[-1])
    assert result.outer_iterations <= small_cfg.max_outer_iters

    result.trajectory.validate(small_cfg)
    assert np.all(result.beams.power() <= small_cfg.p_max * (1.0 + 1e-9))
    assert result.flagged_slots == []
    assert result.status == 'optimal'
    assert np.all(result.sensing_sinr >= small_cfg.gamma_th * (1.0 - 1e-6))
    assert result.slot_rates.sum() == pytest.approx(result.sum_secrecy_rate)
    assert result.eigen_ratio.shape == (5, 3)
    assert result.min_eve_distance() == pytest.approx(
        result.trajectory.distances_to(small_cfg.eavesdropper).min())


@pytest.mark.slow
def test_without_trajectory_optimization(small_cfg):
    result = BCDManager(small_cfg).run_baseline_no_trajectory()

    assert result.scheme == 'no-traj'
    assert result.trajectory == straight_line_trajectory(small_cfg)
    assert all(r.statuses['trajectory'] == 'skipped' for r in result.log)
    assert result.sum_secrecy_rate >= result.initial_sum_secrecy_rate - 1e-9


@pytest.mark.slow
def test_without_beamforming_optimization(small_cfg):
    cfg = small_cfg.replace(gamma_th=0.0)
    result = BCDManager(cfg).run_baseline_no_txbf()

    assert result.scheme == 'no-txbf'
    assert all(r.txbf_passes == 0 for r in result.log)
    np.testing.assert_allclose(result.beams.power(), cfg.p_max)
    assert np.all(np.isnan(result.eigen_ratio))
    result.trajectory.validate(cfg)


@pytest.mark.slow
def test_hovering_keeps_position(small_cfg):
    cfg = small_cfg.replace(q0=(30.0, 20.0), qf=(30.0, 20.0), v_max=0.0)
    result = BCDManager(cfg).run()

    np.testing.assert_array_equal(result.trajectory.points, np.tile([30.0, 20.0], (5, 1)))
    assert result.sum_secrecy_rate >= result.initial_sum_secrecy_rate - 1e-9


@pytest.mark.slow
def test_deterministic(small_cfg):
    cfg = small_cfg.replace(max_outer_iters=2)
    first, second = BCDManager(cfg).run(), BCDManager(cfg).run()

    np.testing.assert_array_equal(first.trajectory.points, second.trajectory.points)
    np.testing.assert_array_equal(first.beams.f, second.beams.f)
    assert first.sum_secrecy_rate == second.sum_secrecy_rate


@pytest.mark.slow
def test_problem_dumps_and_nlos(small_cfg, tmp_path):
    cfg = small_cfg.replace(epsilon=math.inf, evaluate_with_nlos=2)
    result = manager.run(cfg, dump_dir=str(tmp_path / 'dumps'))

    names = sorted(os.listdir(str(tmp_path / 'dumps')))
    assert 'iter01_trajectory.txt' in names
    assert 'iter01_pass0_txbf_000.txt' in names
    assert result.nlos_sum_secrecy_rate is not None
    assert math.isfinite(result.nlos_sum_secrecy_rate)


@pytest.mark.slow
def test_print_summary(small_cfg, caplog):
    caplog.set_level(logging.INFO, logger='secure-isac')
    manager_ = BCDManager(small_cfg.replace(epsilon=math.inf))
    manager_.print_summary(manager_.run())

    assert "SENS [dB]" in caplog.text
    assert "sum secrecy rate:" in caplog.text


@pytest.mark.slow
def test_desk_scenario(desk_cfg):
    result = BCDManager(desk_cfg).run()

    assert desk_cfg.slot_count == 20
    assert result.converged
    assert result.outer_iterations <= 15
    rates = [r.sum_secrecy_rate for r in result.log]
    assert all(b >= a - 1e-6 for a, b in zip(rates, rates[1:]))
    assert np.all(result.beams.power() <= desk_cfg.p_max * (1.0 + 1e-9))
    np.testing.assert_allclose(np.linalg.norm(result.beams.w, axis=1), 1.0, atol=1e-12)


def test_moved_beams_keep_amplitudes(small_cfg):
    manager_ = BCDManager(small_cfg)
    trajectory, channels, beams = manager_.initial_point()
    beams = BeamformerSet(f=0.5 * beams.f, w=beams.w)
    moved = channel_state(small_cfg, Trajectory(trajectory.points + [2.0, -1.0]))

    tracked = manager_._beams_at('proposed', channels, moved, beams)
    np.testing.assert_allclose(np.abs(np.einsum('nim,njm->nij', moved.chi.conj(), tracked.f)),
                               np.abs(np.einsum('nim,njm->nij', channels.chi.conj(), beams.f)),
                               atol=1e-9)
    assert np.all(tracked.power() <= small_cfg.p_max * (1.0 + 1e-9))

    np.testing.assert_allclose(manager_._beams_at('no-txbf', channels, moved, beams).f,
                               mrt_beams(moved, small_cfg))


@pytest.mark.slow
def test_baselines_do_not_beat_the_full_run(desk_cfg):
    manager_ = BCDManager(desk_cfg)
    proposed = manager_.run()

    assert proposed.sum_secrecy_rate >= manager_.run_baseline_no_trajectory().sum_secrecy_rate - 1e-6
    assert proposed.sum_secrecy_rate >= manager_.run_baseline_no_txbf().sum_secrecy_rate - 1e-6
    assert proposed.flagged_slots == []
    assert np.all(proposed.sensing_sinr >= desk_cfg.gamma_th * (1.0 - 1e-6))


@pytest.mark.slow
def test_relaxation_is_tight(desk_cfg):
    result = BCDManager(desk_cfg).run()
    assert np.nanmedian(result.eigen_ratio) >= 0.95
