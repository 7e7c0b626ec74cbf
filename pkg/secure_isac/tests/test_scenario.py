"""Tests for scenario loading, validation and trajectories"""

import json
import math

import numpy as np
import pytest

from secure_isac.core.exceptions import ConfigError
from secure_isac.core.scenario import (ScenarioConfig, Trajectory, config_hash, dump_scenario,
                                       load_scenario, load_scenario_file,
                                       straight_line_trajectory)


def test_defaults():
    cfg = load_scenario()

    assert cfg.altitude == 40.0
    assert cfg.v_max == 50.0
    assert cfg.K == 4
    assert cfg.M == 9
    assert cfg.slot_count == 80
    assert cfg.users == ((20.0, 60.0), (30.0, 30.0), (40.0, 55.0), (50.0, 30.0))
    assert cfg.eavesdropper == (20.0, 0.0)
    assert cfg.noise_power == pytest.approx(1e-14)
    assert cfg.beta0 == pytest.approx(1e-3)
    assert cfg.rician_k == 500.0


def test_units_are_converted(desk_document):
    cfg = load_scenario(desk_document)

    assert cfg.noise_power == pytest.approx(1e-14, rel=1e-12)
    assert cfg.beta0 == pytest.approx(1e-3, rel=1e-12)
    assert cfg.gamma_th == pytest.approx(10.0, rel=1e-12)
    assert cfg.si_power == pytest.approx(5e-7, rel=1e-12)
    assert cfg.slot_count == 20
    assert cfg.M == 4


def test_power_in_dbm():
    cfg = load_scenario({'p_max_dbm': 30.0})
    assert cfg.p_max == pytest.approx(1.0)


def test_self_interference_follows_power():
    assert ScenarioConfig().si_power == pytest.approx(5e-7, rel=1e-12)
    assert ScenarioConfig(p_max=1.0).si_power == pytest.approx(1e-7, rel=1e-12)
    assert ScenarioConfig(p_max=1.0, si_power=0.0).si_power == 0.0

    cfg = load_scenario({'p_max_w': 2.0, 'si_power_db': -60.0})
    assert cfg.si_power == pytest.approx(2e-6, rel=1e-12)
    assert load_scenario({'si_power_db': -60.0}, p_max=0.5).si_power == pytest.approx(5e-7)
    assert load_scenario({'si_power': 3e-9, 'p_max_w': 2.0}).si_power == 3e-9


def test_json_text_and_file(tmp_path, desk_document):
    path = tmp_path / 'desk.json'
    path.write_text(json.dumps(desk_document))

    assert load_scenario_file(str(path)) == load_scenario(json.dumps(desk_document))


def test_hovering_is_valid():
    cfg = load_scenario({'q0': [0, 0], 'qf': [0, 0], 'mission_time_s': 100.0})
    trajectory = straight_line_trajectory(cfg)

    assert np.all(trajectory.points == 0.0)
    assert trajectory.violations(cfg) == []


def test_unreachable_endpoint():
    with pytest.raises(ConfigError, match='endpoint unreachable'):
        load_scenario({'mission_time_s': 0.1})


def test_slot_count_mismatch():
    with pytest.raises(ConfigError, match='slot_count'):
        load_scenario({'slot_count': 10})


@pytest.mark.parametrize('document', [
    {'p_max_w': 0.0},
    {'users': []},
    {'altitude_m': -1.0},
    {'mx': 0},
    {'noise_power_w': -1e-14},
])
def test_invariant_violations(document):
    with pytest.raises(ConfigError, match='invariant violated'):
        load_scenario(document)


def test_quantity_in_two_units():
    with pytest.raises(ConfigError, match='more than one unit'):
        load_scenario({'p_max_w': 5.0, 'p_max_dbm': 37.0})


def test_unknown_key():
    with pytest.raises(ConfigError, match='altitude'):
        load_scenario({'altitude': 40.0})


def test_unparsable_text():
    with pytest.raises(ConfigError, match='cannot parse'):
        load_scenario('{"altitude_m": ')


def test_infinite_epsilon():
    cfg = load_scenario({'epsilon': 'inf', 'rician_k': 'inf'})
    assert math.isinf(cfg.epsilon)
    assert math.isinf(cfg.rician_k)


def test_solver_section():
    cfg = load_scenario({'solver': {'name': 'scs', 'tol': 1e-5}})
    assert cfg.solver == 'SCS'
    assert cfg.solver_tol == 1e-5

    with pytest.raises(ConfigError, match='unknown solver'):
        load_scenario({'solver': {'name': 'SCS', 'verbose': True}})


def test_dump_reloads_identically(desk_cfg):
    text = dump_scenario(desk_cfg)
    reloaded = load_scenario(text)

    assert reloaded == desk_cfg
    assert dump_scenario(reloaded) == text
    assert config_hash(reloaded) == config_hash(desk_cfg)


def test_config_hash_tracks_seed(desk_cfg):
    assert config_hash(desk_cfg) != config_hash(desk_cfg.replace(seed=1))


def test_replace_rederives_slot_count(desk_cfg):
    longer = desk_cfg.replace(mission_time=6.0)
    assert longer.slot_count == 30

    with pytest.raises(ConfigError, match='endpoint unreachable'):
        desk_cfg.replace(mission_time=0.2)


def test_literal_velocity_reach():
    # sqrt(0.05 * 50) per step
    cfg = load_scenario({'paper_literal_velocity': True})
    assert cfg.max_step() == pytest.approx(math.sqrt(2.5))


def test_straight_line_spacing():
    cfg = ScenarioConfig(q0=(0.0, 0.0), qf=(30.0, 40.0), mission_time=3.0, slot_len=0.5)
    trajectory = straight_line_trajectory(cfg)

    assert len(trajectory) == 6
    np.testing.assert_allclose(trajectory.steps(), 10.0)
    np.testing.assert_allclose(trajectory[0], [0.0, 0.0])
    np.testing.assert_allclose(trajectory[-1], [30.0, 40.0])


def test_straight_line_defaults():
    cfg = load_scenario()
    trajectory = straight_line_trajectory(cfg)

    np.testing.assert_allclose(trajectory.steps(), 50.0 / 79.0)
    assert trajectory.steps().max() <= cfg.speed_cap
    trajectory.validate(cfg)


def test_trajectory_violations(small_cfg):
    trajectory = straight_line_trajectory(small_cfg)
    points = trajectory.points.copy()
    points[2] += [15.0, 0.0]

    with pytest.raises(ValueError, match='speed limit'):
        Trajectory(points).validate(small_cfg)

    points = trajectory.points.copy()
    points[0] = [0.0, 0.0]
    assert any('q0' in p for p in Trajectory(points).violations(small_cfg))

    assert Trajectory(points[:3]).violations(small_cfg) == ["length 3 != N_t 5"]


def test_trajectory_shape():
    with pytest.raises(ValueError):
        Trajectory(np.zeros((4, 3)))
