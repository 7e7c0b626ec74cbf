"""Scenario - configuration, geometry and time discretization"""

import dataclasses
import hashlib
import json
import logging
import math
from typing import Optional, Tuple

import numpy as np

from secure_isac.core.exceptions import ConfigError


LOG = logging.getLogger('secure-isac.scenario')

Point = Tuple[float, float]

SLOT_TOLERANCE = 1e-9
"Relative tolerance on N_t * slot_len == mission_time"

SPEED_TOLERANCE = 1e-9
"Absolute slack on the per-slot travel limit, meters"

SI_POWER_RELATIVE = 1e-7
"Default self-interference variance per entry, relative to p_max (-70 dB)"


def _db(value):
    return 10.0 ** (float(value) / 10.0)


def _dbm(value):
    return 10.0 ** ((float(value) - 30.0) / 10.0)


def _float(value):
    # JSON has no infinity literal in the strict grammar, accept the string form
    if isinstance(value, str):
        if value.lower() in ('inf', 'infinity', '+inf'):
            return math.inf
        raise ConfigError("expected a number, got %r" % value)
    if isinstance(value, bool):
        raise ConfigError("expected a number, got %r" % value)
    return float(value)


def _point(value) -> Point:
    try:
        x, y = value
        return float(x), float(y)
    except (TypeError, ValueError):
        raise ConfigError("expected a 2D point [x, y], got %r" % (value,))


def _points(value) -> Tuple[Point, ...]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError("expected a list of 2D points, got %r" % (value,))
    return tuple(_point(p) for p in value)


def _bool(value):
    if not isinstance(value, bool):
        raise ConfigError("expected true/false, got %r" % (value,))
    return value


# field -> {config key: converter to the internal linear unit}
_UNITS = {
    'users': {'users': _points},
    'eavesdropper': {'eavesdropper': _point},
    'altitude': {'altitude_m': _float},
    'mission_time': {'mission_time_s': _float},
    'slot_len': {'slot_len_s': _float},
    'slot_count': {'slot_count': int},
    'v_max': {'v_max_mps': _float},
    'p_max': {'p_max_w': _float, 'p_max_dbm': _dbm},
    'gamma_th': {'gamma_th': _float, 'gamma_th_db': _db},
    'noise_power': {'noise_power_w': _float, 'noise_power_dbm': _dbm},
    'beta0': {'beta0': _float, 'beta0_db': _db},
    'rician_k': {'rician_k': _float, 'rician_k_db': _db},
    'rcs': {'rcs_m2': _float},
    # si_power_db is relative to p_max
    'si_power': {'si_power': _float, 'si_power_db': _db},
    'mx': {'mx': int},
    'my': {'my': int},
    'q0': {'q0': _point},
    'qf': {'qf': _point},
    'epsilon': {'epsilon': _float},
    'seed': {'seed': int},
    'max_outer_iters': {'max_outer_iters': int},
    'txbf_inner_iters': {'txbf_inner_iters': int},
    'initial_beam_scale': {'initial_beam_scale': _float},
    'paper_literal_velocity': {'paper_literal_velocity': _bool},
    'paper_literal_sensing_gain': {'paper_literal_sensing_gain': _bool},
    'evaluate_with_nlos': {'evaluate_with_nlos': int},
}

# key used when emitting a config, always the linear one
_CANONICAL = {field: next(iter(keys)) for field, keys in _UNITS.items()}


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    """All physical and optimization constants of one scenario.

    Every quantity is stored in linear units (watts, linear gains, meters,
    seconds). Instances are validated on construction and immutable.
    """

    users: Tuple[Point, ...] = ((20.0, 60.0), (30.0, 30.0), (40.0, 55.0), (50.0, 30.0))
    eavesdropper: Point = (20.0, 0.0)
    altitude: float = 40.0
    mission_time: float = 4.0
    slot_len: float = 0.05
    slot_count: Optional[int] = None
    v_max: float = 50.0
    p_max: float = 5.0
    gamma_th: float = 10.0
    noise_power: float = 1e-14
    beta0: float = 1e-3
    rician_k: float = 500.0
    rcs: float = 0.1
    si_power: Optional[float] = None
    "per-entry variance of H_SI, None for SI_POWER_RELATIVE * p_max"
    mx: int = 3
    my: int = 3
    q0: Point = (20.0, 50.0)
    qf: Point = (50.0, 10.0)
    epsilon: float = 1e-3
    seed: int = 0
    max_outer_iters: int = 15
    txbf_inner_iters: int = 2
    initial_beam_scale: float = 0.99
    paper_literal_velocity: bool = False
    paper_literal_sensing_gain: bool = False
    evaluate_with_nlos: int = 0
    solver: str = 'CLARABEL'
    solver_tol: float = 1e-7

    def __post_init__(self):
        # Normalize containers so that equality and hashing are stable
        object.__setattr__(self, 'users', _points(self.users))
        object.__setattr__(self, 'eavesdropper', _point(self.eavesdropper))
        object.__setattr__(self, 'q0', _point(self.q0))
        object.__setattr__(self, 'qf', _point(self.qf))
        if self.slot_count is None:
            if not self.slot_len > 0:
                raise ConfigError("invariant violated: slot_len > 0")
            object.__setattr__(self, 'slot_count',
                               max(1, int(round(self.mission_time / self.slot_len))))
        if self.si_power is None:
            object.__setattr__(self, 'si_power', SI_POWER_RELATIVE * self.p_max)
        _validate(self)

    # Derived quantities
    # ------------------

    @property
    def K(self) -> int:
        """Number of ground users"""
        return len(self.users)

    @property
    def M(self) -> int:
        """Number of antenna elements of the planar array"""
        return self.mx * self.my

    @property
    def speed_cap(self) -> float:
        """Right-hand side of the per-slot travel constraint"""
        return self.slot_len * self.v_max

    @property
    def user_array(self) -> np.ndarray:
        return np.asarray(self.users, dtype=float)

    @property
    def eve_array(self) -> np.ndarray:
        return np.asarray(self.eavesdropper, dtype=float)

    def max_step(self) -> float:
        """Longest admissible horizontal move between consecutive slots, meters"""
        if self.paper_literal_velocity:
            return math.sqrt(self.speed_cap)
        return self.speed_cap

    def replace(self, **changes) -> 'ScenarioConfig':
        """Return a validated copy with `changes` applied

        The slot count is re-derived unless it is given explicitly.
        """
        if 'slot_count' not in changes and ({'mission_time', 'slot_len'} & set(changes)):
            changes['slot_count'] = None
        return dataclasses.replace(self, **changes)


def _validate(cfg: ScenarioConfig):
    """Check every invariant of the scenario
    :raises: ConfigError naming the violated invariant
    """
    def require(condition, invariant):
        if not condition:
            raise ConfigError("invariant violated: %s" % invariant)

    require(cfg.K >= 1, "K >= 1")
    for name in ('altitude', 'mission_time', 'slot_len', 'p_max', 'noise_power',
                 'beta0', 'rcs', 'epsilon', 'solver_tol'):
        value = getattr(cfg, name)
        require(value > 0 and not math.isnan(value), "%s > 0" % name)
    for name in ('gamma_th', 'si_power', 'rician_k', 'v_max'):
        value = getattr(cfg, name)
        require(value >= 0 and not math.isnan(value), "%s >= 0" % name)
    for name in ('altitude', 'mission_time', 'slot_len', 'p_max', 'noise_power',
                 'beta0', 'rcs', 'gamma_th', 'si_power', 'v_max'):
        require(math.isfinite(getattr(cfg, name)), "%s is finite" % name)
    require(cfg.mx >= 1 and cfg.my >= 1, "M = mx * my >= 1")
    require(cfg.slot_count >= 1, "slot_count >= 1")
    require(cfg.max_outer_iters >= 1, "max_outer_iters >= 1")
    require(cfg.txbf_inner_iters >= 1, "txbf_inner_iters >= 1")
    require(0 < cfg.initial_beam_scale <= 1, "0 < initial_beam_scale <= 1")
    require(cfg.evaluate_with_nlos >= 0, "evaluate_with_nlos >= 0")

    for p in cfg.users + (cfg.eavesdropper, cfg.q0, cfg.qf):
        require(all(math.isfinite(c) for c in p), "positions are finite")

    require(abs(cfg.slot_count * cfg.slot_len - cfg.mission_time)
            <= SLOT_TOLERANCE * cfg.mission_time,
            "slot_count * slot_len == mission_time "
            "(%d * %g != %g)" % (cfg.slot_count, cfg.slot_len, cfg.mission_time))

    distance = math.hypot(cfg.qf[0] - cfg.q0[0], cfg.qf[1] - cfg.q0[1])
    reach = (cfg.slot_count - 1) * cfg.max_step()
    require(distance <= reach + SPEED_TOLERANCE,
            "endpoint reachability |q0 - qf| <= (N_t - 1) * max step "
            "(endpoint unreachable: %.6g m > %.6g m)" % (distance, reach))


def load_scenario(source=None, **overrides) -> ScenarioConfig:
    """Parse and validate a scenario
    :param source: JSON text or an already parsed dict (None or '' for defaults)
    :param overrides: field values applied on top of the document, linear units
    :returns: ScenarioConfig
    :raises: ConfigError
    """
    if source is None or (isinstance(source, str) and not source.strip()):
        document = {}
    elif isinstance(source, dict):
        document = dict(source)
    else:
        try:
            document = json.loads(source)
        except ValueError as exc:
            raise ConfigError("cannot parse scenario: %s" % exc)
    if not isinstance(document, dict):
        raise ConfigError("scenario must be a JSON object")

    fields = {}
    solver = document.pop('solver', None)
    if solver is not None:
        if not isinstance(solver, dict):
            raise ConfigError("'solver' must be an object with 'name' and 'tol'")
        unknown = set(solver) - {'name', 'tol'}
        if unknown:
            raise ConfigError("unknown solver key(s): %s" % ', '.join(sorted(unknown)))
        if 'name' in solver:
            fields['solver'] = str(solver['name']).upper()
        if 'tol' in solver:
            fields['solver_tol'] = _float(solver['tol'])

    known = {key: field for field, keys in _UNITS.items() for key in keys}
    unknown = set(document) - set(known)
    if unknown:
        raise ConfigError("unknown scenario key(s): %s" % ', '.join(sorted(unknown)))

    for key, value in document.items():
        field = known[key]
        if field in fields:
            raise ConfigError("'%s' given in more than one unit" % field)
        try:
            fields[field] = _UNITS[field][key](value)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise ConfigError("%s: %s" % (key, exc))
            raise ConfigError("%s: cannot convert %r" % (key, value))

    fields.update(overrides)
    if 'si_power_db' in document and 'si_power' not in overrides:
        fields['si_power'] *= fields.get('p_max', ScenarioConfig.p_max)
    try:
        cfg = ScenarioConfig(**fields)
    except TypeError as exc:
        raise ConfigError(str(exc))

    LOG.debug("scenario loaded: K=%d M=%d N_t=%d", cfg.K, cfg.M, cfg.slot_count)
    return cfg


def load_scenario_file(path, **overrides) -> ScenarioConfig:
    with open(path, encoding='utf-8') as f:
        return load_scenario(f.read(), **overrides)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    """Canonical document of `cfg` in linear units"""
    document = {}
    for field, key in _CANONICAL.items():
        value = getattr(cfg, field)
        if field == 'users':
            value = [list(p) for p in value]
        elif isinstance(value, tuple):
            value = list(value)
        document[key] = value
    document['solver'] = {'name': cfg.solver, 'tol': cfg.solver_tol}
    return document


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Emit `cfg` as JSON; loading the output gives back an equal config"""
    return json.dumps(scenario_to_dict(cfg), sort_keys=True, indent=2)


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(dump_scenario(cfg).encode('utf-8')).hexdigest()


class Trajectory:
    """Horizontal UAV positions, one per time slot"""

    def __init__(self, points):
        """
        :param points: array-like of shape (N_t, 2), meters
        """
        points = np.array(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or len(points) == 0:
            raise ValueError("trajectory must have shape (N_t, 2), got %s" % (points.shape,))
        self.points = points

    def __len__(self):
        return len(self.points)

    def __getitem__(self, n):
        return self.points[n]

    def __eq__(self, other):
        return isinstance(other, Trajectory) and np.array_equal(self.points, other.points)

    def __repr__(self):
        return "Trajectory(N_t=%d, start=%s, end=%s)" % (
            len(self), tuple(self.points[0]), tuple(self.points[-1]))

    def copy(self) -> 'Trajectory':
        return Trajectory(self.points.copy())

    def steps(self) -> np.ndarray:
        """Horizontal distance travelled in every slot transition"""
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    def distances_to(self, point) -> np.ndarray:
        return np.linalg.norm(self.points - np.asarray(point, dtype=float), axis=1)

    def violations(self, cfg: ScenarioConfig) -> list:
        """List the trajectory invariants that do not hold under `cfg`"""
        problems = []
        if len(self) != cfg.slot_count:
            problems.append("length %d != N_t %d" % (len(self), cfg.slot_count))
            return problems
        if not np.array_equal(self.points[0], np.asarray(cfg.q0)):
            problems.append("q_U[1] != q0")
        if not np.array_equal(self.points[-1], np.asarray(cfg.qf)):
            problems.append("q_U[N_t] != qf")
        steps = self.steps()
        if cfg.paper_literal_velocity:
            excess = steps ** 2 - cfg.speed_cap
        else:
            excess = steps - cfg.speed_cap
        bad = np.flatnonzero(excess > SPEED_TOLERANCE)
        if bad.size:
            problems.append("speed limit exceeded at slot(s) %s"
                            % ', '.join(str(n + 2) for n in bad))
        return problems

    def validate(self, cfg: ScenarioConfig):
        """
        :raises: ValueError naming the violated invariant
        """
        problems = self.violations(cfg)
        if problems:
            raise ValueError("invalid trajectory: %s" % '; '.join(problems))


def straight_line_trajectory(cfg: ScenarioConfig) -> Trajectory:
    """Constant-velocity flight from q0 to qf over N_t slots"""
    return Trajectory(np.linspace(cfg.q0, cfg.qf, cfg.slot_count))
