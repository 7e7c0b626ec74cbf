from secure_isac.core.exceptions import (ConfigError, DegenerateDirection, InfeasibleScenario,
                                         SecureIsacError, SolverError)
from secure_isac.core.scenario import ScenarioConfig, Trajectory, load_scenario
