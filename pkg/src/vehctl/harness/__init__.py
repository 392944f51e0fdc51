from .scenario import Scenario, ScenarioError, double_lane_change, general_track, load_scenario
from .sim import COLUMNS, ScenarioResult, compare, run, sweep, tune

__all__ = ["COLUMNS", "Scenario", "ScenarioError", "ScenarioResult", "compare",
           "double_lane_change", "general_track", "load_scenario", "run", "sweep", "tune"]
