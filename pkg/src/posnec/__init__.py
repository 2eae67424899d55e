"""Cooperative mapping of orthogonal environments by a troupe of small robots.

Robots explore with odometry that drifts, log what they see together with
their current error rectangle, swap logs when they meet and hand everything
to a host on return.  The host folds the logs into a grid that keeps, per
cell, the possibility and the necessity of a wall.
"""

from .errormodel import ErrorParams, ErrorState, default_params, zero_params
from .fusion import incremental_update, ingest, render, stats
from .grid import PossNecGrid, new_grid
from .robot import BehaviourParams, LogEvent, make_troupe_behaviours
from .troupe import MissionConfig, MissionResult, run_mission
from .world import OrthogonalWorld, load_world, make_world, read_world

__version__ = "0.1.0"

__all__ = [
    "BehaviourParams", "ErrorParams", "ErrorState", "LogEvent", "MissionConfig", "MissionResult",
    "OrthogonalWorld", "PossNecGrid", "default_params", "incremental_update", "ingest",
    "load_world", "make_troupe_behaviours", "make_world", "new_grid", "read_world", "render",
    "run_mission", "stats", "zero_params",
]
