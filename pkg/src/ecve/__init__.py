"""Joint secure edge caching and video encoding for QoE maximization."""
from .catalog import (EncodingPlan, Placement, Scenario, VideoFile, build_scenario,
                      load_config, table1_config, with_overrides, zipf_popularity)
from .estimators import (ECOnlySolver, ECSTSolver, ECVESolver, GreedyECVESolver,
                         OracleSolver, VEOnlySolver)
from .harness import SweepSpec, load_sweep, min_capacity, read_csv, run_sweep, write_csv
from .qoe import check_feasibility, min_secure_packets, objective
from .results import SolveResult
from .schemes import SCHEMES, SchemeOptions, solve
from .validation import InvalidArgumentError

__all__ = [
    "EncodingPlan", "Placement", "Scenario", "VideoFile", "build_scenario", "load_config",
    "table1_config", "with_overrides", "zipf_popularity",
    "ECOnlySolver", "ECSTSolver", "ECVESolver", "GreedyECVESolver", "OracleSolver",
    "VEOnlySolver",
    "SweepSpec", "load_sweep", "min_capacity", "read_csv", "run_sweep", "write_csv",
    "check_feasibility", "min_secure_packets", "objective",
    "SolveResult", "SCHEMES", "SchemeOptions", "solve", "InvalidArgumentError",
]
__version__ = "0.1.0"
