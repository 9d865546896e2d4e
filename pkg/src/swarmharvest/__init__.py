"""Joint 3D placement, association, scheduling, and time-split planning for
an aerial swarm that first wirelessly charges a field of sensor devices and
then collects their uplink data, maximizing sum throughput under harvesting
activation and SNR-threshold constraints."""

from .channel import (LinkGeometry, QuadraticFit, average_gain, coverage_radius,
                      eh_coverage_limit, elevation_deg, excess_path_function,
                      fit_quadratic, gain_matrix, los_probability)
from .downlink import dl_associate, dl_place
from .errors import (BracketError, CoverageError, FitError, InfeasibleRegionError,
                     ParameterError, SolverError, StateError)
from .evaluation import bs_layout, jain, state_objective, tdma_mode, throughput_report
from .harness import ExperimentSpec, MODE_TABLE, run_sweep
from .numerics import (DiscConstraintSet, FractionalInstance, bisect_root,
                       dinkelbach_select, golden_section_max, hungarian,
                       maximize_over_discs, project_discs)
from .planner import (RunOptions, RunState, check_state, compute_varpi,
                      initialize, run, run_best, run_pair)
from .scenario import (AssociationState, ChannelParams, Deployment, RadioParams,
                       Scenario, Schedule, SolutionReport, SolverCoefficients,
                       TimeAllocation, db_to_linear, dbm_to_watt, generate_scenario)
from .scheduling import (build_schedule, compute_coefficients, compute_w,
                         heuristic_schedule, optimal_time, time_objective)
from .uplink import ul_energy_associate, ul_info_associate, ul_place

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
