"""Interbank leverage-network stability toolkit.

Builds leverage matrices from balance sheets, classifies stability through
the spectral radii of the adjusted matrices, simulates nonlinear distress
propagation, reconstructs exposures from marginals, and drives the
node-addition / edge-addition pathway experiments.
"""

from .cycles import (CycleWitness, WitnessReport, build_butterfly,
                     build_core_periphery_example, build_fig3_sequence,
                     find_unstable_cycles, fig3_omega_window, is_dag)
from .dynamics import (DistressState, RegimeLabel, SimulationResult, classify,
                       simulate, step)
from .errors import (GenerationError, LevnetError, PathwayError,
                     RasConvergenceError, RasInfeasibleError,
                     SpectralConvergenceError, UnstableSequenceRequired)
from .generators import (CorePeripherySpec, WeightedDigraph, constant_weights,
                         exponential_weights, gen_core_periphery,
                         gen_erdos_renyi, gen_random_dag, gen_regular_random,
                         gen_scale_free, read_edge_list, reciprocity,
                         uniform_weights, write_edge_list)
from .model import (BalanceSheet, DefaultCurve, adjust_recovery,
                    build_leverage, check_exposures_consistent,
                    load_balance_sheets, save_balance_sheets,
                    synthetic_balance_sheets, tilde_matrix)
from .pathways import (CrossingEvent, TrajectoryRecord, detect_crossings,
                       edge_addition_trajectory, grow_cp_sequence,
                       grow_er_pathway, grow_rrg_pathway, grow_sf_pathway,
                       is_valid_pathway, sample_stable_graph,
                       shrink_cp_pathway, summarize_trajectories,
                       write_records_csv)
from .reconstruct import (RasProblem, RasSolution, ras_balance,
                          rebalance_after_edge)
from .spectral import (leverage_bounds, linear_fixed_point, power_diagonal,
                       spectral_radius)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
