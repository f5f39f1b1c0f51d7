"""QoS-constrained multicore resource management simulator.

Coordinates last-level-cache way partitioning, per-core DVFS, and core
resizing under per-application performance constraints, with an online
leading-miss estimator for memory-level parallelism.
"""

from .cache import (AccessRecord, AtdDirectory, CacheGeometry, PartitionedCache,
                    RecencyProfile, predict_misses, read_trace,
                    simulate_lru_misses, write_trace)
from .config import Constants, ExperimentConfig, LibraryConfig, SystemConfig
from .engine import (OverheadModel, QosEvalStats, RunMetrics, qos_eval, run,
                     savings_fraction, violation_value)
from .mlp import LeadingMissCounter, LmCounterBank, oracle_leading_misses
from .models import (CORE_ORDER, CORE_SIZES, CoreConfig, IntervalStats, Model,
                     PowerTable, ResourceSetting, VfPoint, VfTable,
                     predict_energy, predict_time, qos_ok, vf_table)
from .optimizer import (Allocation, CurveEntry, EnergyCurve, Policy,
                        combine_curves, exhaustive_optimize, global_optimize,
                        local_optimize, rm_step)
from .workload import (SCENARIO_CELLS, SCENARIO_WEIGHTS, AppCategory, AppProfile,
                       PhaseProfile, ScenarioSpec, actual_time_energy,
                       build_scenario, categorize, generate_library, ground_truth,
                       load_library, save_library, synth_trace)

__version__ = "0.1.0"
