"""Racetrack-memory register file: cost models, trace simulation and CFG-based allocation recommendations."""

from .geometry import (
    DEFAULT_GEOMETRY,
    AllocationMode,
    CostParams,
    GeometryError,
    RegisterFileGeometry,
    ValidatedGeometry,
    validate_geometry,
)
from .costs import AccessKind, CostTriple, RegisterValue, access_cost, shift_cost_h, shift_cost_v, write_delta
from .trace import TraceInstruction, access_sequence, parse_trace, serialize_trace
from .cfg import annotate_probabilities, build_cfg, parse_listing
from .rectable import RecommendationTable
from .simulator import STATIC_H, STATIC_V, LOptPolicy, RecPolicy, lopt_schedule, run_versions, simulate
from .recommender import PruneOptions, build_table, enumerate_paths, recommend_bit, score_path
from .reports import SRAM, SramBaseline, SweepSpec, run_sweep
from .synthetic import SyntheticSpec, bundled_workload, synthetic_workload
from .estimators import RecommendationEstimator

__version__ = "0.1.0"
