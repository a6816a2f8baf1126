"""Partition-based estimation of the falsifying region of a black-box objective."""

__version__ = "0.1.0"

from .bench import PROBLEMS, BenchmarkProblem, get_problem, mc_volume_oracle
from .core import (
    ConfidenceDiagnostics,
    FalsificationVolume,
    PartXConfig,
    RunReport,
    confidence_diagnostics,
    evaluate_samples,
    falsification_volume_hyperbox,
    falsification_volume_quantile,
    pac_delta,
    part_x,
    significance,
)
from .exceptions import EvaluationError, PartXError
from .gp import GaussianProcess, fit
from .hyperbox import Hyperbox
from .partition import PartitionTree, RegionLabel, Subregion, branch, classify, mc_step
from .sampling import SampleBatch, expected_improvement, latin_hypercube, sample_bo

__all__ = [
    "PROBLEMS", "BenchmarkProblem", "get_problem", "mc_volume_oracle",
    "ConfidenceDiagnostics", "FalsificationVolume", "PartXConfig", "RunReport", "confidence_diagnostics",
    "evaluate_samples", "falsification_volume_hyperbox", "falsification_volume_quantile", "pac_delta",
    "part_x", "significance", "EvaluationError", "PartXError", "GaussianProcess", "fit", "Hyperbox",
    "PartitionTree", "RegionLabel", "Subregion", "branch", "classify", "mc_step", "SampleBatch",
    "expected_improvement", "latin_hypercube", "sample_bo",
]
