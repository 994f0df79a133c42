"""Sparse structural-break detection via difference-form group LASSO."""

from sparsebreaks.baseline import OlsBaseline, fit_baseline
from sparsebreaks.diffop import DifferenceDesign, ResidualTarget, apply, apply_adjoint, build_design
from sparsebreaks.errors import NotConvergedWarning, SparseBreaksError
from sparsebreaks.io import emit_report, ingest_csv
from sparsebreaks.panel import CoefficientPath, RegressionPanel, reconstruct_path, validate_panel
from sparsebreaks.pipeline import BreakEvent, BreakReport, detect_breaks
from sparsebreaks.solver import GroupLassoSolution, SolverConfig, lambda_max, select_lambda, solve, solve_path
from sparsebreaks.synth import SyntheticScenario, VecScenario, generate_panel, generate_vecm
from sparsebreaks.vecm import VecmSpec, build_vecm_panel, comovement_pipeline, fit_vecm_invariant

__version__ = "0.1.0"

__all__ = [
    "OlsBaseline",
    "fit_baseline",
    "DifferenceDesign",
    "ResidualTarget",
    "apply",
    "apply_adjoint",
    "build_design",
    "NotConvergedWarning",
    "SparseBreaksError",
    "emit_report",
    "ingest_csv",
    "CoefficientPath",
    "RegressionPanel",
    "reconstruct_path",
    "validate_panel",
    "BreakEvent",
    "BreakReport",
    "detect_breaks",
    "GroupLassoSolution",
    "SolverConfig",
    "lambda_max",
    "select_lambda",
    "solve",
    "solve_path",
    "SyntheticScenario",
    "VecScenario",
    "generate_panel",
    "generate_vecm",
    "VecmSpec",
    "build_vecm_panel",
    "comovement_pipeline",
    "fit_vecm_invariant",
]
