"""End-to-end breakpoint detection.

baseline fit -> difference-form design -> group-LASSO solve (single penalty or
path + selection) -> break extraction -> coefficient path reconstruction.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Literal

import numpy as np

from sparsebreaks.baseline import fit_baseline
from sparsebreaks.diffop import build_design
from sparsebreaks.errors import NoMatchingLambda, NotConvergedWarning
from sparsebreaks.panel import CoefficientPath, reconstruct_path, validate_panel
from sparsebreaks.solver import (
    PathPoint,
    SolverConfig,
    lambda_max,
    select_lambda,
    solve,
    solve_path,
)

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from sparsebreaks.diffop import DifferenceDesign, ResidualTarget
    from sparsebreaks.panel import RegressionPanel

__all__ = ["BreakEvent", "BreakReport", "detect_breaks", "ZERO_RESIDUAL_RTOL"]

logger = logging.getLogger(__name__)

# ||r|| <= ZERO_RESIDUAL_RTOL * ||y|| counts as an exact fit
ZERO_RESIDUAL_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class BreakEvent:
    period: int
    label: Any
    magnitude: float
    jump: NDArray


@dataclass(frozen=True, eq=False)
class BreakReport:
    """Detected breaks plus everything needed to reproduce the run.

    ``breaks`` is sorted by period and lists exactly the active groups of the
    chosen solution. ``path_table`` holds ``(lam, n_active, objective,
    converged)`` for every solved penalty when a path was run.
    """

    breaks: list[BreakEvent]
    path: CoefficientPath
    lambda_used: float
    criterion: str
    diagnostics: dict[str, Any]
    path_table: list[tuple[float, int, float, bool]] = field(default_factory=list)

    @property
    def break_periods(self) -> list[int]:
        return [b.period for b in self.breaks]


def _criterion_label(lam: float | None, criterion: Literal["bic"] | int) -> str:
    if lam is not None:
        return "fixed_lambda"
    if criterion == "bic":
        return "bic"
    return f"fixed_k={int(criterion)}"


def _refine_fixed_k(
    design: DifferenceDesign,
    target: ResidualTarget,
    config: SolverConfig,
    path: list[PathPoint],
    k: int,
    max_bisections: int = 40,
) -> PathPoint:
    """Bisect in log-penalty between the grid points that straddle ``k``."""
    for upper, lower in zip(path[:-1], path[1:]):
        if upper.solution.n_active < k < lower.solution.n_active:
            hi, lo = upper, lower
            for _ in range(max_bisections):
                lam = math.sqrt(hi.lam * lo.lam)
                sol = solve(design, target, replace(config, lam=lam), warm_start=hi.solution.deltas)
                point = PathPoint(lam, sol)
                if sol.n_active == k:
                    return point
                if sol.n_active < k:
                    hi = point
                else:
                    lo = point
    raise NoMatchingLambda(f"no penalty gives exactly {k} active groups, even after bisection")


def detect_breaks(
    panel: RegressionPanel,
    *,
    lam: float | None = None,
    criterion: Literal["bic"] | int = "bic",
    config: SolverConfig | None = None,
    num_lambdas: int = 50,
    min_ratio: float = 0.01,
    normalize: bool = True,
    ridge_fallback: float = 1e-6,
    beta0: ArrayLike | None = None,
    refine: bool = True,
) -> BreakReport:
    """Detect the periods at which the coefficient vector jumps.

    Parameters
    ----------
    panel : RegressionPanel
    lam : float, optional
        Solve at this single penalty (in scaled units). Otherwise a path of
        ``num_lambdas`` penalties is solved and one is chosen by ``criterion``.
    criterion : ``"bic"`` or int
        Path selection rule; an integer k asks for exactly k breaks.
    config : SolverConfig, optional
        Tolerances, weights and update rule; its ``lam`` is ignored.
    normalize : bool
        Scale columns and target to unit norm before solving.
    beta0 : array_like, optional
        Baseline coefficient; pooled OLS when omitted.
    refine : bool
        For integer criteria, bisect between grid penalties when no grid
        point has exactly k active groups.

    Returns
    -------
    BreakReport
        Jumps and magnitudes in original units. If the baseline already fits
        exactly (``||r|| <= 1e-12 ||y||``) no solve is attempted, the report
        has no breaks and ``lambda_used`` is 0.
    """
    validate_panel(panel)
    T, m, n = panel.shape
    if config is None:
        config = SolverConfig(lam=1.0)
    crit_label = _criterion_label(lam, criterion)

    baseline = None
    if beta0 is None:
        baseline = fit_baseline(panel, ridge_fallback=ridge_fallback)
        beta0 = baseline.beta0
    beta0 = np.asarray(beta0, dtype=float)
    design, target = build_design(panel, beta0, normalize=normalize)

    diagnostics: dict[str, Any] = {
        "normalize": bool(normalize),
        "kkt_tol": config.kkt_tol,
        "max_sweeps": config.max_sweeps,
        "objective_tol": config.objective_tol,
        "block_update": config.block_update,
        "group_weights": config.group_weights if isinstance(config.group_weights, (str, type(None))) else "custom",
        "response_scale": design.response_scale,
        "baseline_ridge_used": bool(baseline.ridge_used) if baseline else False,
        "baseline_rank": int(baseline.rank) if baseline else None,
    }

    y_norm = float(np.linalg.norm(panel.responses))
    r_norm = float(np.linalg.norm(target.r))
    if r_norm <= ZERO_RESIDUAL_RTOL * y_norm or r_norm == 0.0:
        diagnostics.update(
            lambda_max=0.0, sweeps=0, kkt_residual=0.0, objective=0.0,
            converged=True, not_converged=False, zero_residual=True,
        )
        return BreakReport(
            breaks=[],
            path=reconstruct_path(beta0, np.zeros((T, n))),
            lambda_used=0.0,
            criterion=crit_label,
            diagnostics=diagnostics,
        )

    lam_max = lambda_max(design, target, config.group_weights)
    diagnostics.update(lambda_max=lam_max, zero_residual=False)
    path_table: list[tuple[float, int, float, bool]] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NotConvergedWarning)
        if lam is not None:
            chosen = PathPoint(float(lam), solve(design, target, replace(config, lam=float(lam))))
        else:
            stop = None if criterion == "bic" else int(criterion)
            path = solve_path(
                design, target, config, num_lambdas=num_lambdas, min_ratio=min_ratio, stop_at_size=stop
            )
            path_table = [
                (p.lam, p.solution.n_active, p.solution.objective, p.solution.converged) for p in path
            ]
            diagnostics.update(num_lambdas=num_lambdas, min_ratio=min_ratio)
            try:
                chosen = select_lambda(path, design, target, criterion)
            except NoMatchingLambda:
                if not refine or criterion == "bic":
                    raise
                chosen = _refine_fixed_k(design, target, config, path, int(criterion))
                diagnostics["refined"] = True
    n_unconverged = sum(issubclass(w.category, NotConvergedWarning) for w in caught)

    sol = chosen.solution
    diagnostics.update(
        sweeps=sol.sweeps,
        kkt_residual=sol.kkt_residual,
        objective=sol.objective,
        converged=sol.converged,
        not_converged=not sol.converged,
        unconverged_solves=n_unconverged,
    )
    if not sol.converged:
        logger.warning("selected solution at lam=%.6g is not KKT-certified", chosen.lam)

    breaks = []
    for t in sol.active_set:
        jump = np.array(sol.deltas[t - 1])
        breaks.append(BreakEvent(t, panel.label(t), float(np.linalg.norm(jump)), jump))
    return BreakReport(
        breaks=breaks,
        path=reconstruct_path(beta0, sol.deltas),
        lambda_used=chosen.lam,
        criterion=crit_label,
        diagnostics=diagnostics,
        path_table=path_table,
    )
