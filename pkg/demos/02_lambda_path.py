"""Walk the penalty path by hand.

The pipeline in demo 01 hides four steps: the pooled baseline fit, the
difference-form design, the warm-started path and the selection rule. Here
each runs explicitly so the path can be inspected.

Run with ``python demos/02_lambda_path.py``.
"""

import numpy as np

from sparsebreaks import (
    SolverConfig,
    SyntheticScenario,
    build_design,
    fit_baseline,
    generate_panel,
    lambda_max,
    select_lambda,
    solve_path,
)

jump = np.array([6.0, -6.0, 0.0])
panel, truth = generate_panel(SyntheticScenario(
    seed=7, periods=80, obs_dim=3, coef_dim=3, jump_schedule=[(25, jump), (55, -jump)], noise_scale=0.5,
))

baseline = fit_baseline(panel)
design, target = build_design(panel, baseline.beta0)
print(f"pooled baseline beta0 = {np.round(baseline.beta0, 3)}")
print(f"lambda_max = {lambda_max(design, target):.4f} (every penalty above gives the zero solution)\n")

path = solve_path(design, target, SolverConfig(lam=1.0, kkt_tol=1e-8), num_lambdas=30)
print(" lambda     active  sweeps  objective   active periods")
for point in path[::3]:
    sol = point.solution
    shown = list(sol.active_set) if sol.n_active <= 6 else f"{list(sol.active_set[:6])}..."
    print(f" {point.lam:8.4f}  {sol.n_active:6d}  {sol.sweeps:6d}  {sol.objective:.6f}  {shown}")

for rule in ("bic", 2):
    chosen = select_lambda(path, design, target, rule)
    print(f"\n{rule!r} selects lambda={chosen.lam:.4f} with active periods {list(chosen.solution.active_set)}")
