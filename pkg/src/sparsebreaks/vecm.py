"""Vector error correction models with a time-varying long-run matrix.

The model is

    dX_t = G_1 dX_{t-1} + ... + G_k dX_{t-k} + Pi X_{t-k} + mu + u_t

with ``dX_t = X_t - X_{t-1}``: ``k`` difference lags and the level term on
``X_{t-k}``. (The textbook VECM of a levels VAR(p) has ``p - 1`` difference
lags and the level on ``X_{t-1}``; the two only relabel regressors.)

Series are arrays of shape ``(N, m)`` with time along the rows. The usable
periods are ``t = k+1, ..., N-1`` (0-based), so a regression panel built from
a series has ``T = N - k - 1`` periods and period ``p`` (1-based) is series
row ``k + p``.

Coefficients are vectorized column-major, ``vec(B)``, so that ``B @ z`` equals
``(z.T kron I_m) @ vec(B)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Literal

import numpy as np

from sparsebreaks.baseline import fit_baseline
from sparsebreaks.errors import (
    NonFiniteEntry,
    RankTooLarge,
    SeriesTooShort,
    SingularBetaGram,
)
from sparsebreaks.panel import RegressionPanel, validate_panel
from sparsebreaks.pipeline import BreakReport, detect_breaks

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

    from sparsebreaks.solver import SolverConfig

__all__ = [
    "VecmSpec",
    "VecmFit",
    "ComovementSeries",
    "vecm_regressors",
    "build_vecm_panel",
    "fit_vecm_invariant",
    "decompose_pi",
    "recover_alpha",
    "comovement_degree",
    "comovement_pipeline",
    "vec",
    "unvec",
]


@dataclass(frozen=True)
class VecmSpec:
    lag_order: int
    coint_rank: int
    include_intercept: bool = True
    degree_norm: Literal["spectral", "frobenius"] = "spectral"

    def __post_init__(self) -> None:
        if self.lag_order < 1:
            raise ValueError(f"lag_order must be >= 1, got {self.lag_order}")
        if self.coint_rank < 1:
            raise RankTooLarge(f"coint_rank must be positive, got {self.coint_rank}")
        if self.degree_norm not in ("spectral", "frobenius"):
            raise ValueError(f"unknown degree_norm {self.degree_norm!r}")


@dataclass(frozen=True, eq=False)
class VecmFit:
    """Time-invariant VEC estimates.

    ``gammas`` has shape ``(k, m, m)``; ``alpha`` and ``beta_star`` are
    ``(m, r)`` with ``pi ~= alpha @ beta_star.T``.
    """

    spec: VecmSpec
    gammas: NDArray
    mu: NDArray
    pi: NDArray
    alpha: NDArray
    beta_star: NDArray
    effective_T: int
    residual_norm: float
    ridge_used: bool


@dataclass(frozen=True, eq=False)
class ComovementSeries:
    periods: list[Any]
    alphas: NDArray
    degrees: NDArray
    break_periods: list[int]
    pis: NDArray


def vec(B: ArrayLike) -> NDArray:
    return np.asarray(B, dtype=float).ravel(order="F")


def unvec(v: ArrayLike, rows: int) -> NDArray:
    v = np.asarray(v, dtype=float)
    return v.reshape(rows, -1, order="F")


def _check_series(series: ArrayLike, k: int) -> NDArray:
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"series must be (N, m), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        row = int(np.argwhere(~np.isfinite(x))[0, 0])
        raise NonFiniteEntry(f"series row {row} contains a non-finite entry")
    if x.shape[0] <= k + 1:
        raise SeriesTooShort(f"need more than {k + 1} observations for lag order {k}, got {x.shape[0]}")
    return x


def vecm_regressors(
    series: ArrayLike, lag_order: int, include_intercept: bool = True
) -> tuple[NDArray, NDArray, NDArray]:
    """Response and regressor blocks over the usable periods.

    Returns
    -------
    dy : ndarray, shape (T, m)
        ``dX_t``.
    lags : ndarray, shape (T, m*k)
        ``[dX_{t-1}, ..., dX_{t-k}]`` side by side.
    levels : ndarray, shape (T, m)
        ``X_{t-k}``.
    """
    k = lag_order
    x = _check_series(series, k)
    N = x.shape[0]
    dx = np.diff(x, axis=0)  # dx[i] = x[i+1] - x[i] = dX_{i+1}
    t = np.arange(k + 1, N)
    dy = dx[t - 1]
    lags = np.hstack([dx[t - 1 - i] for i in range(1, k + 1)])
    levels = x[t - k]
    return dy, lags, levels


def _kron_blocks(Z: NDArray, m: int) -> NDArray:
    """Per-period ``z_t.T kron I_m``; shape ``(T, m, m * p)``."""
    T, p = Z.shape
    eye = np.eye(m)
    return np.einsum("tp,ij->tipj", Z, eye).reshape(T, m, p * m)


def build_vecm_panel(
    series: ArrayLike,
    spec: VecmSpec,
    time_varying: Literal["pi_only", "all"] = "pi_only",
    fit: VecmFit | None = None,
    labels: Sequence | None = None,
) -> RegressionPanel:
    """Regression panel of the VEC model.

    With ``"all"`` every period's block is ``z_t.T kron I_m`` with
    ``z_t = [dX_{t-1}; ...; dX_{t-k}; X_{t-k}; 1]`` and coefficient
    ``vec([G_1 ... G_k Pi mu])``. With ``"pi_only"`` the block is
    ``X_{t-k}.T kron I_m`` (``m*m`` coefficients, ``vec(Pi)``) and the lag and
    intercept terms of the time-invariant ``fit`` are subtracted from the
    response; ``fit`` is estimated when not supplied.

    ``labels`` are series labels (length ``N``); the panel keeps the ones of
    the usable periods.
    """
    k = spec.lag_order
    dy, lags, levels = vecm_regressors(series, k, spec.include_intercept)
    T, m = dy.shape
    if spec.coint_rank > m:
        raise RankTooLarge(f"coint_rank {spec.coint_rank} exceeds dimension {m}")
    panel_labels = None
    if labels is not None:
        labels = list(labels)
        if len(labels) != T + k + 1:
            raise ValueError(f"{len(labels)} labels for a series of length {T + k + 1}")
        panel_labels = labels[k + 1 :]

    if time_varying == "all":
        cols = [lags, levels]
        if spec.include_intercept:
            cols.append(np.ones((T, 1)))
        Z = np.hstack(cols)
        return validate_panel(RegressionPanel(_kron_blocks(Z, m), dy, panel_labels))
    if time_varying != "pi_only":
        raise ValueError(f"unknown time_varying mode {time_varying!r}")
    if fit is None:
        fit = fit_vecm_invariant(series, spec)
    y = dy - lags @ np.hstack(list(fit.gammas)).T - fit.mu
    return validate_panel(RegressionPanel(_kron_blocks(levels, m), y, panel_labels))


def decompose_pi(pi: ArrayLike, rank: int) -> tuple[NDArray, NDArray]:
    """Best rank-``r`` factorization ``pi ~= alpha @ beta_star.T``.

    ``beta_star`` holds the leading ``r`` right singular vectors (orthonormal
    columns), ``alpha`` the matching left singular vectors times the singular
    values. Each ``beta_star`` column is signed so its largest-magnitude entry
    is positive.
    """
    pi = np.asarray(pi, dtype=float)
    m = pi.shape[0]
    if pi.shape != (m, m):
        raise ValueError(f"pi must be square, got shape {pi.shape}")
    if not 0 < rank <= m:
        raise RankTooLarge(f"rank {rank} outside 1..{m}")
    U, s, Vt = np.linalg.svd(pi)
    beta_star = Vt[:rank].T.copy()
    alpha = U[:, :rank] * s[:rank]
    for j in range(rank):
        lead = np.argmax(np.abs(beta_star[:, j]))
        if beta_star[lead, j] < 0:
            beta_star[:, j] *= -1
            alpha[:, j] *= -1
    return alpha, beta_star


def recover_alpha(pi_t: ArrayLike, beta_star: ArrayLike) -> NDArray:
    """Least-squares ``alpha_t`` in ``pi_t ~= alpha_t @ beta_star.T``."""
    pi_t = np.asarray(pi_t, dtype=float)
    B = np.asarray(beta_star, dtype=float)
    gram = B.T @ B
    if np.linalg.matrix_rank(gram) < gram.shape[0] or np.linalg.cond(gram) > 1e12:
        raise SingularBetaGram("beta_star does not have full column rank")
    return np.linalg.solve(gram, (pi_t @ B).T).T


def comovement_degree(alpha: ArrayLike, norm: Literal["spectral", "frobenius"] = "spectral") -> float:
    """Scalar size of an adjustment-speed matrix: largest singular value or Frobenius norm."""
    alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
    if norm == "spectral":
        return float(np.linalg.norm(alpha, 2))
    if norm == "frobenius":
        return float(np.linalg.norm(alpha, "fro"))
    raise ValueError(f"unknown degree norm {norm!r}")


def fit_vecm_invariant(series: ArrayLike, spec: VecmSpec, ridge_fallback: float = 1e-6) -> VecmFit:
    """Pooled least squares of the VEC model with all coefficients constant."""
    panel = build_vecm_panel(series, spec, "all")
    T, m, _ = panel.shape
    k = spec.lag_order
    base = fit_baseline(panel, ridge_fallback=ridge_fallback)
    B = unvec(base.beta0, m)
    gammas = np.stack([B[:, i * m : (i + 1) * m] for i in range(k)])
    pi = B[:, k * m : (k + 1) * m]
    mu = B[:, -1].copy() if spec.include_intercept else np.zeros(m)
    alpha, beta_star = decompose_pi(pi, spec.coint_rank)
    return VecmFit(
        spec=spec,
        gammas=gammas,
        mu=mu,
        pi=pi.copy(),
        alpha=alpha,
        beta_star=beta_star,
        effective_T=T,
        residual_norm=base.residual_norm,
        ridge_used=base.ridge_used,
    )


def comovement_pipeline(
    series: ArrayLike,
    spec: VecmSpec,
    *,
    labels: Sequence | None = None,
    lam: float | None = None,
    criterion: Literal["bic"] | int = "bic",
    config: SolverConfig | None = None,
    num_lambdas: int = 50,
    min_ratio: float = 0.01,
) -> tuple[VecmFit, BreakReport, ComovementSeries]:
    """Time-varying long-run matrix and comovement degree.

    1. fit the constant-coefficient model;
    2. fix ``beta_star`` from the SVD of its ``Pi``;
    3. detect breaks in ``Pi`` on the ``pi_only`` panel around ``vec(Pi)``;
    4. cumulate the increments into ``Pi_t``;
    5. ``alpha_t`` by least squares against ``beta_star``;
    6. degree = configured norm of ``alpha_t``.
    """
    fit = fit_vecm_invariant(series, spec)
    panel = build_vecm_panel(series, spec, "pi_only", fit=fit, labels=labels)
    T, m, _ = panel.shape
    report = detect_breaks(
        panel,
        lam=lam,
        criterion=criterion,
        config=config,
        num_lambdas=num_lambdas,
        min_ratio=min_ratio,
        beta0=vec(fit.pi),
    )
    pis = np.stack([unvec(b, m) for b in report.path.betas])
    alphas = np.stack([recover_alpha(p, fit.beta_star) for p in pis])
    degrees = np.array([comovement_degree(a, spec.degree_norm) for a in alphas])
    periods = [panel.label(t) for t in range(1, T + 1)]
    series_out = ComovementSeries(
        periods=periods,
        alphas=alphas,
        degrees=degrees,
        break_periods=report.break_periods,
        pis=pis,
    )
    return fit, report, series_out
