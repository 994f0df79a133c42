"""Pooled least-squares baseline for the coefficient path."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from sparsebreaks.errors import DegenerateDesign

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from sparsebreaks.panel import RegressionPanel

__all__ = ["OlsBaseline", "fit_baseline", "RANK_RTOL"]

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class OlsBaseline:
    beta0: NDArray
    residual_norm: float
    rank: int
    ridge_used: bool


def fit_baseline(panel: RegressionPanel, ridge_fallback: float = 1e-6) -> OlsBaseline:
    """Time-invariant coefficient minimizing ``sum_t ||y_t - X_t beta||^2``.

    The stacked system ``[X_1; ...; X_T] beta = [y_1; ...; y_T]`` is solved
    by an orthogonal (SVD based) least-squares routine rather than through
    the normal equations, so levels regressors with large dynamic range do
    not lose half their digits.

    If the pooled Gram matrix is numerically rank deficient (smallest
    eigenvalue below ``1e-10`` times the largest) and ``ridge_fallback`` is
    positive, the ridge problem with that penalty is solved instead and
    ``ridge_used`` is set. With ``ridge_fallback == 0`` the minimum-norm
    least-squares solution is returned.
    """
    if ridge_fallback < 0:
        raise ValueError("ridge_fallback must be nonnegative")
    T, m, n = panel.shape
    A = panel.design_blocks.reshape(T * m, n)
    b = panel.responses.reshape(T * m)

    eig = np.linalg.eigvalsh(A.T @ A)
    top = eig[-1]
    if top <= 0.0 and ridge_fallback == 0.0:
        raise DegenerateDesign("every design block is zero and no ridge penalty was given")
    rank = int(np.sum(eig > RANK_RTOL * top)) if top > 0 else 0
    deficient = top <= 0.0 or eig[0] < RANK_RTOL * top

    ridge_used = bool(deficient and ridge_fallback > 0)
    if ridge_used:
        A_aug = np.vstack([A, np.sqrt(ridge_fallback) * np.eye(n)])
        b_aug = np.concatenate([b, np.zeros(n)])
        beta0 = np.linalg.lstsq(A_aug, b_aug, rcond=None)[0]
    else:
        beta0 = np.linalg.lstsq(A, b, rcond=None)[0]
    residual_norm = float(np.linalg.norm(b - A @ beta0))
    return OlsBaseline(beta0=beta0, residual_norm=residual_norm, rank=rank, ridge_used=ridge_used)
