"""Matrix-free difference-form design.

Writing ``beta_t = beta0 + sum_{tau <= t} delta_tau`` turns the panel into a
single regression ``r = Xd @ delta + u`` with residual target
``r_t = y_t - X_t beta0`` and design ``Xd = blockdiag(X_t) @ L`` where ``L`` is
the block lower-triangular matrix of ``n x n`` identities. Block ``(s, t)`` of
``Xd`` is ``X_s`` for ``s >= t`` and zero otherwise, so

* ``(Xd @ delta)_s = X_s @ cumsum(delta)_s``
* ``(Xd.T @ v)_t = sum_{s >= t} X_s.T @ v_s``
* the Gram of group ``t`` is the suffix Gram ``S_t = sum_{s >= t} X_s.T X_s``.

None of these needs the ``mT x nT`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.sparse.linalg import LinearOperator

from sparsebreaks.errors import DimensionMismatch, IndexOutOfRange

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from sparsebreaks.panel import RegressionPanel

__all__ = [
    "DifferenceDesign",
    "ResidualTarget",
    "GroupColumns",
    "build_design",
    "apply",
    "apply_adjoint",
    "group_columns",
    "suffix_grams",
    "as_linear_operator",
    "SCALE_FLOOR",
]

SCALE_FLOOR = 1e-12


def suffix_grams(design_blocks: NDArray) -> NDArray:
    """``S_t = X_t.T X_t + S_{t+1}`` with ``S_T = X_T.T X_T``; shape ``(T, n, n)``."""
    grams = np.einsum("tmi,tmj->tij", design_blocks, design_blocks)
    out = np.empty_like(grams)
    acc = np.zeros(grams.shape[1:])
    for t in range(grams.shape[0] - 1, -1, -1):
        acc = grams[t] + acc
        out[t] = acc
    return out


def _suffix_sum(a: NDArray) -> NDArray:
    return np.cumsum(a[::-1], axis=0)[::-1]


@dataclass(frozen=True)
class ResidualTarget:
    """Stacked residual ``r`` of the time-invariant fit, length ``m*T``.

    ``scale`` is the divisor applied to obtain the solver's target; it is the
    design's ``response_scale`` when normalized and 1 otherwise.
    """

    r: NDArray
    periods: int
    scale: float = 1.0

    @property
    def blocks(self) -> NDArray:
        return self.r.reshape(self.periods, -1)

    @property
    def scaled(self) -> NDArray:
        return self.r / self.scale

    @property
    def scaled_blocks(self) -> NDArray:
        return self.scaled.reshape(self.periods, -1)


@dataclass(frozen=True, eq=False)
class DifferenceDesign:
    """Difference-form operator with optional unit-norm column scaling.

    Attributes
    ----------
    panel : RegressionPanel
    normalize : bool
        When true the operator is ``Xd @ diag(1 / column_scales)`` and the
        target is ``r / response_scale``.
    column_scales : ndarray, shape (T, n)
        l2 norm of column ``(t, j)`` of ``Xd``, i.e. ``sqrt(S_t[j, j])``.
        Zero columns get scale 1 and are flagged in ``inert``.
    response_scale : float
        ``||r||_2`` floored at ``1e-12``.
    suffix_grams : ndarray, shape (T, n, n)
    group_lipschitz : ndarray, shape (T,)
        Largest eigenvalue of the (scaled) group Gram; 1 for inert groups.
    inert : ndarray of bool, shape (T, n)
        Columns that are identically zero; their coefficients stay 0.
    """

    panel: RegressionPanel
    normalize: bool
    column_scales: NDArray
    response_scale: float
    suffix_grams: NDArray
    group_lipschitz: NDArray
    inert: NDArray

    @property
    def periods(self) -> int:
        return self.panel.periods

    @property
    def shape(self) -> tuple[int, int]:
        T, m, n = self.panel.shape
        return (m * T, n * T)

    @property
    def op_scales(self) -> NDArray:
        """Divisors actually applied to the columns, shape ``(T, n)``."""
        if self.normalize:
            return self.column_scales
        return np.ones_like(self.column_scales)

    @property
    def inv_scales(self) -> NDArray:
        return 1.0 / self.op_scales

    @property
    def inert_groups(self) -> NDArray:
        return self.inert.all(axis=1)

    def group_gram(self, t: int) -> NDArray:
        """Scaled Gram ``D_t S_t D_t`` of 1-based group ``t``."""
        _check_period(t, self.periods)
        d = self.inv_scales[t - 1]
        return d[:, None] * self.suffix_grams[t - 1] * d[None, :]

    def unscale(self, z: NDArray) -> NDArray:
        """Map solver coordinates ``(T, n)`` to increments in original units."""
        if not self.normalize:
            return np.array(z, dtype=float)
        return z * self.response_scale / self.column_scales

    def rescale(self, deltas: NDArray) -> NDArray:
        """Inverse of :meth:`unscale`."""
        if not self.normalize:
            return np.array(deltas, dtype=float)
        return deltas * self.column_scales / self.response_scale


def _check_period(t: int, T: int) -> None:
    if not 1 <= t <= T:
        raise IndexOutOfRange(f"period {t} outside 1..{T}")


def build_design(
    panel: RegressionPanel, beta0: ArrayLike, normalize: bool = True
) -> tuple[DifferenceDesign, ResidualTarget]:
    """Residual target and difference-form operator for ``panel`` around ``beta0``."""
    T, m, n = panel.shape
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.shape != (n,):
        raise DimensionMismatch(f"beta0 has shape {beta0.shape}, expected ({n},)")
    r = (panel.responses - panel.design_blocks @ beta0).reshape(T * m)

    S = suffix_grams(panel.design_blocks)
    col_norm = np.sqrt(np.clip(np.diagonal(S, axis1=1, axis2=2), 0.0, None))
    inert = col_norm <= SCALE_FLOOR
    column_scales = np.where(inert, 1.0, col_norm)
    response_scale = max(float(np.linalg.norm(r)), SCALE_FLOOR)

    d = 1.0 / column_scales if normalize else np.ones_like(column_scales)
    scaled = d[:, :, None] * S * d[:, None, :]
    lip = np.linalg.eigvalsh(scaled)[:, -1]
    inert_groups = inert.all(axis=1)
    lip = np.where(inert_groups | (lip <= 0.0), 1.0, lip)

    for a in (S, column_scales, lip, inert):
        a.setflags(write=False)
    design = DifferenceDesign(
        panel=panel,
        normalize=bool(normalize),
        column_scales=column_scales,
        response_scale=response_scale,
        suffix_grams=S,
        group_lipschitz=lip,
        inert=inert,
    )
    target = ResidualTarget(r=r, periods=T, scale=response_scale if normalize else 1.0)
    return design, target


def _as_groups(x: ArrayLike, T: int, k: int, name: str) -> NDArray:
    x = np.asarray(x, dtype=float)
    if x.size != T * k:
        raise DimensionMismatch(f"{name} has {x.size} entries, expected {T * k}")
    return x.reshape(T, k)


def apply(design: DifferenceDesign, delta: ArrayLike) -> NDArray:
    """Forward map; block ``s`` of the result is ``X_s @ sum_{t<=s} delta_t``."""
    T, m, n = design.panel.shape
    z = _as_groups(delta, T, n, "delta") * design.inv_scales
    paths = np.cumsum(z, axis=0)
    return np.einsum("tmn,tn->tm", design.panel.design_blocks, paths).reshape(T * m)


def apply_adjoint(design: DifferenceDesign, v: ArrayLike) -> NDArray:
    """Adjoint map; block ``t`` of the result is ``sum_{s>=t} X_s.T @ v_s``."""
    T, m, n = design.panel.shape
    v = _as_groups(v, T, m, "v")
    xtv = np.einsum("tmn,tm->tn", design.panel.design_blocks, v)
    return (_suffix_sum(xtv) * design.inv_scales).reshape(T * n)


@dataclass(frozen=True, eq=False)
class GroupColumns:
    """The scaled column block of one period group."""

    design: DifferenceDesign
    t: int

    @property
    def gram(self) -> NDArray:
        return self.design.group_gram(self.t)

    @property
    def lipschitz(self) -> float:
        return float(self.design.group_lipschitz[self.t - 1])

    def matvec(self, u: ArrayLike) -> NDArray:
        T, m, n = self.design.panel.shape
        u = np.asarray(u, dtype=float).reshape(n) * self.design.inv_scales[self.t - 1]
        out = np.zeros((T, m))
        out[self.t - 1 :] = self.design.panel.design_blocks[self.t - 1 :] @ u
        return out.reshape(T * m)

    def rmatvec(self, v: ArrayLike) -> NDArray:
        T, m, n = self.design.panel.shape
        v = _as_groups(v, T, m, "v")
        X = self.design.panel.design_blocks
        acc = np.einsum("tmn,tm->n", X[self.t - 1 :], v[self.t - 1 :])
        return acc * self.design.inv_scales[self.t - 1]


def group_columns(design: DifferenceDesign, t: int) -> GroupColumns:
    """Columns of 1-based group ``t``: ``u -> (0, ..., 0, X_t u, ..., X_T u)``."""
    _check_period(t, design.periods)
    return GroupColumns(design, t)


def as_linear_operator(design: DifferenceDesign) -> LinearOperator:
    """Wrap the design as a :class:`scipy.sparse.linalg.LinearOperator`."""
    return LinearOperator(
        shape=design.shape,
        matvec=lambda x: apply(design, x),
        rmatvec=lambda v: apply_adjoint(design, v),
        dtype=float,
    )
