"""Time-varying linear regression panels and coefficient paths.

A panel holds ``T`` periods of observations ``y_t = X_t beta_t + u_t`` with
``X_t`` of shape ``(m, n)``. The error ``u_t`` is never stored; residuals are
computed on demand by the modules that need them.

Period indices in the public API are 1-based (``1..T``); arrays are indexed
from 0 as usual, so period ``t`` lives in row ``t - 1``.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from sparsebreaks.errors import DimensionMismatch, EmptyPanel, NonFiniteEntry

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

__all__ = [
    "RegressionPanel",
    "CoefficientPath",
    "validate_panel",
    "reconstruct_path",
    "difference_path",
]


def _frozen(a: NDArray) -> NDArray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _label_key(label: Any) -> Any:
    if isinstance(label, str):
        try:
            return (0, _dt.date.fromisoformat(label))
        except ValueError:
            return (1, label)
    if isinstance(label, (_dt.date, _dt.datetime)):
        return (0, label)
    return (0, label)


@dataclass(frozen=True)
class RegressionPanel:
    """Sequence ``{(X_t, y_t)}`` of a time-varying linear regression.

    Parameters
    ----------
    design_blocks : array_like, shape (T, m, n)
        The per-period design matrices ``X_t``.
    responses : array_like, shape (T, m)
        The per-period responses ``y_t``.
    period_labels : sequence, optional
        ``T`` labels (ISO dates or integers), strictly increasing. Metadata
        only; no computation depends on them.

    Use :func:`validate_panel` (or :meth:`from_blocks`) to check the
    invariants; the raw constructor only coerces arrays.
    """

    design_blocks: NDArray
    responses: NDArray
    period_labels: tuple | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "design_blocks", _frozen(self.design_blocks))
        object.__setattr__(self, "responses", _frozen(self.responses))
        if self.period_labels is not None:
            object.__setattr__(self, "period_labels", tuple(self.period_labels))

    @classmethod
    def from_blocks(
        cls,
        design_blocks: Sequence[ArrayLike],
        responses: Sequence[ArrayLike],
        period_labels: Sequence | None = None,
    ) -> RegressionPanel:
        """Build a panel from per-period blocks and validate it.

        Ragged inputs raise :class:`DimensionMismatch` instead of producing
        an object array.
        """
        blocks = [np.atleast_2d(np.asarray(X, dtype=float)) for X in design_blocks]
        ys = [np.atleast_1d(np.asarray(y, dtype=float)) for y in responses]
        if len(blocks) == 0:
            raise EmptyPanel("panel has no periods")
        if len(blocks) != len(ys):
            raise DimensionMismatch(
                f"{len(blocks)} design blocks but {len(ys)} response vectors"
            )
        shape = blocks[0].shape
        for t, (X, y) in enumerate(zip(blocks, ys), start=1):
            if X.ndim != 2 or X.shape != shape:
                raise DimensionMismatch(
                    f"X_{t} has shape {X.shape}, expected {shape}"
                )
            if y.shape != (shape[0],):
                raise DimensionMismatch(
                    f"y_{t} has length {y.shape}, expected ({shape[0]},)"
                )
        panel = cls(np.stack(blocks), np.stack(ys), period_labels)
        return validate_panel(panel)

    @property
    def periods(self) -> int:
        return self.design_blocks.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.design_blocks.shape[1]

    @property
    def coef_dim(self) -> int:
        return self.design_blocks.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        """``(T, m, n)``."""
        return self.design_blocks.shape

    def label(self, t: int) -> Any:
        """Label of 1-based period ``t``, or ``t`` itself when unlabeled."""
        if self.period_labels is None:
            return t
        return self.period_labels[t - 1]

    def residuals(self, betas: ArrayLike) -> NDArray:
        """``y_t - X_t beta_t`` for a ``(T, n)`` (or broadcastable) path."""
        betas = np.broadcast_to(np.asarray(betas, dtype=float), (self.periods, self.coef_dim))
        return self.responses - np.einsum("tmn,tn->tm", self.design_blocks, betas)


def validate_panel(panel: RegressionPanel) -> RegressionPanel:
    """Check the panel invariants and return the panel unchanged.

    Raises
    ------
    EmptyPanel
        If ``T == 0``.
    DimensionMismatch
        If the design and response arrays disagree in shape, or the labels
        do not have length ``T``.
    NonFiniteEntry
        If any entry is NaN or infinite.
    ValueError
        If labels are not strictly increasing.
    """
    X, y = panel.design_blocks, panel.responses
    if X.ndim != 3:
        raise DimensionMismatch(f"design blocks must be (T, m, n), got shape {X.shape}")
    T, m, n = X.shape
    if T == 0:
        raise EmptyPanel("panel has no periods")
    if m == 0 or n == 0:
        raise DimensionMismatch(f"design blocks have empty shape {(m, n)}")
    if y.shape != (T, m):
        raise DimensionMismatch(f"responses have shape {y.shape}, expected {(T, m)}")
    if not np.all(np.isfinite(X)):
        t = int(np.argwhere(~np.isfinite(X))[0, 0]) + 1
        raise NonFiniteEntry(f"X_{t} contains a non-finite entry")
    if not np.all(np.isfinite(y)):
        t = int(np.argwhere(~np.isfinite(y))[0, 0]) + 1
        raise NonFiniteEntry(f"y_{t} contains a non-finite entry")
    labels = panel.period_labels
    if labels is not None:
        if len(labels) != T:
            raise DimensionMismatch(f"{len(labels)} period labels for {T} periods")
        keys = [_label_key(lab) for lab in labels]
        for i in range(1, T):
            if not keys[i - 1] < keys[i]:
                raise ValueError(
                    f"period labels not strictly increasing at period {i + 1}: "
                    f"{labels[i - 1]!r} >= {labels[i]!r}"
                )
    return panel


@dataclass(frozen=True)
class CoefficientPath:
    """Baseline ``beta0``, per-period increments and the cumulated path.

    ``betas[t] == beta0 + deltas[:t + 1].sum(0)`` holds for every row.
    """

    beta0: NDArray
    deltas: NDArray
    betas: NDArray = field(repr=False)

    def __post_init__(self) -> None:
        for name in ("beta0", "deltas", "betas"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def periods(self) -> int:
        return self.deltas.shape[0]


def reconstruct_path(beta0: ArrayLike, deltas: ArrayLike) -> CoefficientPath:
    """Cumulate increments onto a baseline.

    Parameters
    ----------
    beta0 : array_like, shape (n,)
    deltas : array_like, shape (T, n)

    Returns
    -------
    CoefficientPath
        With ``betas[t] = beta0 + sum(deltas[:t+1])``.
    """
    beta0 = np.asarray(beta0, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    if beta0.ndim != 1:
        raise DimensionMismatch(f"beta0 must be a vector, got shape {beta0.shape}")
    if deltas.ndim == 1 and beta0.shape[0] == 1:
        deltas = deltas[:, None]
    if deltas.ndim != 2 or deltas.shape[1] != beta0.shape[0]:
        raise DimensionMismatch(
            f"deltas have shape {deltas.shape}, expected (T, {beta0.shape[0]})"
        )
    betas = beta0 + np.cumsum(deltas, axis=0)
    return CoefficientPath(beta0, deltas, betas)


def difference_path(beta0: ArrayLike, betas: ArrayLike) -> NDArray:
    """Inverse of :func:`reconstruct_path`: first differences with ``beta0`` prepended."""
    beta0 = np.asarray(beta0, dtype=float)
    betas = np.asarray(betas, dtype=float)
    return np.diff(np.vstack([beta0[None, :], betas]), axis=0)
