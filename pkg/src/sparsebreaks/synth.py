"""Seeded synthetic panels and VEC series with planted parameter jumps.

All randomness comes from numpy's ``Philox`` counter-based bit generator
(Philox4x64-10) wrapped in ``numpy.random.Generator``, keyed by the scenario
seed, so equal seeds give bit-identical data on every platform numpy
supports. Draw order is fixed and documented per generator.

Reference vectors for ``Generator(Philox(0))`` are pinned in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal

import numpy as np

from sparsebreaks.errors import InvalidSchedule, UnstableSystem
from sparsebreaks.panel import CoefficientPath, RegressionPanel, reconstruct_path, validate_panel

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

__all__ = [
    "make_rng",
    "SyntheticScenario",
    "generate_panel",
    "VecScenario",
    "VecTruth",
    "generate_vecm",
    "vecm_companion",
    "stationary_radius",
]

STABILITY_BOUND = 0.98


def make_rng(seed: int) -> np.random.Generator:
    """The package's only source of randomness."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class SyntheticScenario:
    """A panel with piecewise-constant coefficients.

    ``jump_schedule`` holds ``(period, jump)`` pairs with ``1 < period <= T``;
    ``beta_t = base_beta + sum of jumps at periods <= t``. A missing
    ``base_beta`` is drawn standard normal.
    """

    seed: int
    periods: int
    obs_dim: int
    coef_dim: int
    jump_schedule: Sequence[tuple[int, ArrayLike]] = ()
    base_beta: ArrayLike | None = None
    noise_scale: float = 1.0
    design: Literal["normal", "constant"] = "normal"


def _schedule_deltas(schedule, T: int, shape: tuple[int, ...]) -> NDArray:
    deltas = np.zeros((T, *shape))
    for period, jump in schedule:
        if not (isinstance(period, (int, np.integer)) and 1 < period <= T):
            raise InvalidSchedule(f"jump period {period!r} not in (1, {T}]")
        jump = np.asarray(jump, dtype=float)
        if jump.shape != shape:
            raise InvalidSchedule(f"jump at period {period} has shape {jump.shape}, expected {shape}")
        deltas[period - 1] += jump
    return deltas


def generate_panel(scenario: SyntheticScenario) -> tuple[RegressionPanel, CoefficientPath]:
    """Draw a panel and return it with its true coefficient path.

    Draw order: design blocks ``(T, m, n)`` (skipped for the constant
    design), then ``base_beta`` if not given, then noise ``(T, m)``.
    """
    T, m, n = scenario.periods, scenario.obs_dim, scenario.coef_dim
    if T < 1 or m < 1 or n < 1:
        raise InvalidSchedule(f"bad dimensions T={T}, m={m}, n={n}")
    if scenario.noise_scale < 0:
        raise InvalidSchedule("noise_scale must be nonnegative")
    deltas = _schedule_deltas(scenario.jump_schedule, T, (n,))
    rng = make_rng(scenario.seed)
    if scenario.design == "normal":
        X = rng.standard_normal((T, m, n))
    elif scenario.design == "constant":
        X = np.ones((T, m, n))
    else:
        raise InvalidSchedule(f"unknown design distribution {scenario.design!r}")
    if scenario.base_beta is None:
        beta0 = rng.standard_normal(n)
    else:
        beta0 = np.asarray(scenario.base_beta, dtype=float)
        if beta0.shape != (n,):
            raise InvalidSchedule(f"base_beta has shape {beta0.shape}, expected ({n},)")
    truth = reconstruct_path(beta0, deltas)
    noise = rng.standard_normal((T, m))
    y = np.einsum("tmn,tn->tm", X, truth.betas) + scenario.noise_scale * noise
    return validate_panel(RegressionPanel(X, y)), truth


@dataclass(frozen=True)
class VecScenario:
    """A VEC process ``dX_t = sum G_i dX_{t-i} + Pi_t X_{t-k} + mu + u_t``.

    ``pi_jumps`` holds ``(period, dPi)`` pairs indexed like the regression
    panel built from the returned series: period ``p`` is series row
    ``k + p`` and ``1 < p <= length - k - 1``. Innovations are
    ``noise_scale * noise_chol @ eps`` with standard normal ``eps``;
    ``noise_chol`` defaults to the identity.
    """

    seed: int
    gammas: ArrayLike
    pi: ArrayLike
    length: int
    mu: ArrayLike | None = None
    pi_jumps: Sequence[tuple[int, ArrayLike]] = ()
    noise_scale: float = 1.0
    burn_in: int = 100
    noise_chol: ArrayLike | None = None

    @property
    def lag_order(self) -> int:
        return np.asarray(self.gammas).shape[0]

    @property
    def dim(self) -> int:
        return np.asarray(self.pi).shape[0]


@dataclass(frozen=True, eq=False)
class VecTruth:
    gammas: NDArray
    mu: NDArray
    pis: NDArray = field(repr=False)
    pi_deltas: NDArray = field(repr=False)


def vecm_companion(gammas: ArrayLike, pi: ArrayLike) -> NDArray:
    """Companion matrix of the levels VAR(k+1) implied by the VEC model."""
    gammas = np.asarray(gammas, dtype=float)
    pi = np.asarray(pi, dtype=float)
    k, m, _ = gammas.shape
    A = np.zeros((k + 1, m, m))
    A[0] += np.eye(m)
    for j in range(1, k + 2):
        if j <= k:
            A[j - 1] += gammas[j - 1]
        if j >= 2:
            A[j - 1] -= gammas[j - 2]
    A[k - 1] += pi
    p = m * (k + 1)
    comp = np.zeros((p, p))
    comp[:m] = np.hstack(list(A))
    comp[m:, :-m] = np.eye(p - m)
    return comp


def stationary_radius(gammas: ArrayLike, pi: ArrayLike, rank_tol: float = 1e-10) -> float:
    """Spectral radius after removing the ``m - rank(Pi)`` unit roots.

    A cointegrated system always carries those unit roots; stability is about
    the remaining eigenvalues.
    """
    pi = np.asarray(pi, dtype=float)
    m = pi.shape[0]
    s = np.linalg.svd(pi, compute_uv=False)
    rank = int(np.sum(s > rank_tol * max(1.0, s[0] if s.size else 0.0)))
    eig = np.linalg.eigvals(vecm_companion(gammas, pi))
    drop = np.argsort(np.abs(eig - 1.0))[: m - rank]
    rest = np.delete(eig, drop)
    return float(np.max(np.abs(rest))) if rest.size else 0.0


def generate_vecm(scenario: VecScenario) -> tuple[NDArray, VecTruth]:
    """Simulate the process and return ``(series, truth)``.

    Draw order: the ``k + 1`` starting levels (standard normal), then one
    innovation vector per simulated step, burn-in first. The first
    ``burn_in`` simulated rows are discarded; the returned series has
    ``length`` rows and ``truth.pis[p - 1]`` is the long-run matrix in force
    at panel period ``p``.

    Raises
    ------
    UnstableSystem
        If any regime's stationary radius is at least 0.98.
    """
    gammas = np.asarray(scenario.gammas, dtype=float)
    pi = np.asarray(scenario.pi, dtype=float)
    if gammas.ndim != 3:
        raise InvalidSchedule(f"gammas must be (k, m, m), got shape {gammas.shape}")
    k, m, _ = gammas.shape
    if pi.shape != (m, m):
        raise InvalidSchedule(f"pi has shape {pi.shape}, expected {(m, m)}")
    mu = np.zeros(m) if scenario.mu is None else np.asarray(scenario.mu, dtype=float)
    N = scenario.length
    T = N - k - 1
    if T < 1:
        raise InvalidSchedule(f"length {N} leaves no usable periods for lag order {k}")
    pi_deltas = _schedule_deltas(scenario.pi_jumps, T, (m, m))
    pis = pi + np.cumsum(pi_deltas, axis=0)

    for regime in [pi, *(pis[p - 1] for p, _ in scenario.pi_jumps)]:
        radius = stationary_radius(gammas, regime)
        if radius >= STABILITY_BOUND:
            raise UnstableSystem(f"stationary spectral radius {radius:.4f} >= {STABILITY_BOUND}")

    rng = make_rng(scenario.seed)
    B = scenario.burn_in
    total = B + N
    x = np.zeros((total, m))
    start = rng.standard_normal((k + 1, m))
    x[: k + 1] = start
    innov = rng.standard_normal((total, m)) * scenario.noise_scale
    if scenario.noise_chol is not None:
        chol = np.asarray(scenario.noise_chol, dtype=float)
        if chol.shape != (m, m):
            raise InvalidSchedule(f"noise_chol has shape {chol.shape}, expected {(m, m)}")
        innov = innov @ chol.T
    dx = np.zeros((total, m))
    dx[1 : k + 1] = np.diff(start, axis=0)
    for t in range(k + 1, total):
        p = t - B - k  # panel period of row t in the kept series
        current = pis[p - 1] if p >= 1 else pi
        step = current @ x[t - k] + mu + innov[t]
        for i in range(1, k + 1):
            step += gammas[i - 1] @ dx[t - i]
        dx[t] = step
        x[t] = x[t - 1] + step
    truth = VecTruth(gammas=gammas, mu=mu, pis=pis, pi_deltas=pi_deltas)
    return x[B:], truth
