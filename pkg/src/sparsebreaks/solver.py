"""Group-LASSO solver for the difference form, one group per period.

Minimizes, in the scaled coordinates ``z`` of a :class:`DifferenceDesign`,

    0.5 * ||r_hat - Xd_hat @ z||^2 + lam * sum_t w_t * ||z_t||_2

by cyclic block proximal coordinate descent with per-group step ``1 / L_t``.

A block update needs the gradient block ``g_t = D_t sum_{s>=t} X_s.T e_s`` of
the current residual ``e``. With ``b_{t-1} = sum_{tau<t} d_tau`` (``d = D z``)
and ``q_t = sum_{tau>=t} S_tau d_tau`` this is

    g_t = D_t (S_t b_{t-1} + q_t - c_t),    c_t = sum_{s>=t} X_s.T r_hat_s

so one ordered pass over the groups costs ``O(T n^2)`` and never touches the
``mT x nT`` design.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Literal, Union

import numpy as np
from numba import njit

from sparsebreaks.errors import DegenerateDesign, NoMatchingLambda, NotConvergedWarning, ZeroResidual

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

    from sparsebreaks.diffop import DifferenceDesign, ResidualTarget

__all__ = [
    "SolverConfig",
    "GroupLassoSolution",
    "PathPoint",
    "group_soft_threshold",
    "resolve_weights",
    "lambda_max",
    "gradient_and_objective",
    "kkt_residual",
    "solve",
    "solve_path",
    "lambda_grid",
    "select_lambda",
    "bic_score",
    "ACTIVE_TOL",
]

logger = logging.getLogger(__name__)

_ANDERSON_DEPTH = 5
# consecutive full passes below objective_tol before giving up
_STALL_PATIENCE = 10

# Groups with ||D_t delta_t|| <= ACTIVE_TOL * response_scale are zeroed.
ACTIVE_TOL = 1e-8

Weights = Union[None, Literal["unit", "sqrt_n"], "ArrayLike"]


@dataclass(frozen=True)
class SolverConfig:
    """Penalty level, group weights and stopping rules.

    ``group_weights`` is ``None``/``"unit"`` (all ones), ``"sqrt_n"`` (the
    Yuan-Lin ``sqrt(group size)``) or an explicit length-``T`` array.
    """

    lam: float
    group_weights: Weights = None
    kkt_tol: float = 1e-6
    max_sweeps: int = 10000
    objective_tol: float = 1e-10
    block_update: Literal["exact", "prox"] = "prox"

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not (self.kkt_tol > 0 and self.objective_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.block_update not in ("exact", "prox"):
            raise ValueError(f"unknown block_update {self.block_update!r}")


@dataclass(frozen=True, eq=False)
class GroupLassoSolution:
    """Solver output.

    ``deltas`` are in original units; ``coef`` holds the same point in the
    solver's scaled coordinates. ``objective`` and ``kkt_residual`` refer to
    the scaled problem. ``active_set`` lists 1-based periods.
    """

    lam: float
    deltas: NDArray
    coef: NDArray
    active_set: tuple[int, ...]
    objective: float
    sweeps: int
    kkt_residual: float
    converged: bool
    objective_trace: NDArray = field(repr=False)

    @property
    def n_active(self) -> int:
        return len(self.active_set)


@dataclass(frozen=True, eq=False)
class PathPoint:
    lam: float
    solution: GroupLassoSolution


def group_soft_threshold(v: ArrayLike, tau: float) -> NDArray:
    """Proximal map of ``tau * ||.||_2``: ``max(0, 1 - tau/||v||) * v``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv <= tau or nv == 0.0:
        return np.zeros_like(v)
    return (1.0 - tau / nv) * v


def resolve_weights(weights: Weights, periods: int, group_size: int) -> NDArray:
    if weights is None or (isinstance(weights, str) and weights == "unit"):
        return np.ones(periods)
    if isinstance(weights, str):
        if weights == "sqrt_n":
            return np.full(periods, math.sqrt(group_size))
        raise ValueError(f"unknown weight scheme {weights!r}")
    w = np.asarray(weights, dtype=float)
    if w.shape != (periods,):
        raise ValueError(f"group_weights has shape {w.shape}, expected ({periods},)")
    if not np.all(w > 0):
        raise ValueError("group weights must be positive")
    return w


def _adjoint_target(design: DifferenceDesign, target: ResidualTarget) -> NDArray:
    """``c_t = sum_{s>=t} X_s.T r_hat_s`` (column scaling not applied)."""
    X = design.panel.design_blocks
    xtr = np.einsum("tmn,tm->tn", X, target.scaled_blocks)
    return np.cumsum(xtr[::-1], axis=0)[::-1]


def lambda_max(
    design: DifferenceDesign, target: ResidualTarget, weights: Weights = None
) -> float:
    """Smallest penalty at which the all-zero point satisfies the KKT conditions."""
    T, _, n = design.panel.shape
    w = resolve_weights(weights, T, n)
    g0 = _adjoint_target(design, target) * design.inv_scales
    return float(np.max(np.linalg.norm(g0, axis=1) / w))


def gradient_and_objective(
    design: DifferenceDesign, target: ResidualTarget, z: NDArray, lam: float, w: NDArray
) -> tuple[NDArray, float]:
    """Scaled gradient blocks ``(T, n)`` and penalized objective at ``z``."""
    X = design.panel.design_blocks
    paths = np.cumsum(z * design.inv_scales, axis=0)
    e = np.einsum("tmn,tn->tm", X, paths) - target.scaled_blocks
    xte = np.einsum("tmn,tm->tn", X, e)
    g = np.cumsum(xte[::-1], axis=0)[::-1] * design.inv_scales
    obj = 0.5 * float(np.sum(e * e)) + lam * float(np.sum(w * np.linalg.norm(z, axis=1)))
    return g, obj


def kkt_residual(g: NDArray, z: NDArray, lam: float, w: NDArray, groups: NDArray | None = None) -> float:
    """Largest KKT violation over the groups (all of them by default).

    Inactive groups contribute ``max(0, ||g_t|| - lam w_t)``; active ones
    ``||g_t + lam w_t z_t / ||z_t|| ||``.
    """
    zn = np.linalg.norm(z, axis=1)
    gn = np.linalg.norm(g, axis=1)
    active = zn > 0
    viol = np.maximum(gn - lam * w, 0.0)
    if active.any():
        unit = z[active] / zn[active, None]
        viol[active] = np.linalg.norm(g[active] + (lam * w[active])[:, None] * unit, axis=1)
    if groups is not None:
        viol = viol[groups]
        if viol.size == 0:
            return 0.0
    return float(viol.max())


@njit(cache=True, nogil=True)
def _bcd_pass(z, d, W, S, C, inv_scale, step, thresh, free, visit):  # pragma: no cover - jitted
    T, n = z.shape
    q = np.zeros(n)
    for t in range(T):
        for i in range(n):
            q[i] += W[t, i]
    b = np.zeros(n)
    h = np.empty(n)
    v = np.empty(n)
    for t in range(T):
        if visit[t]:
            for i in range(n):
                acc = q[i] - C[t, i]
                for j in range(n):
                    acc += S[t, i, j] * b[j]
                h[i] = acc
            nv2 = 0.0
            for i in range(n):
                v[i] = (z[t, i] - step[t] * inv_scale[t, i] * h[i]) * free[t, i]
                nv2 += v[i] * v[i]
            nv = math.sqrt(nv2)
            factor = 0.0
            if nv > thresh[t]:
                factor = 1.0 - thresh[t] / nv
            was_zero = True
            for i in range(n):
                if z[t, i] != 0.0:
                    was_zero = False
            for i in range(n):
                q[i] -= W[t, i]
            if not (was_zero and factor == 0.0):
                for i in range(n):
                    z[t, i] = factor * v[i]
                    d[t, i] = inv_scale[t, i] * z[t, i]
                for i in range(n):
                    acc = 0.0
                    for j in range(n):
                        acc += S[t, i, j] * d[t, j]
                    W[t, i] = acc
        else:
            for i in range(n):
                q[i] -= W[t, i]
        for i in range(n):
            b[i] += d[t, i]


@njit(cache=True, nogil=True)
def _secular_root(c, ev, tau):  # pragma: no cover - jitted
    """``mu > 0`` with ``||mu (diag(ev) + mu)^-1 c|| = tau``, given ``||c|| > tau``."""
    n = c.shape[0]
    cn = 0.0
    top = 0.0
    for i in range(n):
        cn += c[i] * c[i]
        if ev[i] > top:
            top = ev[i]
    cn = math.sqrt(cn)
    lo = 0.0
    hi = tau * top / (cn - tau) + 1e-300
    mu = hi
    for _ in range(200):
        s2 = 0.0
        ds = 0.0
        for i in range(n):
            den = ev[i] + mu
            a = mu * c[i] / den
            s2 += a * a
            ds += a * c[i] * ev[i] / (den * den)
        s = math.sqrt(s2)
        f = s - tau
        if f > 0.0:
            hi = mu
        else:
            lo = mu
        if abs(f) <= 1e-15 * tau or hi - lo <= 1e-15 * hi:
            break
        step_ok = False
        if ds > 0.0 and s > 0.0:
            cand = mu - f * s / ds
            if lo < cand < hi:
                mu = cand
                step_ok = True
        if not step_ok:
            mu = 0.5 * (lo + hi)
    return mu


@njit(cache=True, nogil=True)
def _bcd_pass_exact(z, d, W, S, C, inv_scale, Q, ev, thresh, free, visit):  # pragma: no cover - jitted
    T, n = z.shape
    q = np.zeros(n)
    for t in range(T):
        for i in range(n):
            q[i] += W[t, i]
    b = np.zeros(n)
    lin = np.empty(n)
    c = np.empty(n)
    u = np.empty(n)
    for t in range(T):
        if visit[t]:
            # linear term of the block model: H z_t - g_t = D (W_t - h_t)
            nb2 = 0.0
            for i in range(n):
                acc = q[i] - C[t, i]
                for j in range(n):
                    acc += S[t, i, j] * b[j]
                lin[i] = inv_scale[t, i] * (W[t, i] - acc) * free[t, i]
                nb2 += lin[i] * lin[i]
            was_zero = True
            for i in range(n):
                if z[t, i] != 0.0:
                    was_zero = False
            for i in range(n):
                q[i] -= W[t, i]
            if math.sqrt(nb2) <= thresh[t]:
                if not was_zero:
                    for i in range(n):
                        z[t, i] = 0.0
                        d[t, i] = 0.0
                        W[t, i] = 0.0
            else:
                for k in range(n):
                    acc = 0.0
                    for i in range(n):
                        acc += Q[t, i, k] * lin[i]
                    c[k] = acc
                mu = _secular_root(c, ev[t], thresh[t])
                for i in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc += Q[t, i, k] * c[k] / (ev[t, k] + mu)
                    u[i] = acc * free[t, i]
                for i in range(n):
                    z[t, i] = u[i]
                    d[t, i] = inv_scale[t, i] * u[i]
                for i in range(n):
                    acc = 0.0
                    for j in range(n):
                        acc += S[t, i, j] * d[t, j]
                    W[t, i] = acc
        else:
            for i in range(n):
                q[i] -= W[t, i]
        for i in range(n):
            b[i] += d[t, i]


@njit(cache=True, nogil=True)
def _evaluate(X, rhat, inv_scale, z, lam, w, g):  # pragma: no cover - jitted
    """Fill ``g`` with the scaled gradient; return (objective, kkt, kkt_active, kkt_inactive)."""
    T, m, n = X.shape
    path = np.zeros(n)
    xte = np.empty((T, n))
    rss = 0.0
    for t in range(T):
        for j in range(n):
            path[j] += inv_scale[t, j] * z[t, j]
        for j in range(n):
            xte[t, j] = 0.0
        for i in range(m):
            e = -rhat[t, i]
            for j in range(n):
                e += X[t, i, j] * path[j]
            rss += e * e
            for j in range(n):
                xte[t, j] += X[t, i, j] * e
    acc = np.zeros(n)
    pen = 0.0
    k_all = 0.0
    k_act = 0.0
    k_ina = 0.0
    for t in range(T - 1, -1, -1):
        zn2 = 0.0
        gn2 = 0.0
        for j in range(n):
            acc[j] += xte[t, j]
            g[t, j] = acc[j] * inv_scale[t, j]
            zn2 += z[t, j] * z[t, j]
            gn2 += g[t, j] * g[t, j]
        zn = math.sqrt(zn2)
        pen += w[t] * zn
        if zn > 0.0:
            v2 = 0.0
            for j in range(n):
                a = g[t, j] + lam * w[t] * z[t, j] / zn
                v2 += a * a
            viol = math.sqrt(v2)
            if viol > k_act:
                k_act = viol
        else:
            viol = math.sqrt(gn2) - lam * w[t]
            if viol > k_ina:
                k_ina = viol
        if viol > k_all:
            k_all = viol
    return 0.5 * rss + lam * pen, k_all, k_act, k_ina


def _anderson(history: list[NDArray]) -> NDArray | None:
    """Extrapolate a window of iterates (Anderson acceleration, depth ``len - 1``)."""
    Z = np.stack([h.ravel() for h in history])
    U = np.diff(Z, axis=0)
    gram = U @ U.T
    scale = np.trace(gram)
    if not scale > 0:
        return None
    try:
        c = np.linalg.solve(gram + 1e-12 * scale * np.eye(gram.shape[0]), np.ones(gram.shape[0]))
    except np.linalg.LinAlgError:
        return None
    total = c.sum()
    if not np.isfinite(total) or total == 0.0:
        return None
    c /= total
    return (c @ Z[1:]).reshape(history[0].shape)


def _group_eigh(design: DifferenceDesign) -> tuple[NDArray, NDArray]:
    inv = design.inv_scales
    grams = inv[:, :, None] * design.suffix_grams * inv[:, None, :]
    ev, Q = np.linalg.eigh(grams)
    return np.clip(ev, 0.0, None), np.ascontiguousarray(Q)


def _prune_dust(design: DifferenceDesign, z: NDArray) -> NDArray:
    contribution = np.linalg.norm(z * design.inv_scales * design.column_scales, axis=1)
    if design.normalize:
        contribution = contribution * design.response_scale
    small = contribution <= ACTIVE_TOL * design.response_scale
    small &= np.any(z != 0.0, axis=1)
    if small.any():
        z = z.copy()
        z[small] = 0.0
    return z


def solve(
    design: DifferenceDesign,
    target: ResidualTarget,
    config: SolverConfig,
    warm_start: ArrayLike | None = None,
) -> GroupLassoSolution:
    """Solve the group-LASSO problem at ``config.lam``.

    Each outer iteration is one full cyclic pass over ``t = 1..T`` followed by
    passes restricted to the currently nonzero groups until they settle. Every
    pass counts as a sweep. The loop stops once the KKT residual is at most
    ``kkt_tol * lam``, after ten consecutive full passes that each improve the
    objective by less than ``objective_tol`` (relative), or after
    ``max_sweeps`` sweeps.

    ``converged`` is true only when the KKT certificate holds; otherwise a
    :class:`NotConvergedWarning` is emitted and the last iterate is returned.

    Parameters
    ----------
    warm_start : array_like, shape (T, n), optional
        Increments in original units, e.g. ``deltas`` of a previous solution.
    """
    T, _, n = design.panel.shape
    lam = float(config.lam)
    w = resolve_weights(config.group_weights, T, n)
    free = (~design.inert).astype(float)
    inv = np.ascontiguousarray(design.inv_scales)
    S = np.ascontiguousarray(design.suffix_grams)
    C = np.ascontiguousarray(_adjoint_target(design, target))
    if config.block_update == "prox":
        step = 1.0 / design.group_lipschitz
        thresh = lam * w * step

        def sweep(visit):
            _bcd_pass(z, d, W, S, C, inv, step, thresh, free, visit)
    else:
        ev, Q = _group_eigh(design)
        thresh_exact = lam * w

        def sweep(visit):
            _bcd_pass_exact(z, d, W, S, C, inv, Q, ev, thresh_exact, free, visit)

    if warm_start is None:
        z = np.zeros((T, n))
    else:
        z = design.rescale(np.asarray(warm_start, dtype=float).reshape(T, n)) * free
    d = z * inv
    W = np.einsum("tij,tj->ti", S, d)

    tol = config.kkt_tol * lam
    X = design.panel.design_blocks
    rhat = np.ascontiguousarray(target.scaled_blocks)
    g = np.empty((T, n))
    g_acc = np.empty((T, n))
    all_groups = np.ones(T, dtype=np.bool_)
    obj, kkt, kkt_act, kkt_ina = _evaluate(X, rhat, inv, z, lam, w, g)
    trace = [obj]
    sweeps = 0
    full_mode = True
    last_full = obj
    stalled = 0
    history = [z.copy()]
    while kkt > tol and sweeps < config.max_sweeps:
        visit = all_groups if full_mode else np.any(z != 0.0, axis=1)
        sweep(visit)
        sweeps += 1
        obj, kkt, kkt_act, kkt_ina = _evaluate(X, rhat, inv, z, lam, w, g)
        history.append(z.copy())
        if len(history) == _ANDERSON_DEPTH + 1:
            z_acc = _anderson(history)
            if z_acc is not None:
                z_acc *= free
                res = _evaluate(X, rhat, inv, z_acc, lam, w, g_acc)
                if res[0] < obj:
                    z[:] = z_acc
                    d[:] = z * inv
                    W[:] = np.einsum("tij,tj->ti", S, d)
                    g, g_acc = g_acc, g
                    obj, kkt, kkt_act, kkt_ina = res
            history = [z.copy()]
        trace.append(obj)
        if kkt <= tol:
            break
        if full_mode:
            if last_full - obj <= config.objective_tol * max(abs(obj), 1e-300):
                stalled += 1
                if stalled >= _STALL_PATIENCE:
                    break
            else:
                stalled = 0
            last_full = obj
            if kkt_ina <= tol and np.any(z != 0.0):
                full_mode = False
                history = [z.copy()]
        elif kkt_act <= 0.5 * tol or kkt_ina > tol:
            full_mode = True
            history = [z.copy()]

    pruned = _prune_dust(design, z)
    if pruned is not z:
        z = pruned
        obj, kkt, _, _ = _evaluate(X, rhat, inv, z, lam, w, g)
    converged = kkt <= tol
    if not converged:
        warnings.warn(
            f"group lasso at lam={lam:.6g} stopped after {sweeps} sweeps with "
            f"KKT residual {kkt:.3g} > {tol:.3g}",
            NotConvergedWarning,
            stacklevel=2,
        )
    deltas = design.unscale(z)
    active_set = tuple(int(t) + 1 for t in np.flatnonzero(np.any(z != 0.0, axis=1)))
    return GroupLassoSolution(
        lam=lam,
        deltas=deltas,
        coef=z,
        active_set=active_set,
        objective=obj,
        sweeps=sweeps,
        kkt_residual=kkt,
        converged=converged,
        objective_trace=np.asarray(trace),
    )


def lambda_grid(lam_max: float, num_lambdas: int = 50, min_ratio: float = 0.01) -> NDArray:
    """Log-spaced decreasing grid from ``lam_max`` to ``min_ratio * lam_max``."""
    if num_lambdas < 1:
        raise ValueError("num_lambdas must be at least 1")
    if not 0 < min_ratio <= 1:
        raise ValueError("min_ratio must be in (0, 1]")
    if num_lambdas == 1:
        return np.array([lam_max])
    return lam_max * np.logspace(0.0, math.log10(min_ratio), num_lambdas)


def solve_path(
    design: DifferenceDesign,
    target: ResidualTarget,
    config_base: SolverConfig | None = None,
    num_lambdas: int = 50,
    min_ratio: float = 0.01,
    n_jobs: int = 1,
    stop_at_size: int | None = None,
) -> list[PathPoint]:
    """Solutions along a decreasing log grid of penalties.

    Sequential mode (``n_jobs == 1``) warm-starts each point from the
    previous one. With ``n_jobs > 1`` the points are solved cold on a thread
    pool over the shared read-only design.

    ``stop_at_size=k`` ends a sequential path at the first point with at
    least ``k`` active groups. The first point with exactly ``k`` is the
    largest such penalty on the grid, so ``select_lambda(path, ..., k)``
    gives the same answer as on the full path.

    ``config_base.lam`` is ignored; the other settings are reused.

    Raises
    ------
    ZeroResidual
        If the residual target is zero.
    DegenerateDesign
        If the residual is nonzero but orthogonal to every column.
    """
    T, _, n = design.panel.shape
    if config_base is None:
        config_base = SolverConfig(lam=1.0)
    lam_max = lambda_max(design, target, config_base.group_weights)
    if lam_max <= 0.0:
        if np.any(target.r):
            raise DegenerateDesign("the residual is orthogonal to every column; no penalty selects a break")
        raise ZeroResidual("residual target is zero; every penalty gives the zero solution")
    grid = lambda_grid(lam_max, num_lambdas, min_ratio)

    if n_jobs > 1:
        def run(lam: float) -> PathPoint:
            return PathPoint(lam, solve(design, target, replace(config_base, lam=float(lam))))

        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(run, grid))

    path = []
    warm = None
    for lam in grid:
        sol = solve(design, target, replace(config_base, lam=float(lam)), warm_start=warm)
        logger.debug(
            "lam=%.6g active=%d sweeps=%d kkt=%.3g", lam, sol.n_active, sol.sweeps, sol.kkt_residual
        )
        path.append(PathPoint(float(lam), sol))
        warm = sol.deltas
        if stop_at_size is not None and sol.n_active >= stop_at_size:
            break
    return path


def bic_score(design: DifferenceDesign, target: ResidualTarget, solution: GroupLassoSolution) -> float:
    """``mT log(RSS / mT) + log(mT) df`` with ``df = n + nnz(deltas)``.

    RSS is measured in original units.
    """
    T, m, n = design.panel.shape
    N = m * T
    paths = np.cumsum(solution.deltas, axis=0)
    fitted = np.einsum("tmn,tn->tm", design.panel.design_blocks, paths)
    rss = float(np.sum((target.blocks - fitted) ** 2))
    rss = max(rss, np.finfo(float).tiny)
    df = n + int(np.count_nonzero(solution.deltas))
    return N * math.log(rss / N) + math.log(N) * df


def select_lambda(
    path: Sequence[PathPoint],
    design: DifferenceDesign,
    target: ResidualTarget,
    criterion: Literal["bic"] | int = "bic",
) -> PathPoint:
    """Pick a path point by BIC or by a fixed active-set size.

    An integer ``criterion`` k selects the largest penalty whose active set
    has exactly k groups and raises :class:`NoMatchingLambda` if none does.
    """
    if len(path) == 0:
        raise ValueError("empty path")
    if criterion == "bic":
        scores = [bic_score(design, target, p.solution) for p in path]
        return path[int(np.argmin(scores))]
    if isinstance(criterion, (int, np.integer)) and not isinstance(criterion, bool):
        k = int(criterion)
        hits = [p for p in path if p.solution.n_active == k]
        if not hits:
            sizes = sorted({p.solution.n_active for p in path})
            raise NoMatchingLambda(f"no penalty on the grid gives {k} active groups (sizes seen: {sizes})")
        return max(hits, key=lambda p: p.lam)
    raise ValueError(f"unknown criterion {criterion!r}")
