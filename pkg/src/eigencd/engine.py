"""Coordinate-descent iteration engine for the leading-eigenvalue objective.

All strategies minimize ``f(x) = ||A - x x^T||_F^2`` by composing a
coordinate-pick rule with a coordinate-update rule.  The engine maintains
``z = A x``, ``nu = ||x||^2`` and ``s = x^T z`` incrementally so that a
single-coordinate step costs one column access plus O(n) vector work, and
the objective gap is available in O(1) at every iteration.

Exact line search along coordinate j minimizes the quartic
``h(a) = f(x + a e_j)``, whose critical points are the real roots of the
monic cubic ``a^3 + b a^2 + c a + d`` with

    b = 3 x_j,  c = nu + 2 x_j^2 - A_jj,  d = nu x_j - z_j.

Substituting ``beta = x_j + a`` turns this into the depressed cubic
``beta^3 + p beta + q`` with ``p = nu - x_j^2 - A_jj`` and
``q = A_jj x_j - z_j``; its root is the new coordinate *value*, so both
forms produce identical updates.  Root selection: a lone real root wins; of
three real roots the two outer ones are line minima and the one farther
from the middle root is strictly lower (the gap is
``(u - w)(u + w)^3 / 3`` for inner spacings u, w), so picking the lower
quartic value with ties to the smaller root realizes that rule exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .operators import Column, ColumnOracle, column_norm_max

_TWO_PI_3 = 2.0 * np.pi / 3.0


class StationaryIterate(Exception):
    """All coordinate scores vanished; the iterate is a stationary point."""


class PowerIterationBreakdown(Exception):
    """Power step hit a zero vector (x = 0 or A x = 0)."""


class CubicCoeffs(NamedTuple):
    """Monic cubic ``a^3 + b a^2 + c a + d`` (the scaled quartic slope)."""

    b: float
    c: float
    d: float


def _cubic_value(alpha, b, c, d):
    return d + alpha * (c + alpha * (b + alpha))


def _quartic_gain(alpha, b, c, d):
    # f(x + a e_j) - f(x) for coefficients from coord_cubic
    return alpha * (4.0 * d + alpha * (2.0 * c + alpha * (4.0 / 3.0 * b + alpha)))


def _newton_polish(alpha, b, c, d, iterations=2):
    for _ in range(iterations):
        slope = c + alpha * (2.0 * b + 3.0 * alpha)
        val = _cubic_value(alpha, b, c, d)
        step = np.divide(val, slope, out=np.zeros_like(alpha),
                         where=np.abs(slope) > 0)
        alpha = alpha - step
    return alpha


def cubic_min_roots(b, c, d):
    """Vectorized minimizing real root of ``a^3 + b a^2 + c a + d = 0``.

    Closed forms (Cardano / trigonometric) seeded into two Newton steps on
    the monic cubic; with three real roots the candidate with the lower
    associated quartic gain wins, exact ties to the smaller root.
    """
    b, c, d = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float))
                                    for v in (b, c, d)))
    shift = b / 3.0
    p = c - b * shift
    q = shift * (2.0 * shift * shift - c) + d
    disc = 0.25 * q * q + p * p * p / 27.0

    out = np.empty_like(p)
    single = disc > 0
    if np.any(single):
        s = np.sqrt(disc[single])
        half_q = 0.5 * q[single]
        y = np.cbrt(-half_q + s) + np.cbrt(-half_q - s)
        out[single] = _newton_polish(y - shift[single],
                                     b[single], c[single], d[single])
    multi = ~single
    if np.any(multi):
        pm, qm = p[multi], q[multi]
        m = 2.0 * np.sqrt(np.maximum(-pm / 3.0, 0.0))
        denom = pm * m
        ratio = np.divide(3.0 * qm, denom, out=np.zeros_like(qm),
                          where=denom != 0)
        theta = np.arccos(np.clip(ratio, -1.0, 1.0)) / 3.0
        big = m * np.cos(theta)
        small = m * np.cos(theta - 2.0 * _TWO_PI_3)
        bm, cm, dm = b[multi], c[multi], d[multi]
        r_hi = _newton_polish(big - shift[multi], bm, cm, dm)
        r_lo = _newton_polish(small - shift[multi], bm, cm, dm)
        gain_hi = _quartic_gain(r_hi, bm, cm, dm)
        gain_lo = _quartic_gain(r_lo, bm, cm, dm)
        out[multi] = np.where(gain_hi < gain_lo, r_hi, r_lo)
    return out


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _polish_scalar(alpha: float, b: float, c: float, d: float) -> float:
    for _ in range(2):
        slope = c + alpha * (2.0 * b + 3.0 * alpha)
        if slope == 0.0:
            break
        alpha -= (d + alpha * (c + alpha * (b + alpha))) / slope
    return alpha


def solve_cubic_min(coeffs: CubicCoeffs) -> float:
    """Scalar twin of :func:`cubic_min_roots` (pure math, hot-loop cheap)."""
    b, c, d = float(coeffs.b), float(coeffs.c), float(coeffs.d)
    shift = b / 3.0
    p = c - b * shift
    q = shift * (2.0 * shift * shift - c) + d
    disc = 0.25 * q * q + p * p * p / 27.0
    if disc > 0:
        s = math.sqrt(disc)
        y = _cbrt(-0.5 * q + s) + _cbrt(-0.5 * q - s)
        return _polish_scalar(y - shift, b, c, d)
    m = 2.0 * math.sqrt(max(-p / 3.0, 0.0))
    denom = p * m
    ratio = 3.0 * q / denom if denom != 0.0 else 0.0
    theta = math.acos(min(1.0, max(-1.0, ratio))) / 3.0
    r_hi = _polish_scalar(m * math.cos(theta) - shift, b, c, d)
    r_lo = _polish_scalar(m * math.cos(theta - 2.0 * _TWO_PI_3) - shift, b, c, d)
    if _quartic_gain(r_hi, b, c, d) < _quartic_gain(r_lo, b, c, d):
        return r_hi
    return r_lo


def delta_f(alpha: float, coeffs: CubicCoeffs) -> float:
    """Objective change ``f(x + alpha e_j) - f(x)`` from cached coefficients."""
    return float(_quartic_gain(alpha, coeffs.b, coeffs.c, coeffs.d))


class SolverState:
    """Iterate plus the cached quantities every strategy reads.

    Invariants (restored by :meth:`revalidate`, which also runs
    automatically every n coordinate applications to kill drift):
    ``z == A x``, ``nu == ||x||^2``, ``s == x^T z``.
    """

    __slots__ = ("oracle", "x", "z", "nu", "s", "ell", "rng",
                 "_diag", "_applies")

    def __init__(self, oracle: ColumnOracle, x: np.ndarray, z: np.ndarray,
                 rng: np.random.Generator):
        self.oracle = oracle
        self.x = x
        self.z = z
        self.nu = float(x @ x)
        self.s = float(x @ z)
        self.ell = 0
        self.rng = rng
        self._diag = None
        self._applies = 0

    @property
    def dim(self) -> int:
        return self.x.size

    @property
    def diag_vector(self) -> np.ndarray:
        if self._diag is None:
            self._diag = np.asarray(self.oracle.diag_vector(), dtype=float)
        return self._diag

    def gradient_scores(self) -> np.ndarray:
        """Score vector ``c = nu * x - z``; the gradient is ``4 c``."""
        return self.nu * self.x - self.z

    def revalidate(self) -> None:
        self.nu = float(self.x @ self.x)
        self.s = float(self.x @ self.z)

    def apply_coordinate_delta(self, j: int, alpha: float,
                               column: Column | None = None) -> None:
        """Move coordinate j by alpha and refresh the cached quantities.

        Fetches the column unless one is supplied (the caller then owns the
        accounting).  A zero step still costs its column access.
        """
        if column is None:
            column = self.oracle.column(j)
        rows, vals = column
        x, z = self.x, self.z
        xj_old = x[j]
        zj_old = z[j]
        if rows is None:
            ajj = vals[j]
            if alpha != 0.0:
                z += alpha * vals
        else:
            pos = int(np.searchsorted(rows, j))
            ajj = vals[pos] if pos < rows.size and rows[pos] == j else 0.0
            if alpha != 0.0:
                z[rows] += alpha * vals
        x[j] = xj_old + alpha
        self.nu += alpha * (2.0 * xj_old + alpha)
        self.s += alpha * (2.0 * zj_old + alpha * ajj)
        self._applies += 1
        if self._applies % self.dim == 0:
            self.revalidate()


def init_state(oracle: ColumnOracle, x0: np.ndarray,
               rng: np.random.Generator | int | None = None) -> SolverState:
    """Build a state with ``z = A x0`` paid one column access per nonzero."""
    x = np.array(x0, dtype=float)
    if x.shape != (oracle.dim,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({oracle.dim},)")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    z = np.zeros(oracle.dim)
    for j in np.flatnonzero(x):
        rows, vals = oracle.column(int(j))
        if rows is None:
            z += x[j] * vals
        else:
            z[rows] += x[j] * vals
    return SolverState(oracle, x, z, rng)


@dataclass(frozen=True)
class StrategyConfig:
    """One solver configuration: pick rule x update rule x batching.

    pick    : cyclic | grad_power | gauss_southwell | greedy_ls | all | pm
    update  : fixed_grad | coord_ls | vec_ls (ignored for pm)
    t       : sampling power for grad_power (t = 0 is uniform, 0**0 = 1)
    k       : coordinates updated per iteration
    averaged: divide each batch step by k; keeps k > 1 batches convergent
              at the price of roughly k times more iterations

    Greedy picks (gauss_southwell, greedy_ls) with k > 1 and
    ``averaged=False`` are accepted but frequently oscillate instead of
    converging; the experiment driver's stall detector reports them.
    """

    pick: str
    update: str
    t: float = 1.0
    k: int = 1
    gamma: float | None = None
    with_replacement: bool = True
    averaged: bool = False

    _PICKS = ("cyclic", "grad_power", "gauss_southwell", "greedy_ls", "all", "pm")
    _UPDATES = ("fixed_grad", "coord_ls", "vec_ls")

    def validate(self) -> "StrategyConfig":
        if self.pick not in self._PICKS:
            raise ValueError(f"unknown pick rule {self.pick!r}")
        if self.pick == "pm":
            return self
        if self.update not in self._UPDATES:
            raise ValueError(f"unknown update rule {self.update!r}")
        if self.k < 1:
            raise ValueError("batch size k must be >= 1")
        if self.t < 0:
            raise ValueError("sampling power t must be >= 0")
        if self.update == "fixed_grad" and (self.gamma is None or self.gamma <= 0):
            raise ValueError("fixed_grad update needs a stepsize gamma > 0")
        if self.pick == "greedy_ls" and self.update != "coord_ls":
            raise ValueError("greedy_ls picks its own line-search step; use coord_ls")
        if self.update == "vec_ls" and self.pick not in ("grad_power", "all"):
            raise ValueError("vec_ls needs a sampled or full gradient direction")
        if self.pick == "all" and self.update != "vec_ls":
            raise ValueError("full-direction pick is only used with vec_ls")
        if self.pick in ("cyclic", "gauss_southwell") and self.k != 1:
            raise ValueError(f"{self.pick} updates one coordinate per iteration")
        return self


@dataclass
class StepReport:
    """What one iteration did, for the harness' accounting and traces."""

    indices: np.ndarray
    deltas: np.ndarray
    col_accesses: int
    stationary: bool = False


def pick_cyclic(state: SolverState) -> int:
    return state.ell % state.dim


def pick_gauss_southwell(state: SolverState) -> int:
    """Largest gradient magnitude, ties to the lowest index."""
    return int(np.argmax(np.abs(state.gradient_scores())))


def pick_grad_power(state: SolverState, t: float, k: int = 1,
                    with_replacement: bool = True) -> np.ndarray:
    """Sample k coordinates with probability proportional to ``|c_j|**t``."""
    n = state.dim
    rng = state.rng
    if t == 0:
        if with_replacement:
            return rng.integers(0, n, size=k)
        return rng.choice(n, size=k, replace=False)
    scores = np.abs(state.gradient_scores())
    top = scores.max()
    if top == 0.0 or not np.isfinite(top):
        raise StationaryIterate("gradient scores all zero")
    weights = scores / top  # normalized before powering to dodge overflow
    if t == 2:
        weights = weights * weights
    elif t != 1:
        weights **= t
    if with_replacement:
        cum = np.cumsum(weights)
        draws = rng.random(k) * cum[-1]
        return np.minimum(np.searchsorted(cum, draws, side="right"), n - 1)
    out = np.empty(k, dtype=np.int64)
    weights = weights.copy()
    for i in range(k):
        cum = np.cumsum(weights)
        if cum[-1] <= 0.0:
            raise StationaryIterate("ran out of nonzero scores")
        draw = rng.random() * cum[-1]
        j = min(int(np.searchsorted(cum, draw, side="right")), n - 1)
        out[i] = j
        weights[j] = 0.0
    return out


def coord_cubic(state: SolverState, j: int) -> CubicCoeffs:
    """Line-search cubic along coordinate j; O(1) given cached nu."""
    xj = state.x[j]
    return CubicCoeffs(
        b=3.0 * xj,
        c=state.nu + 2.0 * xj * xj - float(state.oracle.diag(j)),
        d=state.nu * xj - state.z[j],
    )


def _sweep_cubics(state: SolverState):
    x, z, nu = state.x, state.z, state.nu
    b = 3.0 * x
    c = nu + 2.0 * x * x - state.diag_vector
    d = nu * x - z
    alphas = cubic_min_roots(b, c, d)
    gains = _quartic_gain(alphas, b, c, d)
    return alphas, gains


def pick_greedy_ls(state: SolverState) -> tuple[int, float]:
    """Exact line search along every coordinate; best objective drop wins.

    One O(n) sweep over cached quantities and the diagonal; no column
    accesses.  Ties break to the lowest index.
    """
    alphas, gains = _sweep_cubics(state)
    j = int(np.argmin(gains))
    return j, float(alphas[j])


def pick_greedy_ls_batch(state: SolverState, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-k coordinates of the greedy sweep ordered by (gain, index)."""
    alphas, gains = _sweep_cubics(state)
    order = np.lexsort((np.arange(gains.size), gains))[:k]
    return order, alphas[order]


def _vec_ls_direction(state: SolverState, omega: np.ndarray):
    """Exact line search along ``v = grad f`` restricted to omega.

    Fetches each omega column once (counted); returns the optimal alpha,
    the direction values on omega, and the full-length ``w = A v``.
    """
    x, z, nu = state.x, state.z, state.nu
    v = 4.0 * (nu * x[omega] - z[omega])
    w = np.zeros(state.dim)
    for vj, j in zip(v, omega):
        rows, vals = state.oracle.column(int(j))
        if rows is None:
            w += vj * vals
        else:
            w[rows] += vj * vals
    nv2 = float(v @ v)
    if nv2 == 0.0:
        return 0.0, v, w
    vtx = float(v @ x[omega])
    vtz = float(v @ z[omega])
    vav = float(v @ w[omega])
    coeffs = CubicCoeffs(
        b=3.0 * vtx / nv2,
        c=(nu * nv2 + 2.0 * vtx * vtx - vav) / (nv2 * nv2),
        d=(nu * vtx - vtz) / (nv2 * nv2),
    )
    return solve_cubic_min(coeffs), v, w


def vec_ls_alpha(state: SolverState, omega) -> float:
    """Optimal stepsize along the sparse gradient direction on ``omega``.

    Charges one column access per distinct index; zero direction gives 0.
    """
    omega = np.unique(np.asarray(omega, dtype=np.int64))
    if omega.size == 0:
        raise ValueError("omega must be non-empty")
    alpha, _, _ = _vec_ls_direction(state, omega)
    return float(alpha)


def _apply_vec_ls(state: SolverState, sampled: np.ndarray) -> StepReport:
    uniq = np.unique(sampled)
    alpha, v, w = _vec_ls_direction(state, uniq)
    state.x[uniq] += alpha * v
    state.z += alpha * w
    state.revalidate()
    if sampled.size > uniq.size:
        # duplicates sampled with replacement still cost their column access
        counts = np.bincount(sampled)
        for j in np.flatnonzero(counts > 1):
            for _ in range(int(counts[j]) - 1):
                state.oracle.column(int(j))
    return StepReport(indices=uniq, deltas=alpha * v, col_accesses=sampled.size)


def step(state: SolverState, config: StrategyConfig) -> StepReport:
    """Run one iteration of the configured strategy.

    Batch deltas are all computed from the pre-step state and then applied
    sequentially, matching independent per-coordinate updating; total column
    accesses per call equal k.
    """
    if config.pick == "pm":
        raise ValueError("power-method runs are driven by the harness, not step()")
    k = config.k
    try:
        if config.pick == "cyclic":
            indices = np.array([pick_cyclic(state)])
        elif config.pick == "gauss_southwell":
            indices = np.array([pick_gauss_southwell(state)])
        elif config.pick == "all":
            indices = np.arange(state.dim)
        elif config.pick == "greedy_ls":
            if k == 1:
                j, alpha = pick_greedy_ls(state)
                indices = np.array([j])
                greedy_alphas = np.array([alpha])
            else:
                indices, greedy_alphas = pick_greedy_ls_batch(state, k)
        else:
            indices = pick_grad_power(state, config.t, k, config.with_replacement)
    except StationaryIterate:
        empty = np.empty(0, dtype=np.int64)
        return StepReport(indices=empty, deltas=empty.astype(float),
                          col_accesses=0, stationary=True)

    if config.update == "vec_ls":
        report = _apply_vec_ls(state, indices)
        state.ell += 1
        return report

    if config.pick == "greedy_ls":
        deltas = greedy_alphas
    elif config.update == "coord_ls":
        deltas = np.array([solve_cubic_min(coord_cubic(state, int(j)))
                           for j in indices])
    else:
        c = state.gradient_scores()
        deltas = -config.gamma * 4.0 * c[indices]
    if config.averaged and indices.size > 1:
        deltas = deltas / indices.size
    for j, delta in zip(indices, deltas):
        state.apply_coordinate_delta(int(j), float(delta))
    state.ell += 1
    return StepReport(indices=indices, deltas=deltas, col_accesses=indices.size)


def power_method_step(state: SolverState) -> StepReport:
    """One power iteration, paid column by column (n accesses).

    The stored iterate is the Rayleigh-scaled current direction, so the
    cached ``nu`` doubles as the eigenvalue estimate and the objective gap
    formula applies unchanged; ``z`` holds the unnormalized next direction.
    """
    src = state.z if state.ell > 0 else state.x
    norm = float(np.sqrt(src @ src))
    if norm == 0.0:
        raise PowerIterationBreakdown("iterate vanished")
    u = src / norm
    n = state.dim
    w = np.zeros(n)
    oracle = state.oracle
    for j in range(n):
        rows, vals = oracle.column(j)
        uj = u[j]
        if uj != 0.0:
            if rows is None:
                w += uj * vals
            else:
                w[rows] += uj * vals
    wnorm = float(np.sqrt(w @ w))
    if wnorm == 0.0:
        raise PowerIterationBreakdown("A x vanished")
    rayleigh = float(u @ w)
    scale = np.sqrt(rayleigh) if rayleigh > 0 else 1.0
    state.x = scale * u
    state.z = scale * w
    state.nu = scale * scale
    state.s = scale * scale * rayleigh
    state.ell += 1
    return StepReport(indices=np.arange(n), deltas=np.empty(0), col_accesses=n)


def stepsize_bound(oracle: ColumnOracle) -> float:
    """Safe fixed stepsize ``1 / (4 (n + 4) R^2)`` with ``R^2 = max_j ||A[:,j]||``.

    Cyclic gradient descent started inside the box ``||x||_inf < R`` stays
    there under this bound.
    """
    r_sq = column_norm_max(oracle)
    if r_sq == 0.0:
        raise ValueError("zero operator has no meaningful stepsize bound")
    return 1.0 / (4.0 * (oracle.dim + 4) * r_sq)
