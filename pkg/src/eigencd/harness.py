"""Reference eigenpairs, error metrics, and experiment orchestration.

The reference route is intentionally independent of the coordinate-descent
solvers: dense problems go through the LAPACK symmetric eigensolver, large
ones through restarted Lanczos with full reorthogonalization on a
positive-shifted ``A + sigma I``.  Setup passes never count column accesses.

A run stops when ``eps_obj < tol``, the access budget is exhausted, or the
divergence/stall detector trips.  ``eps_obj`` is available every iteration
in O(1) through the identity ``f - f* = lambda_1^2 - 2 s + nu^2`` over the
engine's maintained scalars.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .engine import (PowerIterationBreakdown, StrategyConfig, init_state,
                     power_method_step, step)
from .operators import ColumnOracle, column_abs_sum_max, frobenius_norm_sq

DENSE_REFERENCE_CUTOFF = 2000
DIVERGENCE_FACTOR = 1e6
STALL_CHECKS = 1000


class ReferenceFailure(RuntimeError):
    """The reference eigensolver did not reach its residual target."""


@dataclass(frozen=True)
class ReferenceSolution:
    """Leading eigenpair data every metric is measured against."""

    lambda1: float
    v1: np.ndarray
    lambda2: float
    fstar: float
    frob_sq: float
    source: str

    def __post_init__(self):
        if self.lambda1 <= self.lambda2:
            raise ValueError(
                f"leading eigenvalue must be simple: {self.lambda1} <= {self.lambda2}")


def _lanczos_extreme(matvec, n: int, v0: np.ndarray, *, ortho_against=(),
                     block: int = 60, max_restarts: int = 40,
                     residual_tol: float = 1e-10, rng=None) -> tuple[float, np.ndarray]:
    """Largest eigenpair by restarted Lanczos with full reorthogonalization.

    ``ortho_against`` deflates already-converged eigenvectors: every Krylov
    vector is reprojected off them, so the method converges to the largest
    eigenvalue of the complementary invariant subspace.
    """
    rng = rng or np.random.default_rng(7)
    v = np.array(v0, dtype=float)
    for u in ortho_against:
        v -= (u @ v) * u
    norm = np.linalg.norm(v)
    if norm == 0.0:
        v = rng.standard_normal(n)
        for u in ortho_against:
            v -= (u @ v) * u
        norm = np.linalg.norm(v)
    v /= norm

    theta = 0.0
    for _ in range(max_restarts):
        m = min(block, n - len(ortho_against))
        basis = np.empty((m, n))
        alphas = np.empty(m)
        betas = np.empty(max(m - 1, 0))
        basis[0] = v
        w = None
        size = 0
        for i in range(m):
            size = i + 1
            w = matvec(basis[i])
            alphas[i] = basis[i] @ w
            w -= alphas[i] * basis[i]
            if i > 0:
                w -= betas[i - 1] * basis[i - 1]
            for u in ortho_against:
                w -= (u @ w) * u
            # full reorthogonalization, twice for safety
            for _ in range(2):
                w -= basis[:size].T @ (basis[:size] @ w)
            if i + 1 == m:
                break
            beta = np.linalg.norm(w)
            if beta < 1e-14:
                break
            betas[i] = beta
            basis[i + 1] = w / beta
        tri_vals, tri_vecs = np.linalg.eigh(
            np.diag(alphas[:size]) + np.diag(betas[:size - 1], 1)
            + np.diag(betas[:size - 1], -1))
        theta = float(tri_vals[-1])
        ritz = basis[:size].T @ tri_vecs[:, -1]
        ritz /= np.linalg.norm(ritz)
        resid = np.linalg.norm(matvec(ritz) - theta * ritz)
        if resid <= residual_tol * max(1.0, abs(theta)):
            return theta, ritz
        v = ritz
    raise ReferenceFailure(
        f"Lanczos stalled at residual {resid:.3e} after {max_restarts} restarts")


def compute_reference(oracle: ColumnOracle,
                      dense_cutoff: int = DENSE_REFERENCE_CUTOFF) -> ReferenceSolution:
    """Top two eigenpairs plus ``f* = ||A||_F^2 - lambda_1^2``; all uncounted."""
    n = oracle.dim
    frob_sq = frobenius_norm_sq(oracle)
    if n <= dense_cutoff:
        dense = np.empty((n, n))
        with oracle.counting_paused():
            for j in range(n):
                rows, vals = oracle.column(j)
                if rows is None:
                    dense[:, j] = vals
                else:
                    dense[:, j] = 0.0
                    dense[rows, j] = vals
        vals, vecs = np.linalg.eigh(dense)
        lam1, lam2 = float(vals[-1]), float(vals[-2])
        v1 = vecs[:, -1]
        source = "dense"
    else:
        oracle.prepare()
        sigma = column_abs_sum_max(oracle)  # >= spectral radius

        def matvec(w):
            return oracle.matvec(w) + sigma * w

        rng = np.random.default_rng(12345)
        th1, v1 = _lanczos_extreme(matvec, n, rng.standard_normal(n), rng=rng)
        th2, _ = _lanczos_extreme(matvec, n, rng.standard_normal(n),
                                  ortho_against=(v1,), rng=rng)
        lam1, lam2 = th1 - sigma, th2 - sigma
        source = "lanczos"
    resid = np.linalg.norm(oracle.matvec(v1) - lam1 * v1)
    if resid > 1e-8 * max(1.0, abs(lam1)):
        raise ReferenceFailure(f"reference residual {resid:.3e} too large")
    return ReferenceSolution(lambda1=lam1, v1=v1, lambda2=lam2,
                             fstar=frob_sq - lam1 * lam1, frob_sq=frob_sq,
                             source=source)


def eps_obj(f_value: float, fstar: float) -> float:
    """Square root of the relative objective gap."""
    if fstar <= 0:
        raise ValueError(f"fstar must be positive, got {fstar}")
    return math.sqrt(max(f_value - fstar, 0.0) / fstar)


def projected_energy(x: np.ndarray, z: np.ndarray, x_ref: np.ndarray) -> float:
    """Eigenvalue estimate ``x_ref^T A x / x_ref^T x``; nan on zero overlap."""
    denom = float(x_ref @ x)
    if denom == 0.0:
        return math.nan
    return float(x_ref @ z) / denom


def eps_tan(x: np.ndarray, v1: np.ndarray) -> float:
    """Tangent of the angle between x and the reference eigvector; sign-free."""
    overlap = float(v1 @ x)
    if overlap == 0.0:
        return math.inf
    residual = x - overlap * v1
    return float(np.sqrt(residual @ residual)) / abs(overlap)


@dataclass
class TraceRecord:
    iteration: int
    col_access: int
    f_value: float
    eps_obj: float
    eps_energy: float
    eps_tan: float


@dataclass
class RunOutcome:
    """Per-seed result; status is converged / budget / diverged / stalled."""

    seed: int
    status: str
    iterations: int
    col_accesses: int
    final_nu: float = math.nan  # ||x||^2, the eigenvalue estimate at the end
    trace: list[TraceRecord] = field(default_factory=list)


@dataclass(frozen=True)
class RunStats:
    min_iters: int
    med_iters: int
    max_iters: int
    total_col_access: int
    seeds_used: int
    diverged_count: int


@dataclass
class ExperimentResult:
    label: str
    k: int
    config: StrategyConfig
    stats: RunStats
    outcomes: list[RunOutcome]


class AllSeedsFailed(RuntimeError):
    """No seed of a stochastic run reached the tolerance."""


def _lower_median(values: list[int]) -> int:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


_DETERMINISTIC_PICKS = {"cyclic", "gauss_southwell", "greedy_ls", "all", "pm"}


def is_deterministic(config: StrategyConfig) -> bool:
    return config.pick in _DETERMINISTIC_PICKS


def run_single(oracle: ColumnOracle, config: StrategyConfig, x0: np.ndarray,
               tol: float, max_col_access: int, seed: int,
               reference: ReferenceSolution, x_ref: np.ndarray | None = None,
               trace_stride: int = 0, stall_checks: int = STALL_CHECKS) -> RunOutcome:
    """Drive one seeded run to convergence, budget, or failure."""
    lam1 = reference.lambda1
    fstar = reference.fstar
    frob_sq = reference.frob_sq
    v1 = reference.v1
    if x_ref is None:
        x_ref = x0
    ref_nonzero = np.flatnonzero(x_ref)
    sparse_ref = int(ref_nonzero[0]) if ref_nonzero.size == 1 else None

    start_count = oracle.access_count
    state = init_state(oracle, x0, rng=np.random.default_rng(seed))
    is_pm = config.pick == "pm"
    k_per_step = oracle.dim if config.pick in ("pm", "all") else config.k

    trace: list[TraceRecord] = []

    def gap() -> float:
        return lam1 * lam1 - 2.0 * state.s + state.nu * state.nu

    def record():
        f_val = frob_sq - 2.0 * state.s + state.nu * state.nu
        if sparse_ref is not None:
            energy = (state.z[sparse_ref] / state.x[sparse_ref]
                      if state.x[sparse_ref] != 0.0 else math.nan)
        else:
            energy = projected_energy(state.x, state.z, x_ref)
        e_energy = abs(energy - lam1) / abs(lam1) if math.isfinite(energy) else math.nan
        trace.append(TraceRecord(
            iteration=state.ell,
            col_access=oracle.access_count - start_count,
            f_value=float(f_val),
            eps_obj=eps_obj(f_val, fstar),
            eps_energy=float(e_energy),
            eps_tan=eps_tan(state.x, v1),
        ))

    record()
    best_gap = gap()
    best_f = frob_sq - 2.0 * state.s + state.nu * state.nu
    checks_since_best = 0
    status = "budget"
    while True:
        g = gap()
        if math.sqrt(max(g, 0.0) / fstar) < tol:
            status = "converged"
            break
        accesses = oracle.access_count - start_count
        if accesses + k_per_step > max_col_access:
            status = "budget"
            break
        f_val = frob_sq - 2.0 * state.s + state.nu * state.nu
        f_floor = max(best_f, 1e-9 * max(frob_sq, 1.0))
        if not math.isfinite(f_val) or f_val > DIVERGENCE_FACTOR * f_floor:
            status = "diverged"
            break
        if g < best_gap:
            best_gap = g
            checks_since_best = 0
        else:
            checks_since_best += 1
            if checks_since_best >= stall_checks:
                status = "stalled"
                break
        best_f = min(best_f, f_val)
        try:
            report = power_method_step(state) if is_pm else step(state, config)
        except PowerIterationBreakdown:
            status = "diverged"
            break
        if report.stationary:
            status = "converged" if math.sqrt(max(gap(), 0.0) / fstar) < tol else "stalled"
            break
        if trace_stride and state.ell % trace_stride == 0:
            record()
    record()
    return RunOutcome(seed=seed, status=status, iterations=state.ell,
                      col_accesses=oracle.access_count - start_count,
                      final_nu=float(state.nu), trace=trace)


def run_experiment(oracle: ColumnOracle, config: StrategyConfig, x0: np.ndarray,
                   tol: float, max_col_access: int, seeds: int = 20,
                   reference: ReferenceSolution | None = None,
                   x_ref: np.ndarray | None = None, label: str = "",
                   trace_stride: int = 0,
                   stall_checks: int = STALL_CHECKS) -> ExperimentResult:
    """Multi-seed run with Table-style statistics.

    Deterministic strategies run once; stochastic ones once per seed with
    seeds 0..seeds-1, each owning its generator so results are independent
    of scheduling.  Non-converged seeds are excluded from the iteration
    stats; if every seed fails the experiment raises.
    """
    config.validate()
    if reference is None:
        reference = compute_reference(oracle)
    n_runs = 1 if is_deterministic(config) else seeds
    outcomes = [run_single(oracle, config, x0, tol, max_col_access, seed_i,
                           reference, x_ref=x_ref, trace_stride=trace_stride,
                           stall_checks=stall_checks)
                for seed_i in range(n_runs)]
    converged = [o.iterations for o in outcomes if o.status == "converged"]
    failed = len(outcomes) - len(converged)
    if not converged:
        raise AllSeedsFailed(
            f"{label or config.pick}: no seed converged "
            f"(statuses: {sorted({o.status for o in outcomes})})")
    k_per_step = oracle.dim if config.pick in ("pm", "all") else config.k
    med = _lower_median(converged)
    stats = RunStats(
        min_iters=min(converged),
        med_iters=med,
        max_iters=max(converged),
        total_col_access=k_per_step * med,
        seeds_used=n_runs,
        diverged_count=failed,
    )
    return ExperimentResult(label=label or config.pick, k=k_per_step,
                            config=config, stats=stats, outcomes=outcomes)


_TRACE_HEADER = ["iteration", "col_access", "f", "eps_obj", "eps_energy", "eps_tan"]
_SUMMARY_HEADER = ["Method", "k", "MinIter", "MedIter", "MaxIter", "TotalColAccess"]


def _slug(label: str) -> str:
    return "".join(ch if ch.isalnum() else "-" for ch in label)


def emit_trace(results: list[ExperimentResult], out_dir) -> None:
    """Write one trace CSV per (method, seed) plus the summary table."""
    os.makedirs(out_dir, exist_ok=True)
    try:
        for result in results:
            for outcome in result.outcomes:
                path = os.path.join(
                    out_dir, f"trace_{_slug(result.label)}_seed{outcome.seed}.csv")
                with open(path, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(_TRACE_HEADER)
                    for rec in outcome.trace:
                        writer.writerow([rec.iteration, rec.col_access,
                                         repr(rec.f_value), repr(rec.eps_obj),
                                         repr(rec.eps_energy), repr(rec.eps_tan)])
        summary = os.path.join(out_dir, "summary.csv")
        with open(summary, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_SUMMARY_HEADER)
            for result in results:
                s = result.stats
                writer.writerow([result.label, result.k, s.min_iters, s.med_iters,
                                 s.max_iters, s.total_col_access])
    except OSError as exc:
        raise OSError(f"writing traces under {out_dir}: {exc}") from exc


def read_trace(path) -> list[TraceRecord]:
    """Parse a trace CSV back; inverse of the writer for round-trip checks."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _TRACE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            records.append(TraceRecord(
                iteration=int(row[0]), col_access=int(row[1]),
                f_value=float(row[2]), eps_obj=float(row[3]),
                eps_energy=float(row[4]), eps_tan=float(row[5])))
    return records
