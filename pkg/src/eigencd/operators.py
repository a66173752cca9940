"""Matrix-free symmetric operators with column-access accounting.

Every solver in this package touches the matrix exclusively through single
columns, and the number of column evaluations is the hardware-independent
cost unit the benchmark harness reports.  Setup work (norm surveys,
reference eigenpairs, sparse assembly) runs with counting paused so it never
pollutes a solver budget.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

Column = tuple["np.ndarray | None", np.ndarray]


class ColumnOracle(ABC):
    """Symmetric matrix of order ``dim`` exposed one column at a time.

    ``column(j)`` returns ``(rows, values)``; ``rows is None`` means the
    values cover every row (dense column).  Sparse implementations return
    row indices sorted ascending.  Each ``column`` call increments the
    access counter by exactly one; ``diag`` reads are free.  Returned
    arrays may be views and must not be modified by callers.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"operator dimension must be positive, got {dim}")
        self._dim = int(dim)
        self._accesses = 0
        self._counting = True
        self._count_lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def access_count(self) -> int:
        """Number of counted column evaluations so far."""
        return self._accesses

    def reset_access_count(self) -> None:
        with self._count_lock:
            self._accesses = 0

    @contextmanager
    def counting_paused(self):
        """Suspend access counting for setup passes (norms, references)."""
        prev = self._counting
        self._counting = False
        try:
            yield self
        finally:
            self._counting = prev

    def column(self, j: int) -> Column:
        if not 0 <= j < self._dim:
            raise IndexError(f"column index {j} out of range for dim {self._dim}")
        if self._counting:
            with self._count_lock:
                self._accesses += 1
        return self._column(j)

    @abstractmethod
    def _column(self, j: int) -> Column:
        """Raw column evaluation, no accounting."""

    @abstractmethod
    def diag(self, j: int) -> float:
        """Diagonal entry ``A[j, j]``; never counted."""

    def prepare(self) -> None:
        """Optional expensive setup (e.g. sparse assembly); uncounted."""

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Uncounted ``A @ x`` for setup/reference work only.

        Solvers must not call this; they pay per column instead.
        """
        y = np.zeros(self._dim)
        with self.counting_paused():
            for j in np.flatnonzero(x):
                rows, vals = self.column(int(j))
                if rows is None:
                    y += x[j] * vals
                else:
                    y[rows] += x[j] * vals
        return y

    def diag_vector(self) -> np.ndarray:
        return np.array([self.diag(j) for j in range(self._dim)])


class DenseSymmetric(ColumnOracle):
    """In-memory dense symmetric matrix; mirrored on construction."""

    def __init__(self, entries: np.ndarray):
        a = np.asarray(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        super().__init__(a.shape[0])
        self._a = 0.5 * (a + a.T)

    @property
    def array(self) -> np.ndarray:
        return self._a

    def _column(self, j: int) -> Column:
        # symmetric: row j is column j, and rows are contiguous in C order
        return None, self._a[j]

    def diag(self, j: int) -> float:
        return float(self._a[j, j])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._a @ x


@dataclass(frozen=True)
class SpectrumSpec:
    """Target spectrum for a randomly rotated synthetic test matrix.

    ``eigenvalues`` must be non-increasing with a positive, simple leading
    value; ``seed`` fixes the random eigenbasis.
    """

    eigenvalues: np.ndarray
    seed: int = 0

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        object.__setattr__(self, "eigenvalues", lam)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("eigenvalues must be a non-empty 1-d sequence")
        if lam[0] <= 0:
            raise ValueError(f"leading eigenvalue must be positive, got {lam[0]}")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")
        if lam.size > 1 and lam[0] <= lam[1]:
            raise ValueError(f"leading eigenvalue must be simple: {lam[0]} <= {lam[1]}")

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @classmethod
    def gapped_grid(cls, n: int, lam1: float, low: float = 1.0,
                    high: float = 100.0, seed: int = 0) -> "SpectrumSpec":
        """Leading value ``lam1`` over a descending equispaced tail.

        The tail places ``n - 1`` values on ``[low, high)`` with spacing
        ``(high - low) / (n - 1)``, so the second eigenvalue stays strictly
        below ``high``.
        """
        if n < 2:
            raise ValueError("gapped_grid needs n >= 2")
        tail = high - (high - low) * np.arange(1, n) / (n - 1)
        return cls(eigenvalues=np.concatenate(([lam1], tail)), seed=seed)


def build_synthetic(spec: SpectrumSpec) -> DenseSymmetric:
    """Rotate ``diag(eigenvalues)`` by the Q factor of a seeded Gaussian QR."""
    rng = np.random.default_rng(spec.seed)
    n = spec.dim
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    a = (q * spec.eigenvalues) @ q.T
    return DenseSymmetric(a)


class ShiftScaled(ColumnOracle):
    """Lazy ``a * M + b * I`` over a wrapped oracle."""

    def __init__(self, base: ColumnOracle, a: float, b: float):
        super().__init__(base.dim)
        self._base = base
        self._a = float(a)
        self._b = float(b)

    @property
    def base(self) -> ColumnOracle:
        return self._base

    def _column(self, j: int) -> Column:
        rows, vals = self._base._column(j)
        if rows is None:
            out = self._a * vals
            out[j] += self._b
            return None, out
        out = self._a * vals
        pos = np.searchsorted(rows, j)
        if pos < rows.size and rows[pos] == j:
            out[pos] += self._b
            return rows, out
        rows = np.insert(rows, pos, j)
        out = np.insert(out, pos, self._b)
        return rows, out

    def diag(self, j: int) -> float:
        return self._a * self._base.diag(j) + self._b

    def prepare(self) -> None:
        self._base.prepare()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._a * self._base.matvec(x) + self._b * x


def shift_scale(oracle: ColumnOracle, a: float, b: float) -> ShiftScaled:
    """Represent ``a * M + b * I`` without touching stored entries."""
    return ShiftScaled(oracle, a, b)


def _column_values(oracle: ColumnOracle, j: int) -> np.ndarray:
    return oracle.column(j)[1]


def column_norm_max(oracle: ColumnOracle) -> float:
    """``max_j ||A[:, j]||_2`` by one uncounted streaming pass."""
    best = 0.0
    with oracle.counting_paused():
        for j in range(oracle.dim):
            v = _column_values(oracle, j)
            best = max(best, float(np.sqrt(v @ v)))
    return best


def frobenius_norm_sq(oracle: ColumnOracle) -> float:
    """``sum_ij A[i, j]**2`` by one uncounted streaming pass."""
    total = 0.0
    with oracle.counting_paused():
        for j in range(oracle.dim):
            v = _column_values(oracle, j)
            total += float(v @ v)
    return total


def column_abs_sum_max(oracle: ColumnOracle) -> float:
    """``max_j sum_i |A[i, j]|``; upper bound on the spectral radius."""
    best = 0.0
    with oracle.counting_paused():
        for j in range(oracle.dim):
            v = _column_values(oracle, j)
            best = max(best, float(np.abs(v).sum()))
    return best


def max_abs_diag(oracle: ColumnOracle) -> float:
    return max(abs(oracle.diag(j)) for j in range(oracle.dim))


def save_dense(path, oracle_or_array) -> None:
    """Write the whitespace text format: first line n, then n rows."""
    a = oracle_or_array.array if isinstance(oracle_or_array, DenseSymmetric) \
        else np.asarray(oracle_or_array, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]}\n")
        for row in a:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_dense(path) -> DenseSymmetric:
    """Read the text format written by :func:`save_dense`."""
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ValueError(f"{path}: empty matrix file")
    n = int(tokens[0])
    body = np.array(tokens[1:], dtype=float)
    if body.size != n * n:
        raise ValueError(f"{path}: expected {n * n} entries, found {body.size}")
    a = body.reshape(n, n)
    scale = np.abs(a).max() or 1.0
    if np.abs(a - a.T).max() > 1e-8 * scale:
        raise ValueError(f"{path}: matrix is not symmetric")
    return DenseSymmetric(a)
