"""Momentum-space 2D Hubbard Hamiltonian as an on-the-fly column oracle.

The Hamiltonian on an ``L1 x L2`` periodic lattice is

    H = t * sum_{k,s} eps(k) n_{k,s}
        + (U / N_orb) * sum_{k,p,q} cdag_{p-q,up} cdag_{k+q,dn} c_{k,dn} c_{p,up}

with ``eps(k) = -2 (cos k1 + cos k2)`` and ``k = (2*pi*r1/L1, 2*pi*r2/L2)``
for orbital ``r = (r1, r2)``.  Momentum transfer is conserved, so H is block
diagonal over total lattice momentum; we work in the block containing the
Hartree-Fock determinant, where the ground state has large overlap with the
HF basis vector.  Columns are generated on demand from occupation bitmasks;
the matrix is never required to fit in memory, though desk-scale sectors can
be assembled into sparse form to speed up reference eigensolves.

Fermion convention: modes are ordered as all up orbitals (ascending index)
followed by all down orbitals (ascending index).  A creation/annihilation
at mode position m picks up (-1)**(number of occupied modes strictly before
m at the moment of application).  Because the interaction moves exactly one
electron per spin channel, up- and down-parities factorize.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .operators import Column, ColumnOracle

DEFAULT_SECTOR_CAP = 5_000_000
_EPS_QUANTUM = 1e-9


class Determinant(NamedTuple):
    """Occupation bitmasks over momentum orbitals, one per spin."""

    up: int
    down: int


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic 2D lattice with hopping ``t_hop`` and on-site ``u``."""

    l1: int
    l2: int
    n_up: int
    n_down: int
    t_hop: float = 1.0
    u: float = 4.0

    def __post_init__(self):
        if self.l1 < 1 or self.l2 < 1:
            raise ValueError(f"lattice sides must be positive, got {self.l1}x{self.l2}")
        if not 0 <= self.n_up <= self.n_orb or not 0 <= self.n_down <= self.n_orb:
            raise ValueError(
                f"electron counts {self.n_up}+{self.n_down} exceed {self.n_orb} orbitals")

    @property
    def n_orb(self) -> int:
        return self.l1 * self.l2

    def orbital_vector(self, p: int) -> tuple[int, int]:
        return p % self.l1, p // self.l1

    def orbital_index(self, r1: int, r2: int) -> int:
        return (r1 % self.l1) + self.l1 * (r2 % self.l2)

    @cached_property
    def dispersions(self) -> np.ndarray:
        out = np.empty(self.n_orb)
        for p in range(self.n_orb):
            r1, r2 = self.orbital_vector(p)
            out[p] = -2.0 * (np.cos(2 * np.pi * r1 / self.l1)
                             + np.cos(2 * np.pi * r2 / self.l2))
        return out

    @cached_property
    def _transfer_tables(self) -> tuple[list[list[int]], list[list[int]]]:
        # sub[p][q] = p - q and add[p][q] = p + q, component-wise mod lattice
        n = self.n_orb
        sub = [[0] * n for _ in range(n)]
        add = [[0] * n for _ in range(n)]
        for p in range(n):
            p1, p2 = self.orbital_vector(p)
            for q in range(n):
                q1, q2 = self.orbital_vector(q)
                sub[p][q] = self.orbital_index(p1 - q1, p2 - q2)
                add[p][q] = self.orbital_index(p1 + q1, p2 + q2)
        return sub, add

    @cached_property
    def fill_order(self) -> list[int]:
        """Orbitals by ascending dispersion; ties by unwrapped |k|^2, then index.

        Dispersion is quantized before comparison so exactly degenerate
        shells are not split by trig rounding.  Within a shell, orbitals
        with smaller stored wave numbers ``k = 2*pi*r/L in [0, 2*pi)`` come
        first; this pins the sector of the reference calculations.
        """
        def key(p: int):
            r1, r2 = self.orbital_vector(p)
            k1 = 2 * np.pi * r1 / self.l1
            k2 = 2 * np.pi * r2 / self.l2
            return (round(self.dispersions[p] / _EPS_QUANTUM) * _EPS_QUANTUM,
                    round((k1 * k1 + k2 * k2) / _EPS_QUANTUM) * _EPS_QUANTUM,
                    p)

        return sorted(range(self.n_orb), key=key)

    def momentum_of(self, mask: int) -> tuple[int, int]:
        m1 = m2 = 0
        for p in _occupied(mask, self.n_orb):
            r1, r2 = self.orbital_vector(p)
            m1 += r1
            m2 += r2
        return m1 % self.l1, m2 % self.l2


def dispersion(spec: LatticeSpec, k_index: int) -> float:
    """Single-particle energy of momentum orbital ``k_index``."""
    if not 0 <= k_index < spec.n_orb:
        raise IndexError(f"orbital index {k_index} out of range for {spec.n_orb} orbitals")
    return float(spec.dispersions[k_index])


def _occupied(mask: int, n_orb: int) -> list[int]:
    return [p for p in range(n_orb) if mask >> p & 1]


def _parity_below(mask: int, p: int) -> int:
    return (mask & ((1 << p) - 1)).bit_count() & 1


def hf_determinant(spec: LatticeSpec) -> Determinant:
    """Lowest-dispersion filling per spin, deterministic under degeneracy."""
    up = 0
    for p in spec.fill_order[:spec.n_up]:
        up |= 1 << p
    down = 0
    for p in spec.fill_order[:spec.n_down]:
        down |= 1 << p
    return Determinant(up, down)


class SectorTooLarge(RuntimeError):
    """Sector dimension exceeds the configured enumeration cap."""


class MomentumBasis:
    """All determinants in one total-momentum block, lexicographically sorted."""

    def __init__(self, spec: LatticeSpec, sector_momentum: tuple[int, int],
                 up_masks: np.ndarray, down_masks: np.ndarray):
        self.spec = spec
        self.sector_momentum = sector_momentum
        self.up_masks = up_masks
        self.down_masks = down_masks
        n = spec.n_orb
        self._index = {(int(u) << n) | int(d): i
                       for i, (u, d) in enumerate(zip(up_masks, down_masks))}

    def __len__(self) -> int:
        return self.up_masks.size

    @property
    def dim(self) -> int:
        return self.up_masks.size

    def state(self, i: int) -> Determinant:
        return Determinant(int(self.up_masks[i]), int(self.down_masks[i]))

    def index_of(self, det: Determinant) -> int:
        return self._index[(det.up << self.spec.n_orb) | det.down]

    @cached_property
    def diagonal(self) -> np.ndarray:
        """t * sum of occupied dispersions plus the constant Hubbard term."""
        spec = self.spec
        kin = np.zeros(self.dim)
        for p in range(spec.n_orb):
            eps = spec.dispersions[p]
            kin += eps * ((self.up_masks >> p) & 1)
            kin += eps * ((self.down_masks >> p) & 1)
        hub = (spec.u / spec.n_orb) * spec.n_up * spec.n_down
        return spec.t_hop * kin + hub


def _spin_masks_by_momentum(spec: LatticeSpec, count: int):
    masks = sorted(sum(1 << p for p in combo)
                   for combo in itertools.combinations(range(spec.n_orb), count))
    buckets: dict[tuple[int, int], list[int]] = {}
    for m in masks:
        buckets.setdefault(spec.momentum_of(m), []).append(m)
    return masks, buckets


def sector_dimension(spec: LatticeSpec) -> int:
    """Dimension of the HF momentum sector without materializing it."""
    hf = hf_determinant(spec)
    tgt1, tgt2 = _total_momentum(spec, hf)
    _, up_buckets = _spin_masks_by_momentum(spec, spec.n_up)
    if spec.n_down == spec.n_up:
        down_buckets = up_buckets
    else:
        _, down_buckets = _spin_masks_by_momentum(spec, spec.n_down)
    total = 0
    for (m1, m2), ups in up_buckets.items():
        need = ((tgt1 - m1) % spec.l1, (tgt2 - m2) % spec.l2)
        total += len(ups) * len(down_buckets.get(need, ()))
    return total


def _total_momentum(spec: LatticeSpec, det: Determinant) -> tuple[int, int]:
    mu = spec.momentum_of(det.up)
    md = spec.momentum_of(det.down)
    return (mu[0] + md[0]) % spec.l1, (mu[1] + md[1]) % spec.l2


def enumerate_sector(spec: LatticeSpec, max_dim: int = DEFAULT_SECTOR_CAP) -> MomentumBasis:
    """Enumerate the total-momentum block of the HF determinant."""
    dim = sector_dimension(spec)
    if dim > max_dim:
        raise SectorTooLarge(
            f"sector dimension {dim} exceeds cap {max_dim}; raise max_dim to proceed")
    hf = hf_determinant(spec)
    tgt1, tgt2 = _total_momentum(spec, hf)
    up_masks, _ = _spin_masks_by_momentum(spec, spec.n_up)
    if spec.n_down == spec.n_up:
        down_masks = up_masks
    else:
        down_masks, _ = _spin_masks_by_momentum(spec, spec.n_down)
    down_buckets: dict[tuple[int, int], list[int]] = {}
    for m in down_masks:
        down_buckets.setdefault(spec.momentum_of(m), []).append(m)

    ups = np.empty(dim, dtype=np.int64)
    downs = np.empty(dim, dtype=np.int64)
    pos = 0
    for up in up_masks:  # ascending; down buckets ascending too
        m1, m2 = spec.momentum_of(up)
        need = ((tgt1 - m1) % spec.l1, (tgt2 - m2) % spec.l2)
        for dn in down_buckets.get(need, ()):
            ups[pos] = up
            downs[pos] = dn
            pos += 1
    assert pos == dim
    return MomentumBasis(spec, (tgt1, tgt2), ups, downs)


def _column_kernel(spec: LatticeSpec, basis: MomentumBasis, j: int,
                   diag_value: float) -> tuple[list[int], list[float]]:
    n_orb = spec.n_orb
    sub, add = spec._transfer_tables
    up = int(basis.up_masks[j])
    dn = int(basis.down_masks[j])
    amp = spec.u / n_orb
    index = basis._index
    rows = [j]
    vals = [diag_value]
    if amp == 0.0:
        return rows, vals
    dn_occ = _occupied(dn, n_orb)
    for p in _occupied(up, n_orb):
        s_up_ann = _parity_below(up, p)
        up_removed = up ^ (1 << p)
        sub_p = sub[p]
        for q in range(1, n_orb):
            tp = sub_p[q]
            if up_removed >> tp & 1:
                continue
            sign_up = 1 - 2 * ((s_up_ann + _parity_below(up_removed, tp)) & 1)
            up_new = (up_removed | (1 << tp)) << n_orb
            for k in dn_occ:
                tk = add[k][q]
                if dn >> tk & 1:
                    continue
                dn_removed = dn ^ (1 << k)
                sign_dn = 1 - 2 * ((_parity_below(dn, k)
                                    + _parity_below(dn_removed, tk)) & 1)
                rows.append(index[up_new | dn_removed | (1 << tk)])
                vals.append(sign_up * sign_dn * amp)
    return rows, vals


def hamiltonian_column(spec: LatticeSpec, basis: MomentumBasis, j: int) -> Column:
    """Sparse column ``H[:, j]`` as (row indices ascending, values)."""
    if not 0 <= j < basis.dim:
        raise IndexError(f"state index {j} out of range for dim {basis.dim}")
    rows, vals = _column_kernel(spec, basis, j, float(basis.diagonal[j]))
    order = np.argsort(rows)
    return np.asarray(rows, dtype=np.int64)[order], np.asarray(vals)[order]


class HubbardOracle(ColumnOracle):
    """Column oracle over the HF momentum sector of a lattice spec.

    Columns come from the on-the-fly kernel behind a bounded LRU; once
    :meth:`prepare` has assembled the sector into CSC form, columns are
    served as slices instead.  Cache and assembly change cost only, never
    accounting: every ``column`` call counts.
    """

    def __init__(self, spec: LatticeSpec, basis: MomentumBasis | None = None,
                 max_dim: int = DEFAULT_SECTOR_CAP, cache_columns: int = 4096):
        self.spec = spec
        self.basis = basis if basis is not None else enumerate_sector(spec, max_dim)
        super().__init__(self.basis.dim)
        self._csc: sp.csc_matrix | None = None
        self._cached = lru_cache(maxsize=cache_columns)(self._compute_column)

    def _compute_column(self, j: int) -> Column:
        return hamiltonian_column(self.spec, self.basis, j)

    def _column(self, j: int) -> Column:
        if self._csc is not None:
            lo, hi = self._csc.indptr[j], self._csc.indptr[j + 1]
            return self._csc.indices[lo:hi], self._csc.data[lo:hi]
        return self._cached(j)

    def diag(self, j: int) -> float:
        return float(self.basis.diagonal[j])

    def diag_vector(self) -> np.ndarray:
        return self.basis.diagonal

    @property
    def hf_index(self) -> int:
        return self.basis.index_of(hf_determinant(self.spec))

    def prepare(self) -> None:
        """Assemble the sector into CSC sparse form (two passes, uncounted)."""
        if self._csc is not None:
            return
        spec, basis = self.spec, self.basis
        dim = basis.dim
        diag = basis.diagonal
        counts = np.empty(dim + 1, dtype=np.int64)
        counts[0] = 0
        for j in range(dim):
            counts[j + 1] = len(_column_kernel(spec, basis, j, 0.0)[0])
        indptr = np.cumsum(counts)
        nnz = int(indptr[-1])
        index_dtype = np.int32 if dim < 2**31 else np.int64
        rows = np.empty(nnz, dtype=index_dtype)
        data = np.empty(nnz)
        for j in range(dim):
            r, v = _column_kernel(spec, basis, j, float(diag[j]))
            order = np.argsort(r)
            lo, hi = indptr[j], indptr[j + 1]
            rows[lo:hi] = np.asarray(r, dtype=index_dtype)[order]
            data[lo:hi] = np.asarray(v)[order]
        self._csc = sp.csc_matrix((data, rows, indptr), shape=(dim, dim))
        self._cached.cache_clear()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        self.prepare()
        return self._csc @ x

    def nnz_per_column(self) -> np.ndarray:
        self.prepare()
        return np.diff(self._csc.indptr)


def ground_state_reference(spec: LatticeSpec, oracle: HubbardOracle | None = None,
                           shift: float = 100.0) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and eigenvector of H via the harness eigensolver.

    Runs on ``shift*I - H`` so the ground state becomes the leading
    eigenpair of a positive definite operator; returns
    ``(shift - lambda_max(shift*I - H), v)``.
    """
    from .harness import compute_reference
    from .operators import shift_scale

    if oracle is None:
        oracle = HubbardOracle(spec)
    ref = compute_reference(shift_scale(oracle, -1.0, shift))
    return shift - ref.lambda1, ref.v1


@dataclass(frozen=True)
class SectorInfo:
    dim: int
    sector_momentum: tuple[int, int]
    nnz_min: int
    nnz_median: int
    nnz_max: int
    diag_min: float
    diag_max: float
    hf_index: int


def sector_info(spec: LatticeSpec, max_dim: int = DEFAULT_SECTOR_CAP) -> SectorInfo:
    """Structural summary used by ``eigencd hubbard info``."""
    oracle = HubbardOracle(spec, max_dim=max_dim)
    nnz = oracle.nnz_per_column()
    diag = oracle.basis.diagonal
    return SectorInfo(
        dim=oracle.dim,
        sector_momentum=oracle.basis.sector_momentum,
        nnz_min=int(nnz.min()),
        nnz_median=int(np.median(nnz)),
        nnz_max=int(nnz.max()),
        diag_min=float(diag.min()),
        diag_max=float(diag.max()),
        hf_index=oracle.hf_index,
    )
