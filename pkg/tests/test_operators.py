import numpy as np
import pytest

from eigencd.operators import (DenseSymmetric, SpectrumSpec, build_synthetic,
                               column_abs_sum_max, column_norm_max,
                               frobenius_norm_sq, load_dense, max_abs_diag,
                               save_dense, shift_scale)


def dense_from_columns(oracle):
    n = oracle.dim
    a = np.zeros((n, n))
    for j in range(n):
        rows, vals = oracle.column(j)
        if rows is None:
            a[:, j] = vals
        else:
            a[rows, j] = vals
    return a


class TestSpectrumSpec:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            SpectrumSpec(eigenvalues=np.array([]))

    def test_rejects_nonpositive_leading(self):
        with pytest.raises(ValueError):
            SpectrumSpec(eigenvalues=np.array([-1.0, -2.0]))

    def test_rejects_degenerate_leading(self):
        with pytest.raises(ValueError):
            SpectrumSpec(eigenvalues=np.array([2.0, 2.0, 1.0]))

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            SpectrumSpec(eigenvalues=np.array([3.0, 1.0, 2.0]))

    def test_gapped_grid_shape(self):
        spec = SpectrumSpec.gapped_grid(500, 108.0)
        lam = spec.eigenvalues
        assert lam[0] == 108.0
        assert lam[1] == pytest.approx(100.0 - 99.0 / 499.0)
        assert lam[1] < 100.0
        assert lam[-1] == pytest.approx(1.0)
        steps = np.diff(lam[1:])
        assert np.allclose(steps, steps[0])


class TestBuildSynthetic:
    def test_trace_and_frobenius_two_by_two(self):
        a = build_synthetic(SpectrumSpec(eigenvalues=np.array([2.0, 1.0]), seed=9))
        assert np.trace(a.array) == pytest.approx(3.0, abs=1e-12)
        assert frobenius_norm_sq(a) == pytest.approx(5.0, abs=1e-10)

    def test_one_by_one(self):
        a = build_synthetic(SpectrumSpec(eigenvalues=np.array([1.0])))
        assert a.array.shape == (1, 1)
        assert a.array[0, 0] == pytest.approx(1.0)

    def test_exactly_symmetric(self):
        a = build_synthetic(SpectrumSpec.gapped_grid(60, 11.0, 0.5, 5.0, seed=1))
        assert np.abs(a.array - a.array.T).max() == 0.0

    @pytest.mark.parametrize("n,seed", [(50, 0), (200, 3)])
    def test_eigenvalues_recovered(self, n, seed):
        spec = SpectrumSpec.gapped_grid(n, 108.0, seed=seed)
        a = build_synthetic(spec)
        vals = np.linalg.eigvalsh(a.array)[::-1]
        assert np.abs(vals - spec.eigenvalues).max() < 1e-8


class TestShiftScale:
    def test_identity_scaled(self):
        eye = DenseSymmetric(np.eye(3))
        wrapped = shift_scale(eye, 2.0, 1.0)
        rows, vals = wrapped.column(0)
        assert rows is None
        assert vals[0] == pytest.approx(3.0)
        assert vals[1] == vals[2] == 0.0
        assert wrapped.diag(0) == pytest.approx(3.0)

    def test_column_identity(self, small_synthetic):
        a, b = -1.5, 4.0
        wrapped = shift_scale(small_synthetic, a, b)
        for j in (0, 7, 29):
            base_col = small_synthetic.column(j)[1]
            expect = a * base_col.copy()
            expect[j] += b
            got = wrapped.column(j)[1]
            assert np.abs(got - expect).max() == 0.0

    def test_sparse_column_insert(self):
        # a matrix with a structurally zero diagonal entry in sparse form
        class TwoEntries(DenseSymmetric):
            def _column(self, j):
                rows = np.flatnonzero(self._a[:, j])
                return rows, self._a[rows, j]

        m = np.zeros((3, 3))
        m[0, 1] = m[1, 0] = 2.0
        oracle = TwoEntries(m)
        rows, vals = shift_scale(oracle, 1.0, 5.0).column(1)
        assert rows.tolist() == [0, 1]
        assert vals.tolist() == [2.0, 5.0]

    def test_matvec_consistent(self, small_synthetic):
        wrapped = shift_scale(small_synthetic, 2.0, -3.0)
        x = np.arange(30, dtype=float)
        expect = 2.0 * small_synthetic.array @ x - 3.0 * x
        assert np.allclose(wrapped.matvec(x), expect, atol=1e-12)


class TestStreamingPasses:
    def test_column_norm_max_identity(self):
        assert column_norm_max(DenseSymmetric(np.eye(3))) == pytest.approx(1.0)

    def test_column_norm_max_diag(self):
        assert column_norm_max(DenseSymmetric(np.diag([1.0, 2.0, 3.0]))) == pytest.approx(3.0)

    def test_column_norm_max_matches_dense(self):
        a = build_synthetic(SpectrumSpec.gapped_grid(50, 12.0, 0.5, 8.0, seed=4))
        expect = np.linalg.norm(a.array, axis=0).max()
        assert abs(column_norm_max(a) - expect) < 1e-12

    def test_frobenius_identity(self):
        assert frobenius_norm_sq(DenseSymmetric(np.eye(3))) == pytest.approx(3.0)

    def test_aux_scans(self, small_synthetic):
        a = small_synthetic.array
        assert max_abs_diag(small_synthetic) == pytest.approx(np.abs(np.diag(a)).max())
        assert column_abs_sum_max(small_synthetic) == pytest.approx(
            np.abs(a).sum(axis=0).max())

    def test_streaming_passes_uncounted(self, small_synthetic):
        before = small_synthetic.access_count
        column_norm_max(small_synthetic)
        frobenius_norm_sq(small_synthetic)
        assert small_synthetic.access_count == before


class TestAccessCounting:
    def test_column_counts_diag_does_not(self):
        a = DenseSymmetric(np.diag([1.0, 2.0]))
        a.reset_access_count()
        a.column(0)
        a.diag(0)
        a.diag(1)
        a.column(1)
        assert a.access_count == 2

    def test_out_of_range(self):
        a = DenseSymmetric(np.eye(2))
        with pytest.raises(IndexError):
            a.column(2)

    def test_counting_paused_restores(self):
        a = DenseSymmetric(np.eye(2))
        with a.counting_paused():
            a.column(0)
            with a.counting_paused():
                a.column(1)
        a.column(0)
        assert a.access_count == 1


class TestDenseFile:
    def test_round_trip(self, tmp_path):
        a = build_synthetic(SpectrumSpec.gapped_grid(12, 4.0, 0.5, 2.0, seed=8))
        path = tmp_path / "m.txt"
        save_dense(path, a)
        back = load_dense(path)
        assert np.array_equal(back.array, a.array)

    def test_rejects_asymmetric(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2\n1.0 2.0\n3.0 4.0\n")
        with pytest.raises(ValueError, match="not symmetric"):
            load_dense(path)

    def test_rejects_truncated(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("3\n1.0 2.0\n")
        with pytest.raises(ValueError, match="expected"):
            load_dense(path)
