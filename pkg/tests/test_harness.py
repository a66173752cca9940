import math

import numpy as np
import pytest

from eigencd.engine import StrategyConfig
from eigencd.harness import (AllSeedsFailed, ReferenceSolution, TraceRecord,
                             compute_reference, emit_trace, eps_obj, eps_tan,
                             projected_energy, read_trace, run_experiment,
                             run_single)
from eigencd.operators import DenseSymmetric, SpectrumSpec, build_synthetic


@pytest.fixture(scope="module")
def instance():
    a = build_synthetic(SpectrumSpec.gapped_grid(120, 10.0, 0.5, 6.0, seed=33))
    return a, compute_reference(a)


class TestReference:
    def test_diagonal_example(self):
        ref = compute_reference(DenseSymmetric(np.diag([3.0, 2.0, 1.0])))
        assert ref.lambda1 == pytest.approx(3.0)
        assert ref.lambda2 == pytest.approx(2.0)
        assert abs(ref.v1[0]) == pytest.approx(1.0)
        assert ref.fstar == pytest.approx(14.0 - 9.0)

    def test_synthetic_spectrum_recovered(self):
        spec = SpectrumSpec.gapped_grid(80, 9.0, 0.3, 5.0, seed=34)
        ref = compute_reference(build_synthetic(spec))
        assert ref.lambda1 == pytest.approx(9.0, abs=1e-8)
        assert ref.lambda2 == pytest.approx(spec.eigenvalues[1], abs=1e-8)

    def test_lanczos_path_matches_dense(self):
        a = build_synthetic(SpectrumSpec.gapped_grid(60, 8.0, 0.2, 4.0, seed=35))
        dense = compute_reference(a)
        lanczos = compute_reference(a, dense_cutoff=10)
        assert lanczos.source == "lanczos"
        assert lanczos.lambda1 == pytest.approx(dense.lambda1, abs=1e-8)
        assert lanczos.lambda2 == pytest.approx(dense.lambda2, abs=1e-7)
        assert abs(float(lanczos.v1 @ dense.v1)) == pytest.approx(1.0, abs=1e-7)

    def test_reference_is_uncounted(self):
        a = build_synthetic(SpectrumSpec.gapped_grid(50, 8.0, 0.2, 4.0, seed=36))
        compute_reference(a)
        assert a.access_count == 0

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            ReferenceSolution(lambda1=2.0, v1=np.array([1.0]), lambda2=2.0,
                              fstar=1.0, frob_sq=5.0, source="dense")


class TestMetrics:
    def test_eps_obj_floor_and_unit(self):
        assert eps_obj(5.0, 5.0) == 0.0
        assert eps_obj(10.0, 5.0) == pytest.approx(1.0)
        assert eps_obj(5.0 - 1e-12, 5.0) == 0.0  # tiny undershoot clamps

    def test_eps_obj_rejects_bad_fstar(self):
        with pytest.raises(ValueError):
            eps_obj(1.0, 0.0)

    def test_projected_energy_examples(self, instance):
        a, ref = instance
        x = ref.v1.copy()
        z = a.array @ x
        assert projected_energy(x, z, np.ones(120)) == pytest.approx(ref.lambda1)
        e1 = np.zeros(120)
        e1[0] = 1.0
        diag2 = DenseSymmetric(np.diag([2.0, 1.0]))
        e = np.array([1.0, 0.0])
        assert projected_energy(e, diag2.array @ e, e) == pytest.approx(2.0)
        assert math.isnan(projected_energy(x, z, np.zeros(120)))

    def test_eps_tan_examples(self, instance):
        _, ref = instance
        assert eps_tan(3.0 * ref.v1, ref.v1) == pytest.approx(0.0, abs=1e-12)
        e1 = np.array([1.0, 0.0])
        e2 = np.array([0.0, 1.0])
        assert math.isinf(eps_tan(e2, e1))

    def test_eps_tan_right_triangle(self):
        a = build_synthetic(SpectrumSpec.gapped_grid(40, 6.0, 0.3, 3.0, seed=37))
        vals, vecs = np.linalg.eigh(a.array)
        x = vecs[:, -1] + 0.1 * vecs[:, -2]
        assert eps_tan(x, vecs[:, -1]) == pytest.approx(0.1, abs=1e-12)


class TestRunExperiment:
    def test_deterministic_stats_collapse(self, instance):
        a, ref = instance
        x0 = np.zeros(120)
        x0[0] = 1.0
        res = run_experiment(a, StrategyConfig(pick="greedy_ls", update="coord_ls"),
                             x0, 1e-6, 10**7, seeds=9, reference=ref)
        s = res.stats
        assert s.min_iters == s.med_iters == s.max_iters
        assert s.seeds_used == 1
        assert s.total_col_access == s.med_iters

    def test_budget_law(self, instance):
        a, ref = instance
        x0 = np.zeros(120)
        x0[0] = 1.0
        budget = 300
        out = run_single(a, StrategyConfig(pick="grad_power", update="coord_ls", t=1.0),
                         x0, 1e-12, budget, 0, ref)
        assert out.status == "budget"
        assert out.col_accesses <= budget + 1
        cols = [rec.col_access for rec in out.trace]
        assert cols == sorted(cols)

    def test_identical_seed_identical_trace(self, instance):
        a, ref = instance
        x0 = np.zeros(120)
        x0[0] = 1.0
        cfg = StrategyConfig(pick="grad_power", update="coord_ls", t=1.0)
        t1 = run_single(a, cfg, x0, 1e-6, 10**7, 3, ref, trace_stride=50)
        t2 = run_single(a, cfg, x0, 1e-6, 10**7, 3, ref, trace_stride=50)
        assert t1.iterations == t2.iterations
        assert [r.__dict__ for r in t1.trace] == [r.__dict__ for r in t2.trace]

    def test_power_method_rate(self, instance):
        a, ref = instance
        x0 = np.zeros(120)
        x0[0] = 1.0
        res = run_experiment(a, StrategyConfig(pick="pm", update="coord_ls"),
                             x0, 1e-6, 10**8, reference=ref)
        out = res.outcomes[0]
        assert out.status == "converged"
        start_eps = out.trace[0].eps_obj
        rate = ref.lambda2 / ref.lambda1
        predicted = math.log(1e-6 / start_eps) / math.log(rate)
        assert predicted / 2 <= out.iterations <= predicted * 2
        assert res.stats.total_col_access == 120 * out.iterations

    def test_stochastic_seeds_vary(self, instance):
        a, ref = instance
        x0 = np.zeros(120)
        x0[0] = 1.0
        res = run_experiment(a, StrategyConfig(pick="grad_power", update="coord_ls", t=1.0),
                             x0, 1e-6, 10**7, seeds=6, reference=ref)
        assert res.stats.seeds_used == 6
        assert res.stats.min_iters <= res.stats.med_iters <= res.stats.max_iters

    def test_divergent_run_raises_when_all_fail(self, instance):
        a, ref = instance
        x0 = np.zeros(120)
        x0[0] = 1.0
        # ridiculous fixed stepsize blows up immediately
        cfg = StrategyConfig(pick="cyclic", update="fixed_grad", gamma=10.0)
        with pytest.raises(AllSeedsFailed):
            run_experiment(a, cfg, x0, 1e-6, 10**7, reference=ref)

    def test_stall_detector_trips(self, instance):
        a, ref = instance
        x0 = np.zeros(120)
        x0[0] = 1.0
        cfg = StrategyConfig(pick="greedy_ls", update="coord_ls", k=4)
        out = run_single(a, cfg, x0, 1e-6, 10**8, 0, ref, stall_checks=500)
        assert out.status in ("stalled", "diverged")


class TestTraceIO:
    def test_round_trip(self, instance, tmp_path):
        a, ref = instance
        x0 = np.zeros(120)
        x0[0] = 1.0
        res = run_experiment(a, StrategyConfig(pick="grad_power", update="coord_ls", t=1.0),
                             x0, 1e-6, 10**7, seeds=2, reference=ref,
                             label="SCD-Grad-LS(1)", trace_stride=100)
        emit_trace([res], tmp_path)
        for out in res.outcomes:
            back = read_trace(tmp_path / f"trace_SCD-Grad-LS-1-_seed{out.seed}.csv")
            assert [r.__dict__ for r in back] == [r.__dict__ for r in out.trace]
        summary = (tmp_path / "summary.csv").read_text().splitlines()
        assert summary[0] == "Method,k,MinIter,MedIter,MaxIter,TotalColAccess"
        assert summary[1].startswith("SCD-Grad-LS(1),1,")

    def test_header_only_for_empty(self, tmp_path):
        from eigencd.harness import ExperimentResult, RunOutcome, RunStats
        res = ExperimentResult(
            label="empty", k=1,
            config=StrategyConfig(pick="cyclic", update="coord_ls"),
            stats=RunStats(0, 0, 0, 0, 1, 0),
            outcomes=[RunOutcome(seed=0, status="converged", iterations=0,
                                 col_accesses=0, trace=[])])
        emit_trace([res], tmp_path)
        lines = (tmp_path / "trace_empty_seed0.csv").read_text().splitlines()
        assert lines == ["iteration,col_access,f,eps_obj,eps_energy,eps_tan"]

    def test_infinity_round_trips(self, tmp_path):
        import csv
        rec = TraceRecord(0, 0, 1.0, 0.5, float("nan"), float("inf"))
        path = tmp_path / "t.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "col_access", "f", "eps_obj", "eps_energy", "eps_tan"])
            w.writerow([rec.iteration, rec.col_access, repr(rec.f_value),
                        repr(rec.eps_obj), repr(rec.eps_energy), repr(rec.eps_tan)])
        back = read_trace(path)[0]
        assert math.isinf(back.eps_tan)
        assert math.isnan(back.eps_energy)
