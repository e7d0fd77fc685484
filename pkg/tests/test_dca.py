import numpy as np
import pytest

from kyfan2k import dca
from kyfan2k.dca import DcaConfig, alpha_value, criticality_gap, init_point, run
from kyfan2k.recovery_lab import InstanceSpec, plant, relative_error
from kyfan2k.subproblem import SolverConfig, SubproblemSpec, solve


def planted(m, n, r, s, seed):
    return plant(InstanceSpec(m=m, n=n, r=r, s=s, seed=seed))


class TestAlphaValue:
    def test_difference_rule_diag(self):
        X = np.diag([3.0, 2.0, 1.0])
        assert alpha_value("difference", X, 2) == pytest.approx(1 / np.sqrt(14))

    def test_mid_rule_diag(self):
        X = np.diag([3.0, 2.0, 1.0])
        assert alpha_value("mid", X, 2) == pytest.approx(1 / np.sqrt(13))

    def test_ratio_rule_diag(self):
        X = np.diag([3.0, 2.0, 1.0])
        assert alpha_value("ratio", X, 2) == pytest.approx(3 * np.sqrt(2) / 14)

    def test_sandwich_ordering(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            m, n = rng.integers(2, 9, size=2)
            k = int(rng.integers(1, min(m, n) + 1))
            X = rng.normal(size=(m, n)) * rng.lognormal()
            lo = alpha_value("difference", X, k)
            mid = alpha_value("mid", X, k)
            hi = alpha_value("ratio", X, k)
            assert lo <= mid + 1e-12 * lo
            assert mid <= hi + 1e-12 * mid

    def test_rules_agree_on_low_rank(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(6, 2)) @ rng.normal(size=(2, 5))
        vals = [alpha_value(rule, X, 2) for rule in ("difference", "mid", "ratio")]
        assert max(vals) - min(vals) <= 1e-10 * max(vals)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            alpha_value("difference", np.zeros((3, 3)), 1)

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            alpha_value("steep", np.eye(3), 1)


class TestRun:
    def test_recovers_planted_instance(self):
        inst = planted(12, 10, 2, 60, seed=2)
        res = run(inst.op, 2, model="difference", init="nuclear")
        assert relative_error(res.X_final, inst.M) <= 1e-6
        sigma = np.linalg.svd(res.X_final, compute_uv=False)
        ratio = res.ratio_trace[-1]
        assert abs(ratio - 1.0) <= 1e-6

    def test_starts_critical_at_truth(self):
        inst = planted(10, 8, 2, 50, seed=3)
        res = run(inst.op, 2, model="difference", init=inst.M)
        assert res.termination == "critical"
        assert np.array_equal(res.X_final, inst.M)
        assert relative_error(res.X_final, inst.M) == 0.0

    def test_ratio_trace_monotone(self):
        for seed in (4, 5):
            inst = planted(10, 8, 2, 45, seed=seed)
            res = run(inst.op, 2, model="ratio", init="zero")
            steps = np.diff(res.ratio_trace)
            assert steps.size == 0 or np.max(steps) <= 1e-8
            assert min(res.ratio_trace) >= 1 - 1e-10

    def test_difference_trace_monotone_and_nonnegative(self):
        for seed in (6, 7):
            inst = planted(10, 8, 2, 45, seed=seed)
            res = run(inst.op, 2, model="difference", init="nuclear")
            steps = np.diff(res.difference_trace)
            assert steps.size == 0 or np.max(steps) <= 1e-8
            assert min(res.difference_trace) >= -1e-10

    def test_objective_trace_matches_model(self):
        inst = planted(10, 8, 2, 45, seed=8)
        res = run(inst.op, 2, model="ratio", init="zero")
        assert res.objective_trace == res.ratio_trace

    def test_vanishing_normalized_steps(self):
        # disable the criticality exit so the run ends on small steps, then
        # the trailing normalized-iterate increments must be tiny
        inst = planted(10, 8, 2, 60, seed=9)
        cfg = DcaConfig(eps_crit=0.0, keep_iterates=True)
        res = run(inst.op, 2, model="difference", init="nuclear", cfg=cfg)
        assert res.termination == "small_step"
        iterates = [st.X for st in res.states]
        zs = [st.z for st in res.states]
        normalized = [X * z for X, z in zip(iterates, zs)]
        tail = [
            np.linalg.norm(b - a) for a, b in zip(normalized[-6:-1], normalized[-5:])
        ]
        scale = 1 + np.linalg.norm(res.X_final)
        assert tail[-1] <= 10 * cfg.eps_step * scale

    def test_max_iterations_cap(self):
        inst = planted(10, 8, 2, 36, seed=10)  # s barely above d_r: hard
        cfg = DcaConfig(max_outer=3)
        res = run(inst.op, 2, model="difference", init="zero", cfg=cfg)
        assert res.outer_iterations <= 3
        assert res.termination in ("max_iterations", "critical", "small_step")

    def test_unknown_model(self):
        inst = planted(5, 4, 1, 10, seed=11)
        with pytest.raises(ValueError):
            run(inst.op, 1, model="sum")


class TestInit:
    def test_zero_then_one_step_equals_kyfan_init(self):
        inst = planted(8, 6, 2, 30, seed=12)
        x_kyfan = init_point("kyfan", inst.op, 2)
        res = run(inst.op, 2, model="difference", init="zero", cfg=DcaConfig(max_outer=1))
        assert np.linalg.norm(res.X_final - x_kyfan) <= 1e-6

    def test_nuclear_init_independent_of_k(self):
        inst = planted(8, 6, 3, 30, seed=13)
        a = init_point("nuclear", inst.op, 1)
        b = init_point("nuclear", inst.op, 3)
        assert np.array_equal(a, b)

    def test_singleton_feasible_all_strategies_agree(self):
        inst = planted(4, 3, 2, 12, seed=14)
        a = init_point("nuclear", inst.op, 2)
        b = init_point("kyfan", inst.op, 2)
        assert np.linalg.norm(a - b) <= 1e-7 * (1 + np.linalg.norm(a))
        assert np.linalg.norm(a - inst.M) <= 1e-7 * (1 + np.linalg.norm(inst.M))

    def test_zero_strategy_returns_zero_matrix(self):
        inst = planted(4, 3, 2, 12, seed=15)
        assert np.all(init_point("zero", inst.op, 2) == 0)

    def test_unknown_strategy(self):
        inst = planted(4, 3, 2, 12, seed=16)
        with pytest.raises(ValueError):
            init_point("warm", inst.op, 2)


class TestCriticalityGap:
    def test_low_rank_feasible_anchor_is_critical(self):
        inst = planted(8, 7, 2, 40, seed=17)
        rep = criticality_gap(inst.M, inst.op, 2, rule="mid")
        assert rep.gap >= -1e-8
        assert rep.gap <= 1e-8

    def test_failed_nuclear_solution_is_not_critical(self):
        # in the regime where nuclear misses, its solution must leave a gap
        inst = planted(12, 10, 2, 50, seed=18)
        x_nuc = init_point("nuclear", inst.op, 2)
        assert relative_error(x_nuc, inst.M) > 1e-3  # nuclear really failed
        rep = criticality_gap(x_nuc, inst.op, 2, rule="difference")
        assert rep.gap > 1e-4

    def test_difference_rule_gap_scales_linearly(self):
        from kyfan2k.core_linalg import MeasurementOperator

        inst = planted(8, 6, 2, 30, seed=19)
        anchor = inst.op.project_affine(np.ones((8, 6)))
        rep1 = criticality_gap(anchor, inst.op, 2, rule="difference")
        t = 3.5
        op_t = MeasurementOperator(inst.op.sensing, t * inst.op.rhs)
        rep_t = criticality_gap(t * anchor, op_t, 2, rule="difference")
        assert rep_t.gap == pytest.approx(t * rep1.gap, rel=1e-4, abs=1e-8)
