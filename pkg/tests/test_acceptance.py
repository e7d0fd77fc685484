"""Acceptance suite: one test per release criterion, each printing a
PASS line with its worst observed residual (run with ``pytest -s`` to see
them). The desk-scale phase-transition probabilities were recorded from
the first full run of this suite and are frozen below as regression
values with +-2/K tolerance.
"""

import math
import os

import numpy as np
import pytest

from kyfan2k import dca
from kyfan2k.dca import DcaConfig, alpha_value, run
from kyfan2k.norms import (
    dual_gauge_value,
    dual_kyfan_2k,
    ksupport,
    kyfan_2k,
    project_topk_ball,
    prox_dual_norm,
    topk_l2,
)
from kyfan2k.recovery_lab import InstanceSpec, TrialConfig, plant, relative_error, run_sweep
from kyfan2k.subproblem import SolverConfig, SubproblemSpec, solve


def report(criterion: int, detail: str):
    print(f"\n[ACCEPTANCE {criterion}] PASS  {detail}")


def rank_k_matrix(rng, m, n, k):
    return rng.normal(size=(m, k)) @ rng.normal(size=(k, n))


def test_criterion_1_norm_sandwich():
    rng = np.random.default_rng(1001)
    worst_order = 0.0
    worst_eq = 0.0
    for i in range(1000):
        m = int(rng.integers(2, 61))
        n = int(rng.integers(2, 61))
        X = rng.normal(size=(m, n)) * float(rng.lognormal())
        sigma = np.linalg.svd(X, compute_uv=False)
        fro = float(np.linalg.norm(sigma))
        tol = 1e-10 * (1 + fro)
        for k in range(1, sigma.size + 1):
            lo = float(np.sqrt(np.sum(sigma[:k] ** 2)))
            hi = dual_gauge_value(sigma, k)
            worst_order = max(worst_order, lo - fro, fro - hi)
            assert lo <= fro + tol
            assert fro <= hi + tol
        # constructed rank <= k inputs: three-way equality at 1e-8 relative
        k = int(rng.integers(1, min(m, n) + 1))
        L = rank_k_matrix(rng, m, n, k)
        s2 = np.linalg.svd(L, compute_uv=False)
        frol = float(np.linalg.norm(s2))
        gap = max(
            abs(float(np.sqrt(np.sum(s2[:k] ** 2))) - frol),
            abs(dual_gauge_value(s2, k) - frol),
        ) / frol
        worst_eq = max(worst_eq, gap)
        assert gap <= 1e-8
        # random full-rank rectangular matrices keep a strict gap
        if i < 200:
            nn = int(rng.integers(2, 40))
            R = rng.normal(size=(nn + 5, nn))
            fror = float(np.linalg.norm(R))
            srr = np.linalg.svd(R, compute_uv=False)
            for k in range(1, nn):
                assert fror - float(np.sqrt(np.sum(srr[:k] ** 2))) >= 1e-6
                assert dual_gauge_value(srr, k) - fror >= 1e-6
    report(1, f"1000 matrices, worst ordering slack {worst_order:.2e}, worst low-rank equality gap {worst_eq:.2e}")


def test_criterion_2_certificates():
    rng = np.random.default_rng(1002)
    worst_cert = 0.0
    for i in range(1000):
        if i % 2 == 0:
            d = int(rng.integers(1, 50))
            k = int(rng.integers(1, d + 1))
            v = rng.normal(size=d) * float(rng.lognormal())
            cert = ksupport(v, k)
        else:
            m, n = int(rng.integers(2, 25)), int(rng.integers(2, 25))
            k = int(rng.integers(1, min(m, n) + 1))
            cert = dual_kyfan_2k(rng.normal(size=(m, n)) * float(rng.lognormal()), k)
        rel = cert.max_gap() / (1 + cert.value)
        worst_cert = max(worst_cert, rel)
        assert cert.max_gap() <= 1e-8 * (1 + cert.value)
    worst_prox = 0.0
    for _ in range(200):
        m, n = int(rng.integers(2, 15)), int(rng.integers(2, 15))
        k = int(rng.integers(1, min(m, n) + 1))
        V = rng.normal(size=(m, n)) * float(rng.lognormal())
        lam = float(rng.lognormal())
        Z = prox_dual_norm(V, lam, k)
        scale = 1 + float(np.linalg.norm(V))
        U, sig, Vh = np.linalg.svd(V, full_matrices=False)
        moreau = float(np.linalg.norm(Z + (U * project_topk_ball(sig, k, lam)) @ Vh - V))
        u = (V - Z) / lam
        feas = kyfan_2k(u, k) - 1.0
        pair = dual_kyfan_2k(Z, k).value - float(np.vdot(u, Z))
        worst_prox = max(worst_prox, moreau / scale, feas, pair / scale)
        assert moreau <= 1e-8 * scale
        assert feas <= 1e-8
        assert pair <= 1e-8 * scale
    report(2, f"1000 certificates worst rel gap {worst_cert:.2e}; 200 prox checks worst {worst_prox:.2e}")


def test_criterion_3_subproblem_kkt():
    rng = np.random.default_rng(1003)
    cfg = SolverConfig()
    worst_primal = worst_dual = worst_opt = 0.0
    for i in range(50):
        m = int(rng.integers(6, 31))
        n = int(rng.integers(6, 31))
        r = int(rng.integers(1, 4))
        d_r = r * (m + n - r)
        s = int(rng.integers(d_r, m * n + 1))
        inst = plant(InstanceSpec(m, n, r, s, seed=int(rng.integers(2**63))))
        if i % 2 == 0:
            spec = SubproblemSpec(inst.op, np.zeros((m, n)), 0.0, r)
        else:
            anchor = inst.op.project_affine(rng.normal(size=(m, n)))
            spec = SubproblemSpec(inst.op, anchor, alpha_value("mid", anchor, r), r)
        sol = solve(spec, cfg)
        worst_primal = max(worst_primal, sol.kkt_primal)
        worst_dual = max(worst_dual, sol.kkt_dual)
        assert sol.kkt_primal <= 1e-9, f"instance {i}: primal {sol.kkt_primal:.2e}"
        assert sol.kkt_dual <= 1e-6, f"instance {i}: dual {sol.kkt_dual:.2e}"
        for _ in range(50):
            Z = inst.op.project_affine(rng.normal(size=(m, n)) * 3)
            obj_z = dual_gauge_value(np.linalg.svd(Z, compute_uv=False), r) - spec.alpha * float(
                np.vdot(spec.anchor, Z)
            )
            slack = sol.objective - obj_z - 1e-6 * (1 + abs(obj_z))
            worst_opt = max(worst_opt, slack)
            assert slack <= 0
    report(3, f"50 solves: worst primal {worst_primal:.2e}, dual {worst_dual:.2e}, sampled-optimality slack {worst_opt:.2e}")


def test_criterion_4_dca_structure():
    rng = np.random.default_rng(1004)
    # Prop 1(i): ratio trace monotone over 20 runs
    worst_step = -np.inf
    for i in range(20):
        m, n, r = 12, 10, 2
        s = int(rng.integers(int(1.1 * r * (m + n - r)), 80))
        inst = plant(InstanceSpec(m, n, r, s, seed=int(rng.integers(2**63))))
        res = run(inst.op, r, model="ratio", init="zero" if i % 2 else "nuclear")
        steps = np.diff(res.ratio_trace)
        if steps.size:
            worst_step = max(worst_step, float(np.max(steps)))
        assert steps.size == 0 or np.max(steps) <= 1e-8
        assert min(res.ratio_trace) >= 1 - 1e-10
    # fixed point at the planted truth: immediate exact termination
    inst = plant(InstanceSpec(14, 11, 2, 70, seed=77))
    res = run(inst.op, 2, model="difference", init=inst.M)
    assert res.termination == "critical"
    assert relative_error(res.X_final, inst.M) == 0.0
    # critical-point anchor: the subproblem returns the anchor
    worst_fp = 0.0
    for seed in (5, 6, 7):
        inst = plant(InstanceSpec(10, 9, 2, 55, seed=seed))
        alpha = alpha_value("mid", inst.M, 2)
        sol = solve(SubproblemSpec(inst.op, inst.M, alpha, 2))
        dist = float(np.linalg.norm(sol.X_star - inst.M))
        worst_fp = max(worst_fp, dist)
        assert dist <= 1e-6
    report(4, f"20 monotone runs worst step {worst_step:.2e}; fixed-point exact; anchor return worst {worst_fp:.2e}")


# Desk-scale phase transition: m=20, n=16, r=2, K=25, master seed 1729.
# Probabilities recorded from the first full run of this suite; tolerance
# +-2/K per cell.
DESK_GRID = [75, 95, 115, 135, 320]
DESK_K = 25
DESK_SEED = 1729
DESK_FROZEN_PROB = {
    ("nuclear", 75): 0.00,
    ("nuclear", 95): 0.00,
    ("nuclear", 115): 0.08,
    ("nuclear", 135): 0.80,
    ("nuclear", 320): 1.00,
    ("k2-nuclear", 75): 0.92,
    ("k2-nuclear", 95): 1.00,
    ("k2-nuclear", 115): 1.00,
    ("k2-nuclear", 135): 1.00,
    ("k2-nuclear", 320): 1.00,
    ("k2-zero", 75): 0.92,
    ("k2-zero", 95): 1.00,
    ("k2-zero", 115): 1.00,
    ("k2-zero", 135): 1.00,
    ("k2-zero", 320): 1.00,
}


@pytest.fixture(scope="module")
def desk_sweep():
    return run_sweep(
        20, 16, DESK_GRID, trials=DESK_K,
        methods=("nuclear", "k2-nuclear", "k2-zero"),
        cfg=TrialConfig(), master_seed=DESK_SEED,
        workers=int(os.environ.get("KYFAN2K_TEST_WORKERS", "2")), r=2,
    )


def test_criterion_6_desk_phase_transition(desk_sweep):
    cells = {(c.method, c.s): c for c in desk_sweep.cells}
    tol = 2.0 / DESK_K
    for (method, s), frozen in DESK_FROZEN_PROB.items():
        got = cells[(method, s)].recovery_prob
        assert abs(got - frozen) <= tol, f"{method}@{s}: prob {got} vs frozen {frozen}"
    for method in ("nuclear", "k2-nuclear", "k2-zero"):
        probs = [cells[(method, s)].recovery_prob for s in DESK_GRID]
        # non-decreasing in s, allowing one inversion of at most 1/K
        inversions = [(probs[i] - probs[i + 1]) for i in range(len(probs) - 1) if probs[i] > probs[i + 1]]
        assert len(inversions) <= 1
        assert all(v <= 1.0 / DESK_K + 1e-12 for v in inversions)
        # K2 methods never fall more than 1/K below nuclear
        if method != "nuclear":
            for s in DESK_GRID:
                assert cells[(method, s)].recovery_prob >= cells[("nuclear", s)].recovery_prob - 1.0 / DESK_K
    for method in ("nuclear", "k2-nuclear", "k2-zero"):
        assert cells[(method, 320)].recovery_prob == 1.0
    probs_line = "; ".join(
        f"{m}: " + ",".join(f"{cells[(m, s)].recovery_prob:.2f}" for s in DESK_GRID)
        for m in ("nuclear", "k2-nuclear", "k2-zero")
    )
    report(6, f"K={DESK_K} probabilities per s={DESK_GRID}: {probs_line}")


def test_criterion_7_k1_consistency():
    rng = np.random.default_rng(1007)
    worst = 0.0
    for i in range(20):
        m, n = int(rng.integers(6, 13)), int(rng.integers(5, 11))
        s = int(rng.integers(int(0.6 * m * n), m * n + 1))
        inst = plant(InstanceSpec(m, n, 1, s, seed=int(rng.integers(2**63))))
        nuclear = solve(SubproblemSpec(inst.op, np.zeros((m, n)), 0.0, 1))
        via_dca = run(inst.op, 1, model="difference", init="zero", cfg=DcaConfig(max_outer=1))
        dist = float(np.linalg.norm(nuclear.X_star - via_dca.X_final))
        worst = max(worst, dist)
        assert dist <= 1e-6
    report(7, f"20 instances, worst minimizer distance {worst:.2e}")


def test_criterion_8_iterations_decrease_with_s(desk_sweep):
    cells = {(c.method, c.s): c for c in desk_sweep.cells}
    details = []
    for method in ("k2-nuclear", "k2-zero"):
        recovering = [s for s in DESK_GRID if cells[(method, s)].recovered_count > 0]
        s_first, s_last = min(recovering), max(recovering)
        lo = cells[(method, s_first)].mean_outer_iters_recovered
        hi = cells[(method, s_last)].mean_outer_iters_recovered
        assert hi < lo, f"{method}: outer iterations {lo} -> {hi} did not decrease"
        details.append(f"{method}: {lo:.1f}@s={s_first} -> {hi:.1f}@s={s_last}")
    report(8, "; ".join(details))


PAPER_GRID = list(range(180, 501, 20))


@pytest.mark.slow
@pytest.mark.skipif(
    not os.environ.get("KYFAN2K_PAPER_SCALE"),
    reason="hours-long paper-scale gate; set KYFAN2K_PAPER_SCALE=1 to run",
)
def test_criterion_5_paper_scale_phase_transition():
    report_sweep = run_sweep(
        50, 40, PAPER_GRID, trials=50,
        methods=("nuclear", "k2-nuclear", "k2-zero"),
        cfg=TrialConfig(), master_seed=DESK_SEED,
        workers=int(os.environ.get("KYFAN2K_TEST_WORKERS", "4")), r=2,
    )
    cells = {(c.method, c.s): c for c in report_sweep.cells}
    for s in PAPER_GRID:
        if s >= 250:
            for method in ("k2-nuclear", "k2-zero"):
                assert cells[(method, s)].recovery_prob >= 0.9, f"{method}@{s}"
        if s <= 300:
            assert cells[("nuclear", s)].recovery_prob <= 0.1, f"nuclear@{s}"
    report(5, "paper-scale gates hold (K2 >= 0.9 for s >= 250; nuclear <= 0.1 for s <= 300)")
