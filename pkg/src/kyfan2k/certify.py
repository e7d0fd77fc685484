"""Self-certification suites: the library checking its own invariants.

Each suite draws seeded random inputs, verifies a module's documented
properties at their stated tolerances, and reports its worst residual.
These are the same properties the test suite pins down, packaged so a
deployed build can re-certify itself from the command line (``kyfan2k
certify``). Sample counts scale with ``samples_scale``.
"""

from __future__ import annotations

import traceback
from dataclasses import dataclass

import numpy as np

from . import dca, norms
from .core_linalg import MeasurementOperator
from .norms import dual_gauge_value, dual_kyfan_2k, ksupport, kyfan_2k, project_topk_ball, prox_dual_norm, topk_l2
from .recovery_lab import InstanceSpec, plant, trial_seed
from .subproblem import SolverConfig, SubproblemSpec, solve


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst: float
    detail: str


def _rand_matrix(rng, max_dim=20, min_dim=2):
    m = int(rng.integers(min_dim, max_dim + 1))
    n = int(rng.integers(min_dim, max_dim + 1))
    return rng.normal(size=(m, n)) * float(rng.lognormal())


def _rand_rank_k(rng, m, n, k):
    return rng.normal(size=(m, k)) @ rng.normal(size=(k, n))


def suite_norm_sandwich(scale: float, seed: int = 101) -> SuiteResult:
    """kyfan_2k <= frobenius <= dual value, equalities exactly at rank <= k."""
    rng = np.random.default_rng(seed)
    count = max(1, int(1000 * scale))
    worst = 0.0
    for i in range(count):
        X = _rand_matrix(rng)
        sigma = np.linalg.svd(X, compute_uv=False)
        fro = float(np.linalg.norm(sigma))
        tol = 1e-10 * (1.0 + fro)
        for k in range(1, sigma.size + 1):
            lo = float(np.sqrt(np.sum(sigma[:k] ** 2)))
            hi = dual_gauge_value(sigma, k)
            worst = max(worst, lo - fro, fro - hi)
            if lo > fro + tol or fro > hi + tol:
                return SuiteResult("norm-sandwich", False, worst, f"ordering violated at sample {i}, k={k}")
        # constructed low-rank input: three-way equality
        m, n = X.shape
        k = int(rng.integers(1, min(m, n) + 1))
        L = _rand_rank_k(rng, m, n, k)
        s2 = np.linalg.svd(L, compute_uv=False)
        fro2 = float(np.linalg.norm(s2))
        lo2 = float(np.sqrt(np.sum(s2[:k] ** 2)))
        hi2 = dual_gauge_value(s2, k)
        eq_gap = max(abs(lo2 - fro2), abs(hi2 - fro2)) / fro2
        worst = max(worst, eq_gap)
        if eq_gap > 1e-8:
            return SuiteResult("norm-sandwich", False, worst, f"rank<=k equality failed at sample {i}")
    return SuiteResult("norm-sandwich", True, worst, f"{count} matrices, all valid k")


def suite_dual_certificates(scale: float, seed: int = 102) -> SuiteResult:
    """Witness/decomposition sandwich gaps of the dual gauge stay tight."""
    rng = np.random.default_rng(seed)
    count = max(1, int(1000 * scale))
    worst = 0.0
    for i in range(count):
        if i % 2 == 0:
            d = int(rng.integers(1, 40))
            v = rng.normal(size=d) * float(rng.lognormal())
            k = int(rng.integers(1, d + 1))
            cert = ksupport(v, k)
            recon = float(np.linalg.norm(sum(cert.parts) - v))
        else:
            X = _rand_matrix(rng)
            k = int(rng.integers(1, min(X.shape) + 1))
            cert = dual_kyfan_2k(X, k)
            sigma = np.linalg.svd(X, compute_uv=False)
            recon = float(np.linalg.norm(sum(cert.parts) - sigma))
        tol = 1e-8 * (1.0 + cert.value)
        gap = max(cert.max_gap(), recon)
        worst = max(worst, gap / (1.0 + cert.value))
        if gap > tol:
            return SuiteResult("dual-certificates", False, worst, f"certificate gap at sample {i}")
    return SuiteResult("dual-certificates", True, worst, f"{count} certificates")


def suite_prox(scale: float, seed: int = 103) -> SuiteResult:
    """Prox subgradient certificate and Moreau identity on random inputs."""
    rng = np.random.default_rng(seed)
    count = max(1, int(200 * scale))
    worst = 0.0
    for i in range(count):
        V = _rand_matrix(rng, max_dim=15)
        k = int(rng.integers(1, min(V.shape) + 1))
        lam = float(rng.lognormal())
        Z = prox_dual_norm(V, lam, k)  # raises CertificateError when broken
        U, sig, Vh = np.linalg.svd(V, full_matrices=False)
        proj = project_topk_ball(sig, k, lam)
        moreau = float(np.linalg.norm(Z + (U * proj) @ Vh - V))
        scale_v = 1.0 + float(np.linalg.norm(V))
        u = (V - Z) / lam
        feas = kyfan_2k(u, k) - 1.0
        pair = dual_kyfan_2k(Z, k).value - float(np.vdot(u, Z)) if np.any(Z) else 0.0
        worst = max(worst, moreau / scale_v, feas, pair / scale_v)
        if moreau > 1e-8 * scale_v or feas > 1e-8 or pair > 1e-8 * scale_v:
            return SuiteResult("prox-certificates", False, worst, f"prox optimality failed at sample {i}")
    return SuiteResult("prox-certificates", True, worst, f"{count} prox evaluations")


def suite_ball_projection(scale: float, seed: int = 104) -> SuiteResult:
    """Feasibility and variational inequality of the top-k ball projection."""
    rng = np.random.default_rng(seed)
    count = max(1, int(200 * scale))
    worst = 0.0
    for i in range(count):
        d = int(rng.integers(1, 40))
        v = rng.normal(size=d) * float(rng.lognormal())
        k = int(rng.integers(1, d + 1))
        rho = float(rng.lognormal())
        x = project_topk_ball(v, k, rho)
        feas = topk_l2(x, k) - rho * (1 + 1e-10)
        worst = max(worst, feas / rho)
        if feas > 1e-12:
            return SuiteResult("ball-projection", False, worst, f"infeasible projection at sample {i}")
        for _ in range(50):
            z = rng.normal(size=d)
            z *= rho * float(rng.random()) / topk_l2(z, k)
            gap = float((v - x) @ (z - x))
            worst = max(worst, gap)
            if gap > 1e-8 * (1.0 + float(v @ v)):
                return SuiteResult("ball-projection", False, worst, f"variational inequality at sample {i}")
    return SuiteResult("ball-projection", True, worst, f"{count} projections x 50 feasible points")


def suite_norm_properties(scale: float, seed: int = 105) -> SuiteResult:
    """Homogeneity, duality pairing, unitary invariance."""
    rng = np.random.default_rng(seed)
    count = max(1, int(300 * scale))
    worst = 0.0
    for i in range(count):
        X = _rand_matrix(rng, max_dim=12)
        Zm = rng.normal(size=X.shape)
        k = int(rng.integers(1, min(X.shape) + 1))
        dx = dual_kyfan_2k(X, k).value
        # scale homogeneity
        t = float(rng.normal())
        h = abs(dual_kyfan_2k(t * X, k).value - abs(t) * dx) / (1.0 + abs(t) * dx)
        h = max(h, abs(kyfan_2k(t * X, k) - abs(t) * kyfan_2k(X, k)) / (1.0 + kyfan_2k(X, k)))
        # duality pairing
        pairing = float(np.vdot(X, Zm)) - dx * kyfan_2k(Zm, k)
        # unitary invariance
        Q = np.linalg.qr(rng.normal(size=(X.shape[0],) * 2))[0]
        R = np.linalg.qr(rng.normal(size=(X.shape[1],) * 2))[0]
        ui = abs(dual_kyfan_2k(Q @ X @ R, k).value - dx) / (1.0 + dx)
        worst = max(worst, h, pairing / (1.0 + dx), ui)
        if h > 1e-12 or pairing > 1e-10 * (1 + dx) or ui > 1e-10:
            return SuiteResult("norm-properties", False, worst, f"property violated at sample {i}")
    return SuiteResult("norm-properties", True, worst, f"{count} samples")


def suite_measurement_operator(scale: float, seed: int = 106) -> SuiteResult:
    """Adjoint identity and affine projection geometry."""
    rng = np.random.default_rng(seed)
    count = max(1, int(100 * scale))
    worst = 0.0
    for i in range(count):
        m, n = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        s = int(rng.integers(1, m * n + 1))
        op = MeasurementOperator(rng.normal(size=(s, m, n)), rng.normal(size=s) + 2.0)
        X = rng.normal(size=(m, n))
        y = rng.normal(size=s)
        # adjoint identity against explicit double summation
        lhs = float(op.apply(X) @ y)
        rhs = float(sum(y[j] * np.sum(op.sensing[j] * X) for j in range(s)))
        adj = abs(lhs - rhs) / (1.0 + abs(lhs))
        P = op.project_affine(X)
        idem = float(np.linalg.norm(op.project_affine(P) - P))
        Zf = op.project_affine(rng.normal(size=(m, n)))
        ortho = float(np.vdot(X - P, Zf - P))
        worst = max(worst, adj, idem, ortho)
        if adj > 1e-12 or idem > 1e-10 * (1 + float(np.linalg.norm(X))) or ortho > 1e-8 * (1 + float(np.vdot(X, X))):
            return SuiteResult("measurement-operator", False, worst, f"operator identity failed at sample {i}")
    return SuiteResult("measurement-operator", True, worst, f"{count} operators")


def suite_subproblem_kkt(scale: float, seed: int = 107) -> SuiteResult:
    """Solver reaches its KKT tolerances and beats sampled feasible points."""
    rng = np.random.default_rng(seed)
    count = max(1, int(8 * scale))
    worst = 0.0
    cfg = SolverConfig()
    for i in range(count):
        m, n, r = 10, 8, 2
        d_r = r * (m + n - r)
        s = int(rng.integers(d_r, m * n + 1))
        inst = plant(InstanceSpec(m, n, r, s, seed=int(rng.integers(2**32))))
        if i % 2 == 0:
            spec = SubproblemSpec(inst.op, np.zeros((m, n)), 0.0, r)
        else:
            anchor = inst.op.project_affine(rng.normal(size=(m, n)))
            spec = SubproblemSpec(inst.op, anchor, dca.alpha_value("mid", anchor, r), r)
        sol = solve(spec, cfg)
        worst = max(worst, sol.kkt_primal / cfg.eps_primal, sol.kkt_dual / cfg.eps_dual)
        if not (sol.kkt_primal <= cfg.eps_primal and sol.kkt_dual <= cfg.eps_dual):
            return SuiteResult("subproblem-kkt", False, worst, f"KKT tolerances missed at sample {i}")
        for _ in range(50):
            Zf = inst.op.project_affine(rng.normal(size=(m, n)) * 3)
            obj_z = dual_gauge_value(np.linalg.svd(Zf, compute_uv=False), r) - spec.alpha * float(
                np.vdot(spec.anchor, Zf)
            )
            slack = sol.objective - obj_z - 1e-6 * (1 + abs(obj_z))
            worst = max(worst, slack)
            if slack > 0:
                return SuiteResult("subproblem-kkt", False, worst, f"sampled point beats solver at sample {i}")
    return SuiteResult("subproblem-kkt", True, worst, f"{count} solves x 50 feasible samples")


def suite_dca_monotone(scale: float, seed: int = 108) -> SuiteResult:
    """Model objectives are non-increasing along DCA runs."""
    rng = np.random.default_rng(seed)
    count = max(1, int(4 * scale))
    worst = 0.0
    for i in range(count):
        inst = plant(InstanceSpec(12, 10, 2, int(rng.integers(45, 90)), seed=int(rng.integers(2**32))))
        model = "ratio" if i % 2 == 0 else "difference"
        res = dca.run(inst.op, 2, model=model, init="zero" if i % 2 else "nuclear")
        trace = res.ratio_trace if model == "ratio" else res.difference_trace
        steps = np.diff(trace)
        viol = float(np.max(steps)) if steps.size else 0.0
        floor = min(res.ratio_trace) - 1.0 if model == "ratio" else min(res.difference_trace)
        worst = max(worst, viol, -floor)
        if viol > 1e-8 or floor < -1e-10:
            return SuiteResult("dca-monotonicity", False, worst, f"trace violated at run {i} ({model})")
    return SuiteResult("dca-monotonicity", True, worst, f"{count} runs")


def suite_lab_determinism(scale: float, seed: int = 109) -> SuiteResult:
    """Same seed reproduces instances bit for bit; seed splitting is frozen."""
    a = plant(InstanceSpec(8, 6, 2, 20, seed=2024))
    b = plant(InstanceSpec(8, 6, 2, 20, seed=2024))
    same = (
        np.array_equal(a.M, b.M)
        and np.array_equal(a.op.sensing, b.op.sensing)
        and np.array_equal(a.op.rhs, b.op.rhs)
    )
    consistent = float(np.max(np.abs(a.op.apply(a.M) - a.op.rhs)))
    # frozen value of the published SHA-256 seed-splitting rule
    pinned = trial_seed(0, 0, 0) == 0x405A84ABCB25F4D5
    ok = same and consistent == 0.0 and pinned
    return SuiteResult("lab-determinism", ok, consistent, "bitwise instance replay and pinned seed rule")


ALL_SUITES = (
    ("norm-sandwich", suite_norm_sandwich),
    ("dual-certificates", suite_dual_certificates),
    ("prox-certificates", suite_prox),
    ("ball-projection", suite_ball_projection),
    ("norm-properties", suite_norm_properties),
    ("measurement-operator", suite_measurement_operator),
    ("subproblem-kkt", suite_subproblem_kkt),
    ("dca-monotonicity", suite_dca_monotone),
    ("lab-determinism", suite_lab_determinism),
)


def run_suites(samples_scale: float = 1.0, inject_fault: str | None = None) -> list[SuiteResult]:
    """Run all suites; exceptions count as failures of their suite."""
    if samples_scale <= 0:
        raise ValueError("samples_scale must be positive")
    norms._set_fault_mode(inject_fault)
    results = []
    try:
        for name, fn in ALL_SUITES:
            try:
                results.append(fn(samples_scale))
            except Exception as exc:  # deliberate: a crashing suite is a failing suite
                results.append(SuiteResult(name, False, float("inf"), f"{type(exc).__name__}: {exc}"))
                if inject_fault is None:
                    traceback.print_exc()
    finally:
        norms._set_fault_mode(None)
    return results
