"""Difference-of-convex outer loops for low-rank recovery.

Two nonconvex models drive recovery of a rank<=k matrix from affine
measurements: minimizing the ratio ``||X||*_{k,2} / ||X||_F`` or the
difference ``||X||*_{k,2} - ||X||_F`` over ``{X : A(X) = b}``. Both norms
coincide exactly on matrices of rank at most k, so either objective
bottoms out at feasible low-rank points.

Each outer iteration linearizes the concave part at the current iterate
``X_s`` and solves the convex subproblem

    minimize ||X||*_{k,2} - alpha(X_s) * <X_s, X>   s.t.  A(X) = b

where ``alpha`` depends on the model: ``ratio`` uses dual/||X||_F^2,
``difference`` uses 1/||X||_F, and the experimental ``mid`` rule uses
1/||X||_{k,2} (all three coincide on rank<=k iterates). A zero step means
the iterate is a critical point; the practical surrogate is the gap
between the subproblem value at the anchor and at its optimum.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core_linalg import MeasurementOperator, as_matrix
from .norms import dual_gauge_value
from .subproblem import SolverConfig, SubproblemSpec, solve

logger = logging.getLogger(__name__)

ALPHA_RULES = ("ratio", "difference", "mid")
INIT_STRATEGIES = ("nuclear", "kyfan", "zero")


def alpha_value(rule: str, X, k: int) -> float:
    """Linearization coefficient of a model at a nonzero iterate.

    ``difference``: 1/||X||_F; ``mid``: 1/||X||_{k,2}; ``ratio``:
    ||X||*_{k,2}/||X||_F^2. The three rules are ordered difference <= mid
    <= ratio and coincide when rank(X) <= k.
    """
    if rule not in ALPHA_RULES:
        raise ValueError(f"unknown alpha rule {rule!r}")
    X = as_matrix(X)
    fro = float(np.linalg.norm(X))
    if fro == 0.0:
        raise ValueError("alpha rules are undefined at X = 0")
    if rule == "difference":
        return 1.0 / fro
    sigma = np.linalg.svd(X, compute_uv=False)
    if rule == "mid":
        return 1.0 / float(np.sqrt(np.sum(sigma[:k] ** 2)))
    return dual_gauge_value(sigma, k) / fro**2


@dataclass
class DcaConfig:
    eps_step: float = 1e-8
    eps_crit: float = 1e-8
    max_outer: int = 100
    solver: SolverConfig = field(default_factory=SolverConfig)
    warm_start: bool = True
    confirm_criticality: bool = True
    keep_iterates: bool = False


@dataclass
class DcaState:
    """Per-iterate bookkeeping (scalars only unless iterates are kept)."""

    iteration: int
    z: float
    ratio_objective: float
    difference_objective: float
    step_norm: float
    X: np.ndarray | None = None


@dataclass
class CriticalityReport:
    gap: float
    Y_star_norm: float


@dataclass
class DcaResult:
    X_final: np.ndarray
    termination: str  # critical | small_step | max_iterations | subproblem_failure
    outer_iterations: int
    objective_trace: list
    ratio_trace: list
    difference_trace: list
    criticality_gap: float
    wall_time: float
    inner_iterations_total: int
    states: list


def init_point(strategy, op: MeasurementOperator, k: int, cfg: DcaConfig | None = None):
    """Initial iterate for a DCA run.

    ``nuclear`` solves the nuclear-norm problem (k is not used),
    ``kyfan`` minimizes the dual Ky Fan 2-k norm itself, and ``zero``
    returns the zero matrix (the run then treats its first subproblem,
    with zero anchor and alpha = 0, as the initialization one step ahead).
    An explicit feasible matrix may be passed through ``run`` instead.
    """
    cfg = cfg or DcaConfig()
    zero = np.zeros(op.shape)
    if strategy == "zero":
        return zero
    if strategy == "nuclear":
        return solve(SubproblemSpec(op, zero, 0.0, 1), cfg.solver).X_star
    if strategy == "kyfan":
        return solve(SubproblemSpec(op, zero, 0.0, k), cfg.solver).X_star
    raise ValueError(f"unknown init strategy {strategy!r}")


def _model_objective(model, ratio_obj, diff_obj):
    return ratio_obj if model == "ratio" else diff_obj


def run(
    op: MeasurementOperator,
    k: int,
    model: str = "difference",
    init="nuclear",
    cfg: DcaConfig | None = None,
) -> DcaResult:
    """Run the DCA outer loop until criticality, stalling, or the cap.

    ``model`` selects the alpha rule (``ratio``, ``difference``, or the
    experimental ``mid``). ``init`` is one of the named strategies or an
    explicit feasible starting matrix. Termination reasons are checked in
    order: criticality gap, step norm, iteration cap. The reported
    iteration count includes initialization solves.
    """
    if model not in ALPHA_RULES:
        raise ValueError(f"unknown model {model!r}")
    cfg = cfg or DcaConfig()
    t0 = time.perf_counter()
    rhs_scale = max(1.0, float(np.linalg.norm(op.rhs)))

    solves = 0
    inner_total = 0
    warm = None

    def finish(X_final, termination, gap, states, traces):
        ratio_trace, diff_trace = traces
        objective_trace = [_model_objective(model, r, d) for r, d in zip(ratio_trace, diff_trace)]
        return DcaResult(
            X_final=X_final,
            termination=termination,
            outer_iterations=solves,
            objective_trace=objective_trace,
            ratio_trace=ratio_trace,
            difference_trace=diff_trace,
            criticality_gap=gap,
            wall_time=time.perf_counter() - t0,
            inner_iterations_total=inner_total,
            states=states,
        )

    # initial iterate
    if isinstance(init, np.ndarray):
        X = as_matrix(init, "init")
        if X.shape != op.shape:
            raise ValueError("explicit init has wrong shape")
    elif init == "zero":
        sol = solve(SubproblemSpec(op, np.zeros(op.shape), 0.0, k), cfg.solver)
        solves += 1
        inner_total += sol.iterations
        warm = sol.state if cfg.warm_start else None
        if not sol.converged:
            return finish(sol.X_star, "subproblem_failure", float("nan"), [], ([], []))
        X = sol.X_star
    else:
        sol = solve(
            SubproblemSpec(op, np.zeros(op.shape), 0.0, 1 if init == "nuclear" else k),
            cfg.solver,
        )
        if init not in ("nuclear", "kyfan"):
            raise ValueError(f"unknown init strategy {init!r}")
        solves += 1
        inner_total += sol.iterations
        if init == "kyfan" and cfg.warm_start:
            warm = sol.state
        if not sol.converged:
            return finish(sol.X_star, "subproblem_failure", float("nan"), [], ([], []))
        X = sol.X_star

    def iterate_stats(M):
        sigma = np.linalg.svd(M, compute_uv=False)
        fro = float(np.linalg.norm(sigma))
        nstar = dual_gauge_value(sigma, k)
        return fro, nstar

    fro, nstar = iterate_stats(X)
    ratio_trace = [nstar / fro]
    diff_trace = [nstar - fro]
    states = [
        DcaState(0, 1.0 / nstar, nstar / fro, nstar - fro, float("nan"),
                 X.copy() if cfg.keep_iterates else None)
    ]
    gap = float("nan")

    while solves < cfg.max_outer:
        if fro <= 1e-14 * rhs_scale:
            raise RuntimeError(
                "iterate collapsed to zero although b is nonzero; operator data is corrupt"
            )
        alpha = alpha_value(model, X, k)
        sol = solve(SubproblemSpec(op, X, alpha, k), cfg.solver, warm=warm)
        solves += 1
        inner_total += sol.iterations
        warm = sol.state if cfg.warm_start else None
        if not sol.converged:
            logger.warning("subproblem failed to converge (%s) at outer %d", sol.stop_reason, solves)
            return finish(X, "subproblem_failure", gap, states, (ratio_trace, diff_trace))

        gap = nstar - sol.objective - alpha * fro**2
        if gap <= cfg.eps_crit:
            if cfg.confirm_criticality:
                tight = solve(SubproblemSpec(op, X, alpha, k), cfg.solver.tightened(), warm=warm)
                solves += 1
                inner_total += tight.iterations
                gap_tight = nstar - tight.objective - alpha * fro**2
                if gap_tight <= cfg.eps_crit:
                    return finish(X, "critical", gap_tight, states, (ratio_trace, diff_trace))
                gap = gap_tight
                sol = tight
                warm = tight.state if cfg.warm_start else None
            else:
                return finish(X, "critical", gap, states, (ratio_trace, diff_trace))

        X_next = sol.X_star
        step = float(np.linalg.norm(X_next - X))
        fro, nstar = iterate_stats(X_next)
        ratio_trace.append(nstar / fro)
        diff_trace.append(nstar - fro)
        states.append(
            DcaState(len(states), 1.0 / nstar, nstar / fro, nstar - fro, step,
                     X_next.copy() if cfg.keep_iterates else None)
        )
        X = X_next
        if step <= cfg.eps_step * (1.0 + fro):
            return finish(X, "small_step", gap, states, (ratio_trace, diff_trace))

    return finish(X, "max_iterations", gap, states, (ratio_trace, diff_trace))


def criticality_gap(
    X_s,
    op: MeasurementOperator,
    k: int,
    rule: str = "difference",
    cfg: DcaConfig | None = None,
) -> CriticalityReport:
    """Gap between the linearized subproblem at the anchor and its optimum.

    A zero gap certifies that the zero displacement solves the linearized
    problem, i.e. the anchor is a critical point of the chosen model. The
    subproblem runs at tightened tolerance.
    """
    cfg = cfg or DcaConfig()
    X_s = as_matrix(X_s, "X_s")
    alpha = alpha_value(rule, X_s, k)
    sol = solve(SubproblemSpec(op, X_s, alpha, k), cfg.solver.tightened())
    sigma = np.linalg.svd(X_s, compute_uv=False)
    nstar = dual_gauge_value(sigma, k)
    gap = nstar - sol.objective - alpha * float(np.linalg.norm(X_s)) ** 2
    return CriticalityReport(gap=gap, Y_star_norm=float(np.linalg.norm(sol.X_star - X_s)))
