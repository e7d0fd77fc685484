"""Planted-instance generation, recovery trials, and sweep aggregation.

Instances follow the classic compressed-sensing setup: a ground-truth
rank-r matrix ``M = M_L @ M_R.T`` with i.i.d. standard normal factors,
``s`` Gaussian sensing matrices with N(0, 1/s) entries, and measurements
``b_i = <A_i, M>`` defined exactly from M. A method "recovers" when the
relative Frobenius error against M falls below the configured threshold.

Reproducibility: all randomness flows through the Philox 4x64 counter
generator keyed by an explicit 64-bit seed, with normal variates drawn by
the Box-Muller transform on the generator's uniform stream. Per-trial
seeds are derived from (master seed, cell index, trial index) by SHA-256;
see :func:`trial_seed`. Identical seeds therefore reproduce identical
instances and identical sweep statistics regardless of worker count.
"""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.random import Generator, Philox

from . import dca
from .core_linalg import MeasurementOperator, OperatorDegenerateError
from .subproblem import SolverConfig, SubproblemSpec, solve

logger = logging.getLogger(__name__)

METHODS = ("nuclear", "k2-nuclear", "k2-zero", "k2-mid")


@dataclass(frozen=True)
class InstanceSpec:
    m: int
    n: int
    r: int
    s: int
    seed: int

    def __post_init__(self):
        if not 1 <= self.r <= min(self.m, self.n):
            raise ValueError(f"rank r={self.r} out of range for {self.m}x{self.n}")
        if not 1 <= self.s <= self.m * self.n:
            raise ValueError(
                f"measurement count s={self.s} must lie in [1, m*n={self.m * self.n}] "
                "for the map to be surjective"
            )

    @property
    def d_r(self) -> int:
        """Degrees of freedom of a rank-r m x n matrix: r(m + n - r)."""
        return self.r * (self.m + self.n - self.r)


@dataclass(frozen=True)
class PlantedInstance:
    M: np.ndarray
    op: MeasurementOperator
    spec: InstanceSpec


@dataclass
class TrialRecord:
    method: str
    recovered: bool
    relative_error: float
    outer_iterations: int
    inner_iterations_total: int
    wall_time: float
    termination: str


@dataclass
class SweepCell:
    method: str
    m: int
    n: int
    r: int
    k: int
    s: int
    d_r: int
    trials: int
    recovered_count: int
    recovery_prob: float
    mean_rel_err: float
    mean_outer_iters_all: float
    mean_outer_iters_recovered: float
    mean_inner_iters: float
    mean_wall_time_s: float


@dataclass
class SweepReport:
    cells: list
    master_seed: int
    model: str
    eps: float
    trial_records: list = field(default_factory=list)


def _trial_solver_config() -> SolverConfig:
    # recovery is judged at 1e-6 relative error, so subproblems run two
    # orders tighter than the generic solver default
    return SolverConfig(eps_dual=1e-8)


@dataclass
class TrialConfig:
    """Settings shared by all trials of an experiment."""

    eps: float = 1e-6
    model: str = "difference"
    max_outer: int = 100
    solver: SolverConfig = field(default_factory=_trial_solver_config)
    k_override: int | None = None

    def dca_config(self) -> dca.DcaConfig:
        return dca.DcaConfig(max_outer=self.max_outer, solver=self.solver)


def _standard_normal(rng: Generator, size: int) -> np.ndarray:
    """Box-Muller normals from the generator's uniform stream."""
    pairs = (size + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # in (0, 1], keeps the log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate((radius * np.cos(2.0 * np.pi * u2), radius * np.sin(2.0 * np.pi * u2)))
    return z[:size]


def trial_seed(master_seed: int, cell_index: int, trial_index: int) -> int:
    """Published seed-splitting rule: SHA-256 over the index triple.

    The digest of the ASCII string ``kyfan2k:{master}:{cell}:{trial}`` is
    truncated to its first 8 bytes (big-endian) to form the Philox key.
    """
    msg = f"kyfan2k:{master_seed}:{cell_index}:{trial_index}".encode("ascii")
    return int.from_bytes(hashlib.sha256(msg).digest()[:8], "big")


def plant(spec: InstanceSpec) -> PlantedInstance:
    """Generate a planted instance, fully determined by the spec's seed.

    On the (probability ~0) event of a degenerate Gram matrix the sensing
    matrices are regenerated with the key offset by 2^64 per attempt and
    the event is logged.
    """
    rng = Generator(Philox(key=spec.seed))
    m, n, r, s = spec.m, spec.n, spec.r, spec.s
    ML = _standard_normal(rng, m * r).reshape(m, r)
    MR = _standard_normal(rng, n * r).reshape(n, r)
    M = ML @ MR.T
    sigma = np.linalg.svd(M, compute_uv=False)
    if sigma[min(r, sigma.size) - 1] / sigma[0] < 1e-10:
        raise RuntimeError("planted factors are numerically rank deficient")

    for attempt in range(8):
        if attempt == 0:
            sense_rng = rng
        else:
            logger.warning("degenerate Gram matrix for seed %d, regenerating (attempt %d)",
                           spec.seed, attempt)
            sense_rng = Generator(Philox(key=spec.seed + (attempt << 64)))
        sensing = _standard_normal(sense_rng, s * m * n).reshape(s, m, n) / np.sqrt(s)
        b = sensing.reshape(s, m * n) @ M.ravel()
        try:
            op = MeasurementOperator(sensing, b)
        except OperatorDegenerateError:
            continue
        return PlantedInstance(M=M, op=op, spec=spec)
    raise OperatorDegenerateError(f"could not build a non-degenerate operator for seed {spec.seed}")


def relative_error(X, M) -> float:
    """||X - M||_F / ||M||_F."""
    return float(np.linalg.norm(np.asarray(X) - np.asarray(M)) / np.linalg.norm(M))


def run_trial(inst: PlantedInstance, method: str, cfg: TrialConfig | None = None) -> TrialRecord:
    """Run one recovery method on a planted instance.

    ``nuclear`` solves the convex nuclear-norm problem once; the ``k2-*``
    methods run the DCA loop with k equal to the planted rank (initialized
    from the nuclear solution, from zero, or with the mid alpha rule).
    """
    cfg = cfg or TrialConfig()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    k = cfg.k_override if cfg.k_override is not None else inst.spec.r
    if cfg.k_override is not None and cfg.k_override != inst.spec.r:
        logger.warning("running with k=%d although the planted rank is %d", k, inst.spec.r)
    op = inst.op
    t0 = time.perf_counter()
    if method == "nuclear":
        sol = solve(SubproblemSpec(op, np.zeros(op.shape), 0.0, 1), cfg.solver)
        X = sol.X_star
        outer = 1
        inner = sol.iterations
        termination = sol.stop_reason if sol.converged else "subproblem_failure"
    else:
        model = "mid" if method == "k2-mid" else cfg.model
        init = "zero" if method == "k2-zero" else "nuclear"
        result = dca.run(op, k, model=model, init=init, cfg=cfg.dca_config())
        X = result.X_final
        outer = result.outer_iterations
        inner = result.inner_iterations_total
        termination = result.termination
    wall = time.perf_counter() - t0
    err = relative_error(X, inst.M)
    return TrialRecord(
        method=method,
        recovered=bool(err <= cfg.eps),
        relative_error=err,
        outer_iterations=outer,
        inner_iterations_total=inner,
        wall_time=wall,
        termination=termination,
    )


def _run_cell_trial(args):
    m, n, cell_index, trial_index, r, s, master_seed, methods, cfg = args
    seed = trial_seed(master_seed, cell_index, trial_index)
    inst = plant(InstanceSpec(m=m, n=n, r=r, s=s, seed=seed))
    records = []
    for method in methods:
        try:
            records.append(run_trial(inst, method, cfg))
        except Exception:
            # a failed trial is data, not a reason to stop the sweep
            logger.exception("trial failed: seed=%d method=%s", seed, method)
            records.append(TrialRecord(method, False, float("inf"), 0, 0, 0.0, "error"))
    return records


def run_sweep(
    m: int,
    n: int,
    grid: list,
    trials: int,
    methods: tuple = ("nuclear", "k2-nuclear", "k2-zero"),
    cfg: TrialConfig | None = None,
    master_seed: int = 0,
    workers: int = 1,
    r: int | None = None,
) -> SweepReport:
    """Sweep a grid of (r, s) cells with ``trials`` instances per cell.

    ``grid`` entries are (r, s) pairs, or plain measurement counts ``s``
    promoted with the ``r`` argument. All methods share each planted
    instance. Results are reduced in (cell, trial) order, so the report is
    identical for any worker count.
    """
    cfg = cfg or TrialConfig()
    if trials < 1:
        raise ValueError("need at least one trial per cell")
    norm_grid = []
    for entry in grid:
        if isinstance(entry, tuple):
            norm_grid.append((int(entry[0]), int(entry[1])))
        elif r is not None:
            norm_grid.append((int(r), int(entry)))
        else:
            raise ValueError("grid entries must be (r, s) pairs when r is not given")

    tasks = [
        (m, n, ci, ti, r, s, master_seed, tuple(methods), cfg)
        for ci, (r, s) in enumerate(norm_grid)
        for ti in range(trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_trial, tasks, chunksize=1))
    else:
        results = [_run_cell_trial(t) for t in tasks]

    cells = []
    all_records = []
    for ci, (r, s) in enumerate(norm_grid):
        cell_results = results[ci * trials:(ci + 1) * trials]
        for mi, method in enumerate(methods):
            recs = [trial[mi] for trial in cell_results]
            all_records.extend(recs)
            recovered = [t for t in recs if t.recovered]
            k = cfg.k_override if cfg.k_override is not None else r
            cells.append(
                SweepCell(
                    method=method,
                    m=m,
                    n=n,
                    r=r,
                    k=k,
                    s=s,
                    d_r=r * (m + n - r),
                    trials=trials,
                    recovered_count=len(recovered),
                    recovery_prob=len(recovered) / trials,
                    mean_rel_err=float(np.mean([t.relative_error for t in recs])),
                    mean_outer_iters_all=float(np.mean([t.outer_iterations for t in recs])),
                    mean_outer_iters_recovered=(
                        float(np.mean([t.outer_iterations for t in recovered]))
                        if recovered else float("nan")
                    ),
                    mean_inner_iters=float(np.mean([t.inner_iterations_total for t in recs])),
                    mean_wall_time_s=float(np.mean([t.wall_time for t in recs])),
                )
            )
    return SweepReport(
        cells=cells, master_seed=master_seed, model=cfg.model, eps=cfg.eps,
        trial_records=all_records,
    )
