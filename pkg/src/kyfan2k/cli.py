"""Command-line front end: recover, sweep, and certify.

Configuration is a flat ``key = value`` text file overridden by command
line flags; ``--dump-config`` prints the effective settings. Sweeps write
a CSV (one row per method and grid cell) plus two static SVG line charts
(recovery probability and mean wall time versus measurement count) whose
data points are copied verbatim from the CSV so the charts can never
disagree with the table.

Exit codes: recover returns 0 when any method recovers, 2 when none
does, 1 on configuration errors; certify returns 0 when all property
suites pass and 3 otherwise.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .certify import run_suites
from .core_linalg import MeasurementOperator
from .recovery_lab import (
    METHODS,
    InstanceSpec,
    PlantedInstance,
    SweepReport,
    TrialConfig,
    plant,
    run_sweep,
    run_trial,
)
from .subproblem import SolverConfig

SWEEP_COLUMNS = [
    "method", "m", "n", "r", "k", "s", "d_r", "K", "recovered_count",
    "recovery_prob", "mean_rel_err", "mean_outer_iters_all",
    "mean_outer_iters_recovered", "mean_inner_iters", "mean_wall_time_s",
    "model", "seed",
]

TRIAL_COLUMNS = [
    "method", "m", "n", "r", "k", "s", "d_r", "seed", "recovered",
    "relative_error", "outer_iterations", "inner_iterations_total",
    "wall_time_s", "termination", "model",
]


@dataclass
class RunConfig:
    m: int = 20
    n: int = 16
    r: int = 2
    s: int = 115
    k: int = 0  # 0 means "use the planted rank"
    seed: int = 0
    eps: float = 1e-6
    eps_step: float = 1e-8
    eps_crit: float = 1e-8
    eps_primal: float = 1e-9
    eps_dual: float = 1e-8
    max_outer: int = 100
    max_inner: int = 20000
    model: str = "difference"
    methods: str = "nuclear,k2-nuclear,k2-zero"
    s_values: str = ""
    K: int = 25
    workers: int = 1
    out: str = "out"
    timing: str = "wall"  # wall | none; "none" zeroes timing columns for byte-stable output
    operator: str = ""  # optional .npz with sensing/rhs/truth arrays
    samples_scale: float = 1.0
    inject_fault: str = ""

    def trial_config(self) -> TrialConfig:
        solver = SolverConfig(
            eps_primal=self.eps_primal, eps_dual=self.eps_dual, max_iter=self.max_inner
        )
        return TrialConfig(
            eps=self.eps,
            model=self.model,
            max_outer=self.max_outer,
            solver=solver,
            k_override=self.k if self.k > 0 else None,
        )

    def method_list(self) -> list[str]:
        names = [x.strip() for x in self.methods.split(",") if x.strip()]
        for name in names:
            if name not in METHODS:
                raise ValueError(f"unknown method {name!r}; choose from {METHODS}")
        return names

    def s_list(self) -> list[int]:
        if not self.s_values:
            return [self.s]
        return [int(x) for x in self.s_values.split(",") if x.strip()]


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    text = Path(path).read_text(encoding="utf-8")
    known = {f.name: f.type for f in fields(RunConfig)}
    casts = {"int": int, "float": float, "str": str}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        setattr(cfg, key, casts[known[key]](value))
    return cfg


def dump_config(cfg: RunConfig) -> str:
    return "\n".join(f"{f.name} = {getattr(cfg, f.name)}" for f in fields(RunConfig)) + "\n"


def _fmt(x) -> str:
    """Deterministic cell formatting ('.' decimal, nan spelled out)."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if np.isnan(x):
            return "nan"
        return f"{x:.9g}"
    return str(x)


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _sweep_rows(report: SweepReport, timing: str) -> list[dict]:
    rows = []
    for c in report.cells:
        rows.append({
            "method": c.method, "m": c.m, "n": c.n, "r": c.r, "k": c.k, "s": c.s,
            "d_r": c.d_r, "K": c.trials, "recovered_count": c.recovered_count,
            "recovery_prob": c.recovery_prob, "mean_rel_err": c.mean_rel_err,
            "mean_outer_iters_all": c.mean_outer_iters_all,
            "mean_outer_iters_recovered": c.mean_outer_iters_recovered,
            "mean_inner_iters": c.mean_inner_iters,
            "mean_wall_time_s": 0.0 if timing == "none" else c.mean_wall_time_s,
            "model": report.model, "seed": report.master_seed,
        })
    return rows


def _write_svg_chart(path: Path, csv_path: Path, value_col: str, title: str, ylabel: str) -> None:
    """Line chart of a sweep CSV column versus s, one polyline per method.

    Points carry the CSV cell verbatim in a data-value attribute; the
    chart is derived from the written file, never recomputed.
    """
    with open(csv_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    series: dict[str, list[tuple[str, str]]] = {}
    for row in rows:
        series.setdefault(row["method"], []).append((row["s"], row[value_col]))

    width, height, margin = 640, 400, 60
    xs = sorted({int(s) for pts in series.values() for s, _ in pts})
    vals = [float(v) for pts in series.values() for _, v in pts if v != "nan"]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = 0.0, max(vals + [1e-12])
    if value_col == "recovery_prob":
        y_hi = 1.0

    def px(s):
        span = max(x_hi - x_lo, 1)
        return margin + (width - 2 * margin) * (int(s) - x_lo) / span

    def py(v):
        return height - margin - (height - 2 * margin) * (float(v) - y_lo) / (y_hi - y_lo)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width/2:.1f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<line x1="{margin}" y1="{height-margin}" x2="{width-margin}" y2="{height-margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height-margin}" stroke="black"/>',
        f'<text x="{width/2:.1f}" y="{height-16}" text-anchor="middle" font-size="12">s</text>',
        f'<text x="18" y="{height/2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {height/2:.1f})">{ylabel}</text>',
    ]
    for si in xs:
        parts.append(
            f'<text x="{px(si):.1f}" y="{height-margin+16}" text-anchor="middle" font-size="10">{si}</text>'
        )
    for idx, (method, pts) in enumerate(sorted(series.items())):
        color = palette[idx % len(palette)]
        drawable = [(s, v) for s, v in pts if v != "nan"]
        coords = " ".join(f"{px(s):.2f},{py(v):.2f}" for s, v in drawable)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        for s, v in drawable:
            parts.append(
                f'<circle cx="{px(s):.2f}" cy="{py(v):.2f}" r="3" fill="{color}" '
                f'data-method="{method}" data-s="{s}" data-value="{v}"/>'
            )
        parts.append(
            f'<text x="{width-margin+6}" y="{margin + 16*idx}" font-size="11" fill="{color}">{method}</text>'
        )
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8", newline="\n")


def _load_instance(cfg: RunConfig) -> PlantedInstance:
    if cfg.operator:
        data = np.load(cfg.operator)
        for key in ("sensing", "rhs", "truth"):
            if key not in data:
                raise ValueError(f"operator file {cfg.operator} is missing array {key!r}")
        truth = data["truth"]
        op = MeasurementOperator(data["sensing"], data["rhs"])
        spec = InstanceSpec(
            m=op.m, n=op.n, r=int(np.linalg.matrix_rank(truth)), s=op.s, seed=cfg.seed
        )
        return PlantedInstance(M=truth, op=op, spec=spec)
    return plant(InstanceSpec(m=cfg.m, n=cfg.n, r=cfg.r, s=cfg.s, seed=cfg.seed))


def cmd_recover(cfg: RunConfig) -> int:
    inst = _load_instance(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = inst.spec
    trial_cfg = cfg.trial_config()
    k = cfg.k if cfg.k > 0 else spec.r
    rows = []
    any_recovered = False
    for method in cfg.method_list():
        rec = run_trial(inst, method, trial_cfg)
        any_recovered = any_recovered or rec.recovered
        rows.append({
            "method": method, "m": spec.m, "n": spec.n, "r": spec.r, "k": k,
            "s": spec.s, "d_r": spec.d_r, "seed": spec.seed,
            "recovered": rec.recovered, "relative_error": rec.relative_error,
            "outer_iterations": rec.outer_iterations,
            "inner_iterations_total": rec.inner_iterations_total,
            "wall_time_s": 0.0 if cfg.timing == "none" else rec.wall_time,
            "termination": rec.termination, "model": cfg.model,
        })
        print(
            f"{method:12s} recovered={str(rec.recovered):5s} rel_err={rec.relative_error:.3e} "
            f"outer={rec.outer_iterations:3d} inner={rec.inner_iterations_total:6d} "
            f"time={rec.wall_time:.2f}s [{rec.termination}]"
        )
    _write_csv(out / "recover.csv", TRIAL_COLUMNS, rows)
    print(f"wrote {out / 'recover.csv'}")
    return 0 if any_recovered else 2


def cmd_sweep(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report = run_sweep(
        cfg.m, cfg.n, cfg.s_list(), trials=cfg.K, methods=tuple(cfg.method_list()),
        cfg=cfg.trial_config(), master_seed=cfg.seed, workers=cfg.workers, r=cfg.r,
    )
    csv_path = out / "sweep.csv"
    _write_csv(csv_path, SWEEP_COLUMNS, _sweep_rows(report, cfg.timing))
    _write_svg_chart(out / "sweep_recovery.svg", csv_path, "recovery_prob",
                     "Recovery probability vs measurement count", "recovery probability")
    _write_svg_chart(out / "sweep_time.svg", csv_path, "mean_wall_time_s",
                     "Mean wall time vs measurement count", "mean wall time [s]")
    for c in report.cells:
        print(
            f"{c.method:12s} s={c.s:4d}: prob={c.recovery_prob:.2f} "
            f"mean_err={c.mean_rel_err:.2e} outer_all={c.mean_outer_iters_all:6.1f} "
            f"outer_rec={c.mean_outer_iters_recovered:6.1f} time={c.mean_wall_time_s:.2f}s"
        )
    print(f"wrote {csv_path}, sweep_recovery.svg, sweep_time.svg")
    return 0


def cmd_certify(cfg: RunConfig) -> int:
    results = run_suites(cfg.samples_scale, cfg.inject_fault or None)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name:22s} worst={r.worst:.3e}  {r.detail}")
    return 3 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kyfan2k", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("recover", "sweep", "certify"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="key = value config file")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed (64-bit)")
        p.add_argument("--workers", type=int, default=None, help="parallel workers for sweeps")
        p.add_argument("--model", type=str, default=None, choices=["ratio", "difference"])
        p.add_argument("--methods", type=str, default=None, help="comma-separated method list")
        p.add_argument("--k", type=int, default=None, help="norm parameter (default: planted rank)")
        p.add_argument("--eps", type=float, default=None, help="recovery threshold on relative error")
        p.add_argument("--max-outer", type=int, default=None, help="outer iteration cap")
        p.add_argument("--dump-config", action="store_true", help="print effective config and exit")
        if name == "sweep":
            p.add_argument("--s-values", type=str, default=None, help="comma-separated measurement counts")
            p.add_argument("--trials", type=int, default=None, help="instances per grid cell (K)")
            p.add_argument("--timing", type=str, default=None, choices=["wall", "none"])
        if name == "certify":
            p.add_argument("--samples-scale", type=float, default=None,
                           help="scale factor for suite sample counts")
            p.add_argument("--inject-fault", type=str, default=None, choices=["prox-sign"],
                           help="deliberately break the prox to exercise the failure path")
    return parser


_FLAG_TO_KEY = {
    "out": "out", "seed": "seed", "workers": "workers", "model": "model",
    "methods": "methods", "k": "k", "eps": "eps", "max_outer": "max_outer",
    "s_values": "s_values", "trials": "K", "timing": "timing",
    "samples_scale": "samples_scale", "inject_fault": "inject_fault",
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        for flag, key in _FLAG_TO_KEY.items():
            value = getattr(args, flag, None)
            if value is not None:
                setattr(cfg, key, value)
        if args.dump_config:
            sys.stdout.write(dump_config(cfg))
            return 0
        if args.command == "recover":
            return cmd_recover(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_certify(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
