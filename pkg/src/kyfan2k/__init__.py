"""Low-rank matrix recovery with Ky Fan 2-k norm models.

Library layout:

* :mod:`kyfan2k.core_linalg` — dense SVD and affine measurement operators
* :mod:`kyfan2k.norms` — Ky Fan 2-k norm, dual gauge with certificates,
  top-k ball projection, dual-norm prox
* :mod:`kyfan2k.subproblem` — splitting solver for the linearized convex
  subproblem with KKT residual certificates
* :mod:`kyfan2k.dca` — ratio/difference difference-of-convex outer loops
* :mod:`kyfan2k.recovery_lab` — planted instances, trials, sweeps
* :mod:`kyfan2k.cli` — recover / sweep / certify commands
"""

from .core_linalg import MeasurementOperator, OperatorDegenerateError, Svd, svd
from .dca import DcaConfig, DcaResult, alpha_value, criticality_gap, init_point, run
from .norms import (
    CertificateError,
    DualNormCertificate,
    dual_kyfan_2k,
    dual_subgradient,
    ksupport,
    kyfan_2k,
    project_topk_ball,
    prox_dual_norm,
    topk_l2,
)
from .recovery_lab import (
    InstanceSpec,
    PlantedInstance,
    SweepReport,
    TrialConfig,
    TrialRecord,
    plant,
    relative_error,
    run_sweep,
    run_trial,
    trial_seed,
)
from .subproblem import SolverConfig, SubproblemSolution, SubproblemSpec, kkt_residual, solve

__version__ = "0.1.0"

__all__ = [
    "CertificateError",
    "DcaConfig",
    "DcaResult",
    "DualNormCertificate",
    "InstanceSpec",
    "MeasurementOperator",
    "OperatorDegenerateError",
    "PlantedInstance",
    "SolverConfig",
    "SubproblemSolution",
    "SubproblemSpec",
    "SweepReport",
    "Svd",
    "TrialConfig",
    "TrialRecord",
    "alpha_value",
    "criticality_gap",
    "dual_kyfan_2k",
    "dual_subgradient",
    "init_point",
    "kkt_residual",
    "ksupport",
    "kyfan_2k",
    "plant",
    "project_topk_ball",
    "prox_dual_norm",
    "relative_error",
    "run",
    "run_sweep",
    "run_trial",
    "solve",
    "svd",
    "topk_l2",
    "trial_seed",
]
