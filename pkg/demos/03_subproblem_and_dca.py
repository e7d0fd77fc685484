"""One full recovery run, inspected step by step.

A planted rank-2 matrix is measured by s Gaussian sensing matrices with
s well below what nuclear-norm minimization needs. The difference-of-
convex loop repairs that: each outer iteration solves the convex
subproblem

    min ||X||*_{k,2} - alpha(X_s) <X_s, X>   s.t.  A(X) = b

by splitting between the dual-norm prox and the exact affine projection,
and the objective ||X||*_{k,2} - ||X||_F decreases monotonically to zero
exactly when the iterate reaches a feasible rank-k point.
"""

import numpy as np

from kyfan2k import (
    InstanceSpec,
    SubproblemSpec,
    alpha_value,
    criticality_gap,
    kkt_residual,
    plant,
    relative_error,
    run,
    solve,
)

inst = plant(InstanceSpec(m=16, n=12, r=2, s=75, seed=42))
print(f"planted 16x12 rank-2 matrix, s=75 measurements (d_r = {inst.spec.d_r})")

# --- the convex baseline fails here -----------------------------------------
nuclear = solve(SubproblemSpec(inst.op, np.zeros((16, 12)), 0.0, 1))
print(f"\nnuclear norm solution: rel err = {relative_error(nuclear.X_star, inst.M):.3f}  "
      f"(kkt {nuclear.kkt_primal:.1e}/{nuclear.kkt_dual:.1e}, {nuclear.iterations} inner iters)")

# its criticality gap for the k=2 model is strictly positive: DCA will move
rep = criticality_gap(nuclear.X_star, inst.op, 2, rule="difference")
print(f"criticality gap at the nuclear solution: {rep.gap:.4f} (> 0, not a critical point)")

# --- the DCA loop ------------------------------------------------------------
res = run(inst.op, 2, model="difference", init="nuclear")
print(f"\nDCA (difference model, nuclear init): {res.termination} "
      f"after {res.outer_iterations} solves, rel err = {relative_error(res.X_final, inst.M):.2e}")
print("objective trace (dual - frobenius):")
for i, val in enumerate(res.objective_trace):
    print(f"  iterate {i}: {val:.6e}   ratio = {res.ratio_trace[i]:.9f}")

# --- first-order certificates at the solution --------------------------------
alpha = alpha_value("difference", res.X_final, 2)
spec = SubproblemSpec(inst.op, res.X_final, alpha, 2)
sol = solve(spec)
primal, dual = kkt_residual(sol, spec)
print(f"\nre-solving at the final iterate returns it: step = "
      f"{np.linalg.norm(sol.X_star - res.X_final):.2e}, kkt = ({primal:.1e}, {dual:.1e})")
print("singular values of the recovered matrix:")
print(" ", np.round(np.linalg.svd(res.X_final, compute_uv=False), 6))
