"""The top-k ball projection and the dual-norm proximal operator.

The prox of the dual Ky Fan 2-k norm is what a first-order solver calls
thousands of times, so it has to be exact and cheap. It reduces to the
Euclidean projection of the singular values onto the ball
{x : topk_l2(x, k) <= lam} via the Moreau identity:

    prox_{lam * dual}(V) = V - U diag(proj(sigma)) V^T.

The projection itself bisects a scalar multiplier; entries around
position k that must share a common value form an explicit tie block.
"""

import numpy as np

from kyfan2k import dual_kyfan_2k, kyfan_2k, project_topk_ball, prox_dual_norm, svd, topk_l2

rng = np.random.default_rng(1)

# --- projection special cases ----------------------------------------------
v = rng.normal(size=8) * 3
print("k = d      -> radial scaling:",
      np.allclose(project_topk_ball(v, 8, 2.0), v * 2.0 / np.linalg.norm(v)))
print("k = 1      -> clipping      :",
      np.allclose(project_topk_ball(v, 1, 1.0), np.clip(v, -1, 1), atol=1e-10))
print("inactive   -> identity      :",
      np.array_equal(project_topk_ball(v, 3, 99.0), v))

x = project_topk_ball(v, 3, 1.5)
print("general    -> boundary hit  :", topk_l2(x, 3), "(radius 1.5)")

# --- prox and its certificate ------------------------------------------------
V = rng.normal(size=(7, 5))
lam = 0.8
Z = prox_dual_norm(V, lam, 2)

fac = svd(V)
proj = project_topk_ball(fac.sigma, 2, lam)
print("\nMoreau identity residual:",
      np.linalg.norm(Z + (fac.U * proj) @ fac.V.T - V))

# u = (V - Z)/lam must be a dual-norm subgradient at Z: inside the primal
# unit ball, pairing with Z to the full dual value
u = (V - Z) / lam
print("||u||_{k,2} <= 1        :", kyfan_2k(u, 2))
print("<u, Z> vs dual value    :", float(np.vdot(u, Z)), dual_kyfan_2k(Z, 2).value)

# shrinkage kills small singular values first: the prox output drops rank
print("\nsigma(V) =", np.round(fac.sigma, 4))
print("sigma(Z) =", np.round(np.linalg.svd(Z, compute_uv=False), 4))
print("prox with lam >= ||V||_{k,2} collapses to zero:",
      not np.any(prox_dual_norm(V, kyfan_2k(V, 2) * 1.001, 2)))
