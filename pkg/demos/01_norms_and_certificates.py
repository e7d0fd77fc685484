"""Tour of the Ky Fan 2-k norm family and its self-certifying dual.

The Ky Fan 2-k norm ||X||_{k,2} is the l2 norm of the k largest singular
values. Its dual ||X||*_{k,2} interpolates between the nuclear norm (k=1)
and the Frobenius norm (k = min(m,n)), and the three norms

    ||X||_{k,2}  <=  ||X||_F  <=  ||X||*_{k,2}

coincide exactly when rank(X) <= k. That equality pattern is what makes
the dual norm a low-rank-promoting objective.
"""

import numpy as np

from kyfan2k import dual_kyfan_2k, ksupport, kyfan_2k, topk_l2

rng = np.random.default_rng(0)

# --- vector view -----------------------------------------------------------
# topk_l2 is the vector gauge behind the matrix norm; its dual is the
# k-support gauge, computed with a two-sided certificate.
v = np.array([3.0, 2.0, 1.0])
print("v =", v)
print("topk_l2(v, 2)  =", topk_l2(v, 2), " (sqrt(3^2 + 2^2))")

cert = ksupport(v, 2)
print("dual gauge     =", cert.value, " (= 3*sqrt(2))")
print("witness        =", cert.witness, " pairing:", cert.witness_pairing)
print("decomposition  =", [p.tolist() for p in cert.parts])
print("sum of part l2 =", cert.parts_norm_sum)
print("certificate gaps (lower, upper):", cert.lower_gap(), cert.upper_gap())
# the witness is feasible for the primal gauge and the k-sparse parts sum
# back to v, so value is pinched between two checkable bounds

# --- matrix view -----------------------------------------------------------
X = rng.normal(size=(6, 5))
print("\nrandom 6x5 matrix:")
fro = np.linalg.norm(X)
for k in range(1, 6):
    lo = kyfan_2k(X, k)
    hi = dual_kyfan_2k(X, k).value
    print(f"  k={k}:  ||X||_k2 = {lo:8.4f}   ||X||_F = {fro:8.4f}   dual = {hi:8.4f}")

# equality exactly at rank <= k
L = rng.normal(size=(6, 2)) @ rng.normal(size=(2, 5))
print("\nrank-2 matrix, k=2:")
print("  kyfan :", kyfan_2k(L, 2))
print("  frob  :", np.linalg.norm(L))
print("  dual  :", dual_kyfan_2k(L, 2).value)
