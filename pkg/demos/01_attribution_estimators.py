"""Compare the two attribution estimators against the exact oracle.

We build a small synthetic "detector" whose quality is a known linear
function of part presence, then recover the per-part scores with both
the constrained KernelSHAP regression and the Beta-sampled linear
surrogate, and check them against exhaustive Shapley enumeration.
"""

import numpy as np

from spx.attribution import (
    exact_shapley,
    make_beta_records,
    make_kernelshap_records,
    sample_beta,
    sample_coalitions,
    solve_beta,
    solve_kernelshap,
)
from spx.detector import linear_spec
from spx.quality import BBox

spec = linear_spec([0.30, 0.20, 0.15, 0.10, 0.05], bias=0.05,
                   gt_bbox=BBox(0, 0, 10, 10))
M = spec.n_parts

phi = exact_shapley(M, spec.value)
print("exact Shapley:", np.round(phi, 4))

Z = sample_coalitions(M, 2 ** M, seed=0)          # exact mode: all coalitions
q = np.array([spec.value(z) for z in Z])
ones = int(np.where(Z.sum(axis=1) == M)[0][0])
zeros = int(np.where(Z.sum(axis=1) == 0)[0][0])
ks = solve_kernelshap(make_kernelshap_records(Z, q),
                      f1=float(q[ones]), f0=float(q[zeros]))
print("kernelshap:   ", np.round(ks.scores, 4),
      " (max |err| %.2e)" % np.abs(ks.scores - phi).max())

P = sample_beta(M, 256, seed=0)                   # continuous presences
beta = solve_beta(make_beta_records(P, np.array([spec.value(p) for p in P])))
print("beta surrogate:", np.round(beta.scores, 4),
      " (max |err| %.2e)" % np.abs(beta.scores - phi).max())
