"""Two supporting oracles: restricted isometries and noise correlations.

rip_constant_exact enumerates every support, so it only runs at toy
sizes, but there it is the ground truth the randomized machinery can be
checked against. weak_rip_empirical relaxes the quantifier to supports
containing a fixed T. The noise check bounds ||A* z||_inf for gaussian
z, the quantity that calibrates the penalty lambda.
"""

import numpy as np

from ripless import (
    EnsembleSpec,
    SupportSet,
    build_matrix,
    noise_correlation_bound,
    rip_constant_exact,
    weak_rip_empirical,
)

rng = np.random.default_rng(5)

# exact RIP constants by enumeration
A = build_matrix(EnsembleSpec("gaussian", 12), 40, rng=rng)
for s in (1, 2, 3):
    print(f"delta_{s} = {rip_constant_exact(A.rows, s):.4f}")

dup = np.eye(8)
dup[:, 4] = dup[:, 3]  # two identical columns break s = 2 completely
print(f"duplicated column: delta_2 = {rip_constant_exact(dup, 2):.1f}")

# weak RIP: only supports T union R matter, |R| = r
B = build_matrix(EnsembleSpec("subsampled_dft", 32), 120, rng=rng)
T = SupportSet((3, 17), 32)
res = weak_rip_empirical(B, T, r=2, delta=0.6)
print(f"\nweak isometry over {res.candidates_checked} exhaustive supports:"
      f" worst deviation {res.deviation:.3f}, satisfied at 0.6: {res.satisfied}")
print(f"  witness R = {res.witness}")

# noise correlations: threshold 2 sigma ||A||_(1,2) sqrt(log n)
C = build_matrix(EnsembleSpec("binary", 64), 200, rng=rng)
check = noise_correlation_bound(C, sigma=1.0)
rep = check.exceedance(4000, rng=rng)
print(f"\nnoise threshold {check.threshold:.3f}: exceeded {rep.empirical_rate:.4%}"
      f" of draws, bound 1/(2n) = {rep.theoretical_bound:.4%}, passed={rep.passed}")
