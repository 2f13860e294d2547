"""One sparse signal, three programs.

Noiseless measurements go to basis pursuit, noisy ones to the LASSO and
the Dantzig selector with the theory's penalty lambda = 10 sqrt(log n).
The printed error bounds are shape references with constant 1, so read
them against the observed errors as scaling statements, not envelopes.
"""

import math

import numpy as np

from ripless import (
    EnsembleSpec,
    ErrorBoundInputs,
    basis_pursuit,
    build_matrix,
    dantzig,
    default_lambda,
    l1_error_bound,
    l2_error_bound,
    lasso,
)

rng = np.random.default_rng(3)
n, s, m, sigma = 256, 5, 150, 0.25

x = np.zeros(n)
support = rng.choice(n, s, replace=False)
x[support] = rng.choice([-1.0, 1.0], s)

A = build_matrix(EnsembleSpec("gaussian", n), m, rng=rng)
sigma_m = sigma / math.sqrt(m)

# noiseless: exact recovery
y = A.rows @ x
bp = basis_pursuit(A.rows, y)
print(f"basis pursuit   rel l2 error {np.linalg.norm(bp.x_hat - x) / np.linalg.norm(x):.2e}"
      f"  ({bp.iterations} iterations, converged={bp.converged})")

# noisy: the two penalized programs on the same data
y_noisy = y + sigma_m * rng.standard_normal(m)
lam = default_lambda(n)
la = lasso(A.rows, y_noisy, lam * sigma_m)
dz = dantzig(A.rows, y_noisy, lam * sigma_m)
print(f"lasso           l2 error {np.linalg.norm(la.x_hat - x):.4f}"
      f"  ({la.iterations} iterations)")
print(f"dantzig         l2 error {np.linalg.norm(dz.x_hat - x):.4f}"
      f"  ({dz.iterations} iterations)")
print(f"program gap     |lasso - dantzig| = {np.linalg.norm(la.x_hat - dz.x_hat):.4f}")

inputs = ErrorBoundInputs(s=s, m=m, n=n, sigma=sigma, mu=6.0 * math.log(n), beta=1.0, x=x)
print(f"\nreference error bounds at lambda = {lam:.1f}")
for program in ("lasso", "dantzig"):
    print(f"  {program:8s} l2 <= {l2_error_bound(inputs, program):.3f}"
          f"   l1 <= {l1_error_bound(inputs, program):.3f}")
print(f"  observed  l2 = {np.linalg.norm(la.x_hat - x):.3f}"
      f"   l1 = {np.sum(np.abs(la.x_hat - x)):.3f}")

# more rows shrink the noisy error roughly like 1/sqrt(m)
print("\nerror against measurement count (lasso, same signal)")
for m_k in (150, 300, 600, 1200):
    A_k = build_matrix(EnsembleSpec("gaussian", n), m_k, rng=rng)
    sig_k = sigma / math.sqrt(m_k)
    y_k = A_k.rows @ x + sig_k * rng.standard_normal(m_k)
    out = lasso(A_k.rows, y_k, lam * sig_k)
    print(f"  m = {m_k:4d}   l2 error {np.linalg.norm(out.x_hat - x):.4f}")
