"""Recovery programs: basis pursuit, LASSO, Dantzig selector.

All three are first-order methods with no external solver behind them:
basis pursuit runs ADMM with an exact projection onto the affine feasible set,
LASSO runs FISTA with gradient-based adaptive restart, and the Dantzig
selector runs two-block ADMM against its box-constrained reformulation.
Every returned solution carries a computable optimality certificate: a
scaled dual point for the two constrained programs and the subgradient
residual for LASSO. Solvers accept only real systems; complex ensembles
go through realify() first.

The module also evaluates the theoretical error-bound shapes for the
noisy programs and the tube diagnostic used when the true signal is
known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .core import MeasurementMatrix, MeasurementVector, as_signal, best_s_approx, operator_norm

__all__ = [
    "RecoveryProblem",
    "SolverResult",
    "default_lambda",
    "basis_pursuit",
    "lasso",
    "dantzig",
    "solve_problem",
    "ErrorBoundInputs",
    "alpha_factor",
    "l2_error_bound",
    "l1_error_bound",
    "tube_diagnostic",
]

ABS_TOL = 1e-9
REL_TOL = 1e-7
MAX_ITER = 100_000


def default_lambda(n: int) -> float:
    """Regularization level 10 sqrt(log n) used throughout the noisy theory."""
    if n < 2:
        raise ValueError("need n >= 2")
    return 10.0 * math.sqrt(math.log(n))


def _real_matrix(A) -> np.ndarray:
    M = A.rows if isinstance(A, MeasurementMatrix) else np.asarray(A)
    if np.iscomplexobj(M):
        raise ValueError("solvers take real systems; pass complex ensembles through realify()")
    if M.ndim != 2:
        raise ValueError("A must be 2-d")
    return np.asarray(M, dtype=float)


def _real_vector(y, m: int) -> np.ndarray:
    v = y.values if isinstance(y, MeasurementVector) else np.asarray(y, dtype=float)
    if np.iscomplexobj(v):
        raise ValueError("y must be real alongside a real A; realify() both together")
    v = np.asarray(v, dtype=float)
    if v.shape != (m,):
        raise ValueError(f"y must have length {m}")
    return v


@dataclass(frozen=True)
class RecoveryProblem:
    """A real recovery instance: matrix, measurements, noise and level.

    lam defaults to 10 sqrt(log n). sigma_m defaults to the
    MeasurementVector's own noise scale (0 for a bare array). The
    product lam * sigma_m is what the noisy programs actually consume.
    """

    A: MeasurementMatrix
    y: MeasurementVector
    sigma_m: float | None = None
    lam: float | None = None

    def __post_init__(self):
        A = self.A if isinstance(self.A, MeasurementMatrix) else MeasurementMatrix(np.asarray(self.A))
        y = self.y if isinstance(self.y, MeasurementVector) else MeasurementVector(np.asarray(self.y))
        if A.field != "real" or np.iscomplexobj(y.values):
            raise ValueError("RecoveryProblem is real-only; realify complex systems first")
        if y.m != A.m:
            raise ValueError("A and y disagree on the number of measurements")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        sig = y.sigma_m if self.sigma_m is None else float(self.sigma_m)
        if sig < 0:
            raise ValueError("sigma_m must be nonnegative")
        object.__setattr__(self, "sigma_m", sig)
        lam = default_lambda(A.n) if self.lam is None else float(self.lam)
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        object.__setattr__(self, "lam", lam)

    @property
    def lam_sigma(self) -> float:
        return self.lam * self.sigma_m


@dataclass(frozen=True)
class SolverResult:
    """Solution plus the evidence it is one.

    kkt_residual is program-specific: the larger of relative dual gap and
    relative feasibility violation for basis pursuit and Dantzig, the
    subgradient-condition violation for LASSO. converged means it came in
    under the stopping tolerance. tube_value is ||A*(A x_hat - y)||_inf,
    the quantity the noisy programs constrain or drive to lam * sigma_m.
    objective_history holds the objective at restart checkpoints when the
    caller asked for tracking (empty otherwise).
    """

    x_hat: np.ndarray
    iterations: int
    kkt_residual: float
    tube_value: float
    objective: float
    converged: bool
    objective_history: tuple = field(default=())

    def __post_init__(self):
        x = np.asarray(self.x_hat, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "x_hat", x)


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _tube(A, x, y):
    return float(np.max(np.abs(A.T @ (A @ x - y)))) if A.shape[1] else 0.0


def basis_pursuit(A, y, tol_abs: float = ABS_TOL, tol_rel: float = REL_TOL,
                  max_iter: int = MAX_ITER, rho: float = 1.0) -> SolverResult:
    """Minimize ||x||_1 subject to A x = y.

    ADMM with the x-update an exact projection onto {A x = y}, so every
    iterate is feasible to working precision and the feasibility part of
    the contract holds by construction. Convergence is certified by a
    dual point: nu solving A^T nu = rho u in least squares, rescaled into
    the dual ball, gives the gap ||x||_1 - y . nu.

    y must lie in the range of A; anything else raises.
    """
    A = _real_matrix(A)
    m, n = A.shape
    y = _real_vector(y, m)

    # thin SVD once; the pseudoinverse drives both the projection and the
    # in-range check. The default divide-and-conquer driver reports
    # nonconvergence on some perfectly conditioned inputs (seen on
    # realified partial-DFT stacks); QR iteration is slower but immune.
    try:
        U, svals, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError:
        U, svals, Vt = linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
    keep = svals > (svals[0] if svals.size else 0.0) * max(m, n) * np.finfo(float).eps
    U, svals, Vt = U[:, keep], svals[keep], Vt[keep]

    def pinv_apply(r):
        return Vt.T @ ((U.T @ r) / svals) if svals.size else np.zeros(n)

    x_ls = pinv_apply(y)
    infeas = float(np.linalg.norm(A @ x_ls - y))
    if infeas > tol_abs * 10 + tol_rel * (1.0 + float(np.linalg.norm(y))):
        raise ValueError(f"y is not in the range of A (distance {infeas:.3g})")

    def project(w):
        return w - pinv_apply(A @ w - y)

    def certify(x, g):
        # dual candidate: nu with A^T nu = g in least squares, pulled into
        # the unit ball; the gap against y . nu bounds the suboptimality
        obj = float(np.sum(np.abs(x)))
        nu = np.linalg.lstsq(A.T, g, rcond=None)[0]
        corr = float(np.max(np.abs(A.T @ nu))) if n else 0.0
        if corr > 1.0:
            nu = nu / corr
        rel_gap = abs(obj - float(y @ nu)) / max(obj, 1e-15)
        feas = float(np.linalg.norm(A @ x - y)) / (1.0 + float(np.linalg.norm(y)))
        return max(rel_gap, feas), obj

    x = x_ls
    z = x.copy()
    u = np.zeros(n)
    scale = max(1.0, float(np.linalg.norm(y)))
    eps = tol_abs * math.sqrt(n) + tol_rel * scale
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        x = project(z - u)
        z_prev = z
        z = _soft(x + u, 1.0 / rho)
        u = u + x - z
        r_primal = float(np.linalg.norm(x - z))
        r_dual = float(rho * np.linalg.norm(z - z_prev))
        if r_primal <= eps and r_dual <= eps:
            kkt, _ = certify(x, rho * u)
            if kkt <= tol_rel:
                converged = True
                break
            # certificate not yet tight: demand smaller residuals
            eps = max(eps * 0.2, 1e-14)
        # residual balancing keeps the two residuals comparable
        if it % 100 == 0:
            if r_primal > 10.0 * r_dual:
                rho *= 2.0
                u /= 2.0
            elif r_dual > 10.0 * r_primal:
                rho /= 2.0
                u *= 2.0

    kkt, obj = certify(x, rho * u)
    return SolverResult(x, it, kkt, _tube(A, x, y), obj, converged)


def lasso(A, y, lam_sigma: float, tol_abs: float = ABS_TOL, tol_rel: float = REL_TOL,
          max_iter: int = MAX_ITER, track_objective: bool = False) -> SolverResult:
    """Minimize (1/2)||A x - y||_2^2 + lam_sigma ||x||_1.

    FISTA with step 1/L, L = ||A||^2, and gradient-based adaptive
    restart. The subgradient conditions are the stopping rule: off the
    support |[A^T(y - A x)]_i| <= lam_sigma, on the support the
    correlation equals lam_sigma sign(x_i).
    """
    A = _real_matrix(A)
    m, n = A.shape
    y = _real_vector(y, m)
    gamma = float(lam_sigma)
    if gamma < 0:
        raise ValueError("lam_sigma must be nonnegative")

    Aty = A.T @ y
    L = operator_norm(A) ** 2
    if L == 0.0:
        return SolverResult(np.zeros(n), 0, 0.0, 0.0, 0.5 * float(y @ y), True)
    step = 1.0 / L

    def objective(v):
        r = A @ v - y
        return 0.5 * float(r @ r) + gamma * float(np.sum(np.abs(v)))

    def kkt_violation(v):
        g = Aty - A.T @ (A @ v)
        on = v != 0.0
        off_excess = float(max(0.0, np.max(np.abs(g[~on])) - gamma)) if np.any(~on) else 0.0
        on_mismatch = float(np.max(np.abs(g[on] - gamma * np.sign(v[on])))) if np.any(on) else 0.0
        return max(off_excess, on_mismatch)

    tol_kkt = tol_abs + tol_rel * max(gamma, float(np.max(np.abs(Aty))), 1.0)
    x = np.zeros(n)
    w = x.copy()
    t = 1.0
    history = [objective(x)] if track_objective else []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = A.T @ (A @ w) - Aty
        x_next = _soft(w - step * grad, step * gamma)
        # restart when the momentum direction opposes the gradient mapping
        if float((w - x_next) @ (x_next - x)) > 0.0:
            t = 1.0
            w = x.copy()
            if track_objective:
                history.append(objective(x))
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        w = x_next + ((t - 1.0) / t_next) * (x_next - x)
        x, t = x_next, t_next
        if it % 10 == 0 and kkt_violation(x) <= tol_kkt:
            converged = True
            break

    kkt = kkt_violation(x)
    converged = converged or kkt <= tol_kkt
    if track_objective:
        history.append(objective(x))
    return SolverResult(x, it, kkt, _tube(A, x, y), objective(x), converged,
                        tuple(history))


def dantzig(A, y, lam_sigma: float, tol_abs: float = ABS_TOL, tol_rel: float = REL_TOL,
            max_iter: int = MAX_ITER, rho: float = 1.0) -> SolverResult:
    """Minimize ||x||_1 subject to ||A^T(A x - y)||_inf <= lam_sigma.

    Two-block ADMM on the splitting z1 = x (l1 term) and z2 = M x with
    M = A^T A (box constraint around c = A^T y). The x-update solves a
    fixed Cholesky system of I + M^2. The feasible set is never empty:
    the least-squares solution x_ls zeroes the constraint exactly, and a
    final blend toward x_ls enforces feasibility at the stated absolute
    tolerance. A scaled dual point kappa certifies optimality through
    the gap ||x||_1 + c . kappa + lam_sigma ||kappa||_1.
    """
    A = _real_matrix(A)
    m, n = A.shape
    y = _real_vector(y, m)
    gamma = float(lam_sigma)
    if gamma < 0:
        raise ValueError("lam_sigma must be nonnegative")

    M = A.T @ A
    c = A.T @ y
    x_ls = np.linalg.lstsq(A, y, rcond=None)[0]  # A^T(A x_ls - y) = 0 exactly

    if gamma == 0.0 or n == 0:
        # the polytope collapses onto the normal equations
        obj = float(np.sum(np.abs(x_ls)))
        return SolverResult(x_ls, 0, 0.0, _tube(A, x_ls, y), obj, True)

    lo, hi = c - gamma, c + gamma
    chol = np.linalg.cholesky(np.eye(n) + M @ M)

    def x_solve(rhs):
        return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))

    def polish(x):
        # blend toward x_ls until the constraint holds strictly; the
        # constraint value shrinks linearly in the blend and the l1 cost
        # moves by O(violation), negligible at convergence
        viol = float(np.max(np.abs(M @ x - c)))
        if viol <= gamma:
            return x
        theta = 1.0 - (gamma / viol) * (1.0 - 1e-12)
        return (1.0 - theta) * x + theta * x_ls

    def certify(x, kappa):
        obj = float(np.sum(np.abs(x)))
        best_gap = math.inf
        for cand in (kappa, -kappa):
            corr = float(np.max(np.abs(M @ cand)))
            if corr > 1.0:
                cand = cand / corr
            gap = obj + float(c @ cand) + gamma * float(np.sum(np.abs(cand)))
            best_gap = min(best_gap, abs(gap))
        rel_gap = best_gap / max(obj, 1e-15)
        feas = max(0.0, float(np.max(np.abs(M @ x - c))) - gamma) / max(gamma, 1.0)
        return max(rel_gap, feas), obj

    x = x_ls.copy()
    z1, z2 = x.copy(), M @ x
    u1, u2 = np.zeros(n), np.zeros(n)
    eps = tol_abs * math.sqrt(2 * n) + tol_rel * max(1.0, float(np.linalg.norm(c)))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        x = x_solve((z1 - u1) + M @ (z2 - u2))
        Mx = M @ x
        z1_prev, z2_prev = z1, z2
        z1 = _soft(x + u1, 1.0 / rho)
        z2 = np.clip(Mx + u2, lo, hi)
        u1 = u1 + x - z1
        u2 = u2 + Mx - z2
        r_primal = math.hypot(float(np.linalg.norm(x - z1)), float(np.linalg.norm(Mx - z2)))
        r_dual = rho * math.hypot(float(np.linalg.norm(z1 - z1_prev)),
                                  float(np.linalg.norm(M @ (z2 - z2_prev))))
        if r_primal <= eps and r_dual <= eps:
            kkt, _ = certify(polish(x), rho * u2)
            if kkt <= tol_rel:
                converged = True
                break
            eps = max(eps * 0.2, 1e-14)
        if it % 100 == 0:
            if r_primal > 10.0 * r_dual:
                rho *= 2.0
                u1 /= 2.0
                u2 /= 2.0
            elif r_dual > 10.0 * r_primal:
                rho /= 2.0
                u1 *= 2.0
                u2 *= 2.0

    x = polish(x)
    kkt, obj = certify(x, rho * u2)
    return SolverResult(x, it, kkt, _tube(A, x, y), obj, converged)


_PROGRAMS = ("bp", "lasso", "dantzig")


def solve_problem(problem: RecoveryProblem, program: str, **kwargs) -> SolverResult:
    """Dispatch a RecoveryProblem to one of the three programs."""
    if program not in _PROGRAMS:
        raise ValueError(f"program must be one of {_PROGRAMS}")
    if program == "bp":
        return basis_pursuit(problem.A, problem.y, **kwargs)
    if program == "lasso":
        return lasso(problem.A, problem.y, problem.lam_sigma, **kwargs)
    return dantzig(problem.A, problem.y, problem.lam_sigma, **kwargs)


@dataclass(frozen=True)
class ErrorBoundInputs:
    """Everything the theoretical error shapes consume.

    s is the sparsity cap: the bounds minimize over 1 <= k <= s, and the
    caller owns the responsibility that m supports sparsity s (the
    admissibility constant tying m to mu s log n is unnamed in the
    theory, so it is not inverted here). beta is the confidence
    parameter; mu is recorded for provenance and admissibility checks.
    """

    s: int
    m: int
    n: int
    sigma: float
    mu: float
    beta: float
    x: np.ndarray

    def __post_init__(self):
        x = as_signal(self.x)
        object.__setattr__(self, "x", x)
        if not (1 <= self.s <= self.n):
            raise ValueError("need 1 <= s <= n")
        if self.n != x.size:
            raise ValueError("x must have length n")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not (self.mu >= 1.0):
            raise ValueError("mu is always >= 1")
        if not (self.beta > 0):
            raise ValueError("beta must be positive")


def alpha_factor(s: int, m: int, n: int, beta: float) -> float:
    """sqrt((1 + beta) s log^5 n / m); stays below log^2 n whenever
    m >= (1 + beta) s log n."""
    return math.sqrt((1.0 + beta) * s * math.log(n) ** 5 / m)


def _bound(inputs: ErrorBoundInputs, program: str, C: float, flavor: str) -> float:
    if program not in ("lasso", "dantzig"):
        raise ValueError("program must be 'lasso' or 'dantzig'")
    logn = math.log(inputs.n)
    best = math.inf
    for k in range(1, inputs.s + 1):
        miss = float(np.sum(np.abs(inputs.x - best_s_approx(inputs.x, k))))
        a = alpha_factor(k, inputs.m, inputs.n, inputs.beta)
        amp = 1.0 + (a * a if program == "dantzig" else a)
        if flavor == "l2":
            val = C * amp * (miss / math.sqrt(k) + inputs.sigma * math.sqrt(k * logn / inputs.m))
        else:
            val = C * amp * (miss + k * inputs.sigma * math.sqrt(logn / inputs.m))
        best = min(best, val)
    return best


def l2_error_bound(inputs: ErrorBoundInputs, program: str, C: float = 1.0) -> float:
    """min over k <= s of C (1 + alpha) [||x - x_k||_1 / sqrt k + sigma sqrt(k log n / m)].

    Dantzig swaps (1 + alpha) for (1 + alpha^2). C defaults to 1: these
    are shape references, not certified envelopes.
    """
    return _bound(inputs, program, C, "l2")


def l1_error_bound(inputs: ErrorBoundInputs, program: str, C: float = 1.0) -> float:
    """min over k <= s of C (1 + alpha) [||x - x_k||_1 + k sigma sqrt(log n / m)]."""
    return _bound(inputs, program, C, "l1")


def tube_diagnostic(A, x_hat, x_true, lam_sigma: float):
    """||A^T A (x_hat - x)||_inf against its 5/4 lam sigma ceiling.

    Returns (value, ok). Needs the true signal, so this is a diagnostic
    for planted experiments, not something a solver could check alone.
    """
    A = _real_matrix(A)
    h = np.asarray(x_hat, dtype=float) - np.asarray(x_true, dtype=float)
    value = float(np.max(np.abs(A.T @ (A @ h)))) if A.shape[1] else 0.0
    return value, value <= 1.25 * lam_sigma
