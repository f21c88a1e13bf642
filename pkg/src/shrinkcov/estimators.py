"""Finite-sample regularized robust scatter estimators and their losses.

Two Tyler-type shrinkage fixed points are solved by plain Picard
iteration from the identity:

* ``abramovich_pascal``:  M = (1-rho)/n * sum_i x_i x_i^T / ((1/N) x_i^T M^{-1} x_i) + rho I
* ``chen``:               M = B / ((1/N) tr B)  with  B the same data term + rho I

Convergence is certified by the relative Frobenius residual of the
defining equation itself, so a returned estimate carries a directly
checkable certificate.  Each iteration performs one Cholesky
factorization of the current iterate, reused across all n quadratic
forms.

Both estimators ignore positive rescalings of individual samples, which
is exercised by the test suite rather than assumed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .measure import PopulationModel
from .sampling import SampleSet

__all__ = [
    "SolverConfig",
    "CovEstimate",
    "EstimatorConvergenceError",
    "abramovich_pascal",
    "chen",
    "chen_with_trace_map",
    "linear_combine",
    "clairvoyant",
    "loss_hat",
    "loss_check",
    "minimize_loss",
]


class EstimatorConvergenceError(RuntimeError):
    """Fixed point failed to reach the residual tolerance within max_iter."""

    def __init__(self, kind: str, iterations: int, residual: float):
        super().__init__(f"{kind} fixed point: residual {residual:.3e} after {iterations} iterations")
        self.kind = kind
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 500

    def __post_init__(self):
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


_DEFAULT_CFG = SolverConfig()


@dataclass(frozen=True)
class CovEstimate:
    """Symmetric positive-definite estimate with solver diagnostics."""

    matrix: np.ndarray
    rho: float
    iterations: int
    residual: float
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))
        self.matrix.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def diagnostics(self) -> dict:
        return {
            "kind": self.kind,
            "rho": self.rho,
            "iterations": self.iterations,
            "residual": self.residual,
        }

    def save(self, path: str | Path) -> None:
        """Matrix as CSV plus JSON diagnostics next to it."""
        path = Path(path)
        np.savetxt(path, self.matrix, delimiter=",")
        path.with_suffix(".json").write_text(json.dumps(self.diagnostics(), indent=2))


def _hat_lower(N: int, n: int) -> float:
    return max(0.0, 1.0 - n / N)


def _data_term(X: np.ndarray, M: np.ndarray) -> tuple[np.ndarray, float]:
    """(1/n) sum_i x_i x_i^T / ((1/N) x_i^T M^{-1} x_i) and the trace share it adds."""
    N, n = X.shape
    factor = cho_factor(M, lower=True, check_finite=False)
    W = cho_solve(factor, X, check_finite=False)
    q = np.einsum("ij,ij->j", X, W) / N
    if q.min() <= 0:
        raise np.linalg.LinAlgError("nonpositive quadratic form; iterate left the PD cone")
    S = (X * (1.0 / (n * q))) @ X.T
    return S, q.min()


def abramovich_pascal(
    s: SampleSet,
    rho: float,
    cfg: SolverConfig = _DEFAULT_CFG,
    init: np.ndarray | None = None,
) -> CovEstimate:
    """Solve the Abramovich--Pascal shrinkage fixed point for rho in (max(0, 1-n/N), 1]."""
    N, n = s.dim, s.count
    lo = _hat_lower(N, n)
    if not lo < rho <= 1.0:
        raise ValueError(f"rho must lie in ({lo}, 1] for N={N}, n={n}; got {rho}")
    X = s.data
    eye = np.eye(N)
    M = eye if init is None else np.array(init, dtype=float)
    for it in range(1, cfg.max_iter + 1):
        S, _ = _data_term(X, M)
        R = (1.0 - rho) * S
        R.flat[:: N + 1] += rho
        res = np.linalg.norm(R - M) / np.linalg.norm(M)
        if res <= cfg.tol:
            return CovEstimate(M, rho, it, res, "abramovich_pascal")
        M = R
    raise EstimatorConvergenceError("abramovich_pascal", cfg.max_iter, res)


def _chen_core(X: np.ndarray, rho: float, cfg: SolverConfig,
               init: np.ndarray | None) -> tuple[np.ndarray, int, float, float]:
    """Chen Picard loop; returns (M, iterations, residual, tau) with
    tau = (1/N) tr B(M) the trace of the unnormalized fixed-point map at M."""
    N, n = X.shape
    if init is None:
        M = np.eye(N)
    else:  # renormalize so the returned iterate always carries unit average trace
        M = np.array(init, dtype=float)
        M *= N / np.trace(M)
    for it in range(1, cfg.max_iter + 1):
        S, _ = _data_term(X, M)
        B = (1.0 - rho) * S
        B.flat[:: N + 1] += rho
        tau = np.trace(B) / N
        R = B / tau
        res = np.linalg.norm(R - M) / np.linalg.norm(M)
        if res <= cfg.tol:
            return M, it, res, float(tau)
        M = R
    raise EstimatorConvergenceError("chen", cfg.max_iter, res)


def chen(
    s: SampleSet,
    rho: float,
    cfg: SolverConfig = _DEFAULT_CFG,
    init: np.ndarray | None = None,
) -> CovEstimate:
    """Solve the trace-normalized Chen fixed point for rho in (0, 1]."""
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    M, it, res, _ = _chen_core(s.data, rho, cfg, init)
    return CovEstimate(M, rho, it, res, "chen")


def chen_with_trace_map(
    s: SampleSet,
    rho: float,
    cfg: SolverConfig = _DEFAULT_CFG,
    init: np.ndarray | None = None,
) -> tuple[CovEstimate, float, float]:
    """Chen estimate plus the exact correspondence to the other branch.

    The trace-normalized Abramovich--Pascal estimate at parameter
    rho_ap = 1 - (1 - rho) / tau equals the Chen estimate at rho, where
    tau is the average trace of the unnormalized map (always above
    c_N * (1 - rho), so rho_ap is admissible).  Returns
    (estimate, tau, rho_ap).
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    M, it, res, tau = _chen_core(s.data, rho, cfg, init)
    rho_ap = 1.0 - (1.0 - rho) / tau
    return CovEstimate(M, rho, it, res, "chen"), tau, rho_ap


def linear_combine(z: SampleSet, rho: float) -> CovEstimate:
    """Plain linear shrinkage (1-rho) * (1/n) Z Z^T + rho I, no iteration."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    X = z.data
    M = (1.0 - rho) * (X @ X.T) / z.count
    M.flat[:: z.dim + 1] += rho
    return CovEstimate(M, rho, 0, 0.0, "linear")


def clairvoyant(s: SampleSet, model: PopulationModel, rho: float) -> CovEstimate:
    """Infeasible baseline weighting samples with the true covariance inverse."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    W = clairvoyant_scatter(s, model)
    M = (1.0 - rho) * W
    M.flat[:: s.dim + 1] += rho
    return CovEstimate(M, rho, 0, 0.0, "clairvoyant")


def clairvoyant_scatter(s: SampleSet, model: PopulationModel) -> np.ndarray:
    """(1/n) sum_i x_i x_i^T / ((1/N) x_i^T C^{-1} x_i); the rho-independent data term."""
    X = s.data
    N, n = X.shape
    q = np.einsum("ij,ij->j", X, model.inverse @ X) / N
    if q.min() <= 0:
        raise np.linalg.LinAlgError("singular population covariance")
    return (X * (1.0 / (n * q))) @ X.T


def _as_matrix(est: CovEstimate | np.ndarray) -> np.ndarray:
    return est.matrix if isinstance(est, CovEstimate) else np.asarray(est, dtype=float)


def loss_hat(est: CovEstimate | np.ndarray, model: PopulationModel) -> float:
    """(1/N) tr((M / ((1/N) tr M) - C)^2); scale-invariant in M."""
    M = _as_matrix(est)
    N = M.shape[0]
    Mn = M / (np.trace(M) / N)
    d = Mn - model.covariance
    return float(np.sum(d * d) / N)


def loss_check(est: CovEstimate | np.ndarray, model: PopulationModel) -> float:
    """(1/N) tr((M - C)^2), without internal normalization."""
    M = _as_matrix(est)
    d = M - model.covariance
    return float(np.sum(d * d) / M.shape[0])


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class _WarmSolver:
    """Estimator evaluations warm-started from the previous solution."""

    s: SampleSet
    model: PopulationModel
    kind: str
    cfg: SolverConfig
    last: np.ndarray | None = field(default=None)

    def loss(self, rho: float) -> float:
        if self.kind == "abramovich_pascal":
            est = abramovich_pascal(self.s, rho, self.cfg, init=self.last)
            self.last = est.matrix
            return loss_hat(est, self.model)
        if self.kind == "chen":
            est = chen(self.s, rho, self.cfg, init=self.last)
            self.last = est.matrix
            return loss_check(est, self.model)
        if self.kind == "clairvoyant":
            return loss_check(clairvoyant(self.s, self.model, rho), self.model)
        if self.kind == "linear":
            return loss_check(linear_combine(self.s, rho), self.model)
        raise ValueError(f"unknown estimator kind {self.kind!r}")


def minimize_loss(
    s: SampleSet,
    model: PopulationModel,
    kind: str,
    grid,
    cfg: SolverConfig = _DEFAULT_CFG,
    refine_tol: float = 1e-4,
) -> tuple[float, float]:
    """Grid minimizer of the kind's loss followed by golden-section refinement.

    Returns (rho, loss) at the refined oracle point.  The grid must lie in
    the admissible interval of the chosen kind; it is swept from 1 downward
    so each fixed point warm-starts from its neighbour.
    """
    grid = np.sort(np.asarray(grid, dtype=float))[::-1]
    if grid.size == 0:
        raise ValueError("empty rho grid")
    solver = _WarmSolver(s, model, kind, cfg)
    losses = np.array([solver.loss(r) for r in grid])
    k = int(np.argmin(losses))
    best_rho, best_loss = float(grid[k]), float(losses[k])
    if grid.size == 1:
        return best_rho, best_loss

    # bracket the grid minimizer (grid is descending here)
    hi = float(grid[k - 1]) if k > 0 else float(grid[0])
    lo = float(grid[k + 1]) if k < grid.size - 1 else float(grid[-1])
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = solver.loss(x1), solver.loss(x2)
    while b - a > refine_tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = solver.loss(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = solver.loss(x2)
    for r, l in ((x1, f1), (x2, f2)):
        if l < best_loss:
            best_rho, best_loss = float(r), float(l)
    return best_rho, best_loss
