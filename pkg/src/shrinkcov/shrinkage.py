"""Data-driven shrinkage parameter selection.

Both selections equate a branch-specific left-hand side built from the
fitted robust estimator with a common plug-in right-hand side
c_N / ((1/N) tr[((1/n) sum_i x_i x_i^T / (||x_i||^2 / N))^2] - 1).  Every
ingredient uses samples only through x / ||x||, so the selected rho is
insensitive to per-sample radial scales.

The equation may have several roots or none (it is a finite-sample
surrogate).  A coarse 32-point scan with a relaxed inner fixed-point
tolerance locates sign changes; the one nearest rho = 1 is refined by
bracketed bisection at the tight tolerance.  With no sign change the
admissible endpoint minimizing the equation residual is returned, flagged
as unbracketed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import brentq

from .estimators import SolverConfig, abramovich_pascal, chen
from .sampling import SampleSet

__all__ = ["ShrinkageSelection", "DegenerateTraceError", "plug_in_rhs",
           "select_rho_hat", "select_rho_check"]

_SCAN_POINTS = 32
_EDGE_OFFSET = 1e-6
_SEARCH_TOL = 1e-8  # relaxed inner fixed-point tolerance during the coarse scan


class DegenerateTraceError(ValueError):
    """Plug-in denominator <= 0: near-identity population or too few samples."""


@dataclass(frozen=True)
class ShrinkageSelection:
    rho: float
    rhs: float
    lhs_residual: float
    solver_iterations: int
    bracketed: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def plug_in_rhs(s: SampleSet) -> float:
    """c_N / ((1/N) tr[((1/n) sum_i x_i x_i^T / (||x_i||^2/N))^2] - 1)."""
    N, n = s.dim, s.count
    if n < 2:
        raise ValueError("need at least two samples")
    X = s.data
    U = X * (np.sqrt(N) / np.linalg.norm(X, axis=0))
    Z = (U @ U.T) / n
    denom = float(np.sum(Z * Z)) / N - 1.0
    if denom <= 0:
        raise DegenerateTraceError(f"plug-in denominator {denom:.3e} is not positive")
    return (N / n) / denom


def _clamped(rhs: float) -> ShrinkageSelection:
    return ShrinkageSelection(rho=1.0, rhs=rhs, lhs_residual=float("inf"),
                              solver_iterations=0, bracketed=False)


def _select(rhs: float, lo: float, lhs) -> tuple[float, bool, int]:
    """Scan + bisection driver; returns (rho, bracketed, evaluations).

    The scan walks down from rho = 1 and stops at the first sign change,
    which by construction is the one nearest 1.
    """
    evals = 0

    def g(rho: float, tight: bool = False) -> float:
        nonlocal evals
        evals += 1
        return lhs(rho, tight) - rhs

    grid = np.linspace(1.0, lo, _SCAN_POINTS)  # descending: warm starts flow from rho=1
    vals = [g(grid[0])]
    for k in range(1, len(grid)):
        if vals[-1] == 0.0:
            return float(grid[k - 1]), True, evals
        vals.append(g(grid[k]))
        if vals[-2] * vals[-1] < 0:
            root = brentq(lambda r: g(r, tight=True), grid[k], grid[k - 1], xtol=1e-12)
            return float(root), True, evals
    if vals[-1] == 0.0:
        return float(grid[-1]), True, evals
    k = 0 if abs(vals[0]) <= abs(vals[-1]) else len(grid) - 1
    return float(grid[k]), False, evals


def select_rho_hat(s: SampleSet, cfg: SolverConfig = SolverConfig()) -> ShrinkageSelection:
    """Solve rho / ((1/N) tr C_hat(rho)) = plug-in rhs over the admissible interval."""
    N, n = s.dim, s.count
    lo = max(0.0, 1.0 - n / N) + _EDGE_OFFSET
    try:
        rhs = plug_in_rhs(s)
    except DegenerateTraceError:
        return _clamped(float("inf"))
    scan_cfg = SolverConfig(tol=max(cfg.tol, _SEARCH_TOL), max_iter=cfg.max_iter)
    state: dict = {"init": None}

    def lhs(rho: float, tight: bool = False) -> float:
        est = abramovich_pascal(s, rho, cfg if tight else scan_cfg, init=state["init"])
        state["init"] = est.matrix
        return rho / (np.trace(est.matrix) / N)

    rho, bracketed, evals = _select(rhs, lo, lhs)
    resid = abs(lhs(rho, tight=True) - rhs)
    return ShrinkageSelection(rho=rho, rhs=rhs, lhs_residual=resid,
                              solver_iterations=evals, bracketed=bracketed)


def select_rho_check(s: SampleSet, cfg: SolverConfig = SolverConfig()) -> ShrinkageSelection:
    """Solve the Chen-branch selection equation over (0, 1]."""
    try:
        rhs = plug_in_rhs(s)
    except DegenerateTraceError:
        return _clamped(float("inf"))
    scan_cfg = SolverConfig(tol=max(cfg.tol, _SEARCH_TOL), max_iter=cfg.max_iter)
    X = s.data
    norms2 = np.einsum("ij,ij->j", X, X)
    state: dict = {"init": None}

    def lhs(rho: float, tight: bool = False) -> float:
        est = chen(s, rho, cfg if tight else scan_cfg, init=state["init"])
        state["init"] = est.matrix
        W = np.linalg.solve(est.matrix, X)
        q = rho * float(np.mean(np.einsum("ij,ij->j", X, W) / norms2))
        return q / (1.0 - rho + q)

    rho, bracketed, evals = _select(rhs, _EDGE_OFFSET, lhs)
    resid = abs(lhs(rho, tight=True) - rhs)
    return ShrinkageSelection(rho=rho, rhs=rhs, lhs_residual=resid,
                              solver_iterations=evals, bracketed=bracketed)
