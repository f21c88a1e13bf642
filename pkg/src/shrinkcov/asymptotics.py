"""Large-dimensional deterministic equivalents of the robust shrinkage estimators.

Everything here is driven by the population spectral measure nu, the
ratio c = N/n and the shrinkage parameter rho.  The two scalar fixed
points gamma_hat and gamma_check determine the deterministic-equivalent
matrices S_hat and S_check, the variable-change maps f_hat / f_check that
link the two estimator families to plain linear shrinkage, and the
asymptotically optimal parameters (rho_star, d_star, and their preimages
under the maps).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np

from ._roots import solve_bracketed
from .measure import SpectralMeasure
from .sampling import SampleSet

__all__ = [
    "AsymptoticParams",
    "ShrinkageTheory",
    "gamma_hat",
    "big_F",
    "gamma_check",
    "f_hat",
    "f_check",
    "f_hat_inverse",
    "f_check_inverse",
    "rho_star_dstar",
    "hat_lower_bound",
    "first_moment_hat",
    "s_hat_equivalent",
    "s_check_equivalent",
]

_GAMMA_TOL = 1e-13  # residual target; contract is 1e-12
_BOUNDARY_GUARD = 1e-9


def hat_lower_bound(c: float) -> float:
    """Lower end of the admissible rho interval for the hat branch."""
    return max(0.0, 1.0 - 1.0 / c)


def _check_rho(rho: float) -> None:
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")


def _check_rho_hat(rho: float, c: float) -> None:
    lo = hat_lower_bound(c)
    if rho > 1.0 or rho <= lo + _BOUNDARY_GUARD:
        raise ValueError(f"rho must lie in ({lo}, 1] clear of the boundary, got {rho}")


def gamma_hat(nu: SpectralMeasure, rho: float) -> float:
    """Unique positive root of 1 = int t / (gamma*rho + (1-rho)*t) nu(dt).

    Does not depend on c.  At rho = 1 the root is the first moment of nu.
    """
    _check_rho(rho)
    t, w = nu.atoms, nu.weights

    def f(g: float) -> float:
        return float(np.sum(w * t / (g * rho + (1.0 - rho) * t)) - 1.0)

    def df(g: float) -> float:
        return float(-rho * np.sum(w * t / (g * rho + (1.0 - rho) * t) ** 2))

    hi = nu.support_max / rho
    if f(hi) > 0:  # single-atom edge case: root sits at the bound
        return hi
    return solve_bracketed(f, 1e-12, hi, f_tol=_GAMMA_TOL, df=df)


def big_F(x: float, rho: float, c: float) -> float:
    """F(x; rho) = (rho - c(1-rho))/2 + sqrt(((rho - c(1-rho))/2)^2 + (1-rho)/x)."""
    if x <= 0:
        raise ValueError("x must be positive")
    h = 0.5 * (rho - c * (1.0 - rho))
    return h + math.sqrt(h * h + (1.0 - rho) / x)


@dataclass(frozen=True)
class AsymptoticParams:
    """Solved check-branch scalars at one (nu, rho, c)."""

    rho: float
    c: float
    gamma: float
    F_at_gamma: float
    T_rho: float
    f_value: float
    residual: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def gamma_check(nu: SpectralMeasure, rho: float, c: float) -> AsymptoticParams:
    """Unique positive root of 1 = int t / (g*rho + (1-rho)*t / ((1-rho)c + F(g))) nu(dt),

    together with the derived quantities T_rho = rho*g*F(g) and
    f_check = T_rho / (1 - rho + T_rho).
    """
    _check_rho(rho)
    t, w = nu.atoms, nu.weights

    def f(g: float) -> float:
        F = big_F(g, rho, c)
        return float(np.sum(w * t / (g * rho + (1.0 - rho) * t / ((1.0 - rho) * c + F))) - 1.0)

    hi = nu.support_max / rho
    while f(hi) > 0:
        hi *= 2.0
    g = solve_bracketed(f, 1e-12, hi, f_tol=_GAMMA_TOL)
    F = big_F(g, rho, c)
    T = rho * g * F
    return AsymptoticParams(rho=rho, c=c, gamma=g, F_at_gamma=F, T_rho=T,
                            f_value=T / (1.0 - rho + T), residual=abs(f(g)))


def f_hat(nu: SpectralMeasure, rho: float, c: float) -> float:
    """Variable-change map rho -> rho / ((1/gamma_hat)*(1-rho)/(1-(1-rho)c) + rho)."""
    _check_rho_hat(rho, c)
    g = gamma_hat(nu, rho)
    return rho / ((1.0 / g) * (1.0 - rho) / (1.0 - (1.0 - rho) * c) + rho)


def f_check(nu: SpectralMeasure, rho: float, c: float) -> float:
    """Variable-change map rho -> T_rho / (1 - rho + T_rho)."""
    return gamma_check(nu, rho, c).f_value


def _invert_increasing(f, lo: float, target: float, *, x_tol: float = 1e-14) -> float:
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target must lie in (0, 1], got {target}")
    if target == 1.0:
        return 1.0
    flo = f(lo)
    if flo >= target:
        return lo
    hi = 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= x_tol:
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def f_hat_inverse(nu: SpectralMeasure, target: float, c: float) -> float:
    """rho with f_hat(rho) = target, by bisection on the increasing map."""
    lo = hat_lower_bound(c) + 10.0 * _BOUNDARY_GUARD
    return _invert_increasing(lambda x: f_hat(nu, x, c), lo, target)


def f_check_inverse(nu: SpectralMeasure, target: float, c: float) -> float:
    """rho with f_check(rho) = target, by bisection on the increasing map."""
    return _invert_increasing(lambda x: f_check(nu, x, c), 10.0 * _BOUNDARY_GUARD, target)


class ShrinkageTheory(NamedTuple):
    rho_star: float
    d_star: float
    rho_hat_star: float
    rho_check_star: float


def rho_star_dstar(nu: SpectralMeasure, c: float) -> ShrinkageTheory:
    """Asymptotically optimal shrinkage: rho* = c/(c+M2-1), D* = c(M2-1)/(c+M2-1),

    plus the branch parameters rho_hat* and rho_check* mapping onto rho*
    under f_hat and f_check.
    """
    m2 = nu.moment(2)
    denom = c + m2 - 1.0
    rho_star = c / denom
    d_star = c * (m2 - 1.0) / denom
    return ShrinkageTheory(
        rho_star=rho_star,
        d_star=d_star,
        rho_hat_star=f_hat_inverse(nu, rho_star, c),
        rho_check_star=f_check_inverse(nu, rho_star, c),
    )


def first_moment_hat(nu: SpectralMeasure, rho: float, c: float) -> float:
    """First moment of the limiting hat spectrum: (1/gamma)*(1-rho)/(1-(1-rho)c) + rho."""
    _check_rho_hat(rho, c)
    g = gamma_hat(nu, rho)
    return (1.0 / g) * (1.0 - rho) / (1.0 - (1.0 - rho) * c) + rho


def _scatter(z: SampleSet) -> np.ndarray:
    X = z.data
    return (X @ X.T) / z.count


def s_hat_equivalent(z: SampleSet, nu: SpectralMeasure, rho: float, c: float | None = None) -> np.ndarray:
    """Deterministic equivalent (1/gamma)*(1-rho)/(1-(1-rho)c) * (1/n) Z Z^T + rho I."""
    if c is None:
        c = z.dim / z.count
    _check_rho_hat(rho, c)
    g = gamma_hat(nu, rho)
    a = (1.0 / g) * (1.0 - rho) / (1.0 - (1.0 - rho) * c)
    return a * _scatter(z) + rho * np.eye(z.dim)


def s_check_equivalent(z: SampleSet, nu: SpectralMeasure, rho: float, c: float | None = None) -> np.ndarray:
    """Deterministic equivalent (1-rho)/(1-rho+T) * (1/n) Z Z^T + T/(1-rho+T) * I."""
    if c is None:
        c = z.dim / z.count
    p = gamma_check(nu, rho, c)
    denom = 1.0 - rho + p.T_rho
    return ((1.0 - rho) / denom) * _scatter(z) + (p.T_rho / denom) * np.eye(z.dim)
