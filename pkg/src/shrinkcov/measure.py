"""Discrete spectral measures and population covariance models.

A population model is an N x N symmetric nonnegative-definite matrix C
normalized so that trace(C)/N = 1.  Its spectral measure is the uniform
probability measure on the eigenvalues of C; all large-dimensional
formulas in this package are driven by that measure and by the ratio
c = N/n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "SpectralMeasure",
    "PopulationModel",
    "ar_toeplitz",
    "two_atom",
    "identity_model",
    "explicit_model",
    "spectral_measure",
    "moment",
    "model_from_json",
    "model_to_json",
]

_WEIGHT_TOL = 1e-12
_TRACE_TOL = 1e-10
_SYM_TOL = 1e-12
_MERGE_RTOL = 1e-9


@dataclass(frozen=True)
class SpectralMeasure:
    """Discrete probability measure on [0, inf): sum_k w_k * delta_{t_k}.

    Atoms are stored sorted ascending.  Population measures derived from a
    normalized covariance have first moment 1.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.ndim != 1 or atoms.shape != weights.shape:
            raise ValueError("atoms and weights must be 1-d arrays of equal length")
        if np.any(atoms < 0):
            raise ValueError("atoms must be nonnegative")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 (got {weights.sum()!r})")
        if atoms.max() <= 0:
            raise ValueError("measure must put mass off zero (nu != delta_0)")
        order = np.argsort(atoms)
        object.__setattr__(self, "atoms", atoms[order])
        object.__setattr__(self, "weights", weights[order])
        self.atoms.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def support_max(self) -> float:
        return float(self.atoms[-1])

    def moment(self, ell: int) -> float:
        """M_ell = sum_k w_k t_k**ell for integer ell >= 1."""
        if ell < 1:
            raise ValueError("moment order must be >= 1")
        return float(np.sum(self.weights * self.atoms**ell))


@dataclass(frozen=True)
class PopulationModel:
    """Normalized population covariance together with its build descriptor."""

    covariance: np.ndarray
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        C = np.asarray(self.covariance, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if not np.allclose(C, C.T, atol=_SYM_TOL, rtol=0.0):
            raise ValueError("covariance must be symmetric")
        N = C.shape[0]
        tr = np.trace(C) / N
        if tr <= 0:
            raise ValueError("covariance must have positive trace")
        if abs(tr - 1.0) > _TRACE_TOL:
            C = C / tr
        object.__setattr__(self, "covariance", C)
        self.covariance.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    @cached_property
    def _is_diagonal(self) -> bool:
        return not np.any(self.covariance[~np.eye(self.dim, dtype=bool)])

    @cached_property
    def sqrt_factor(self) -> np.ndarray:
        """Symmetric PSD square root A with A @ A.T == covariance."""
        if self._is_diagonal:
            return np.diag(np.sqrt(np.diag(self.covariance)))
        vals, vecs = np.linalg.eigh(self.covariance)
        vals = np.clip(vals, 0.0, None)
        return (vecs * np.sqrt(vals)) @ vecs.T

    @cached_property
    def inverse(self) -> np.ndarray:
        if self._is_diagonal:
            d = np.diag(self.covariance)
            if d.min() <= 0:
                raise np.linalg.LinAlgError("population covariance is singular")
            return np.diag(1.0 / d)
        vals, vecs = np.linalg.eigh(self.covariance)
        if vals.min() <= 0:
            raise np.linalg.LinAlgError("population covariance is singular")
        return (vecs / vals) @ vecs.T


def ar_toeplitz(N: int, r: float) -> PopulationModel:
    """AR-style Toeplitz model with entries r**|i-j|, r in [0, 1).

    The diagonal is 1, so the matrix is already trace-normalized.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0.0 <= r < 1.0:
        raise ValueError("r must lie in [0, 1)")
    idx = np.arange(N)
    C = r ** np.abs(np.subtract.outer(idx, idx)).astype(float)
    return PopulationModel(C, {"type": "ar", "n": N, "r": float(r)})


def two_atom(N: int, a: float, b: float) -> PopulationModel:
    """Block-diagonal model diag(a I_{N/2}, b I_{N/2}), trace-normalized."""
    if N < 2 or N % 2:
        raise ValueError("N must be even and >= 2")
    if a < 0 or b < 0 or (a == 0 and b == 0):
        raise ValueError("atoms must be nonnegative and not both zero")
    diag = np.concatenate([np.full(N // 2, float(a)), np.full(N // 2, float(b))])
    diag = diag / diag.mean()
    return PopulationModel(np.diag(diag), {"type": "two_atom", "n": N, "a": float(a), "b": float(b)})


def identity_model(N: int) -> PopulationModel:
    """Identity covariance, encoded as the r=0 AR model."""
    return ar_toeplitz(N, 0.0)


def explicit_model(matrix: np.ndarray, csv_path: str | None = None) -> PopulationModel:
    desc = {"type": "explicit"}
    if csv_path is not None:
        desc["matrix_csv"] = str(csv_path)
    return PopulationModel(np.asarray(matrix, dtype=float), desc)


def spectral_measure(model: PopulationModel) -> SpectralMeasure:
    """Uniform measure on the eigenvalues of the model covariance.

    Eigenvalues equal up to relative tolerance 1e-9 are merged into one
    atom with summed weight, so e.g. two-block models yield exactly two
    atoms despite floating-point eigensolvers.
    """
    vals = np.linalg.eigvalsh(model.covariance)
    vals = np.clip(vals, 0.0, None)
    N = vals.size
    atoms: list[float] = []
    weights: list[float] = []
    for v in vals:  # vals sorted ascending
        if atoms and abs(v - atoms[-1]) <= _MERGE_RTOL * max(abs(v), abs(atoms[-1]), 1e-300):
            k = weights[-1] / (1.0 / N)
            atoms[-1] = (atoms[-1] * k + v) / (k + 1)
            weights[-1] += 1.0 / N
        else:
            atoms.append(float(v))
            weights.append(1.0 / N)
    return SpectralMeasure(np.array(atoms), np.array(weights))


def moment(measure: SpectralMeasure, ell: int) -> float:
    return measure.moment(ell)


def model_to_json(model: PopulationModel) -> str:
    return json.dumps(model.descriptor if model.descriptor else {"type": "explicit"})


def model_from_descriptor(desc: dict, base_dir: str | Path | None = None) -> PopulationModel:
    kind = desc.get("type")
    if kind == "ar":
        return ar_toeplitz(int(desc["n"]), float(desc["r"]))
    if kind == "two_atom":
        return two_atom(int(desc["n"]), float(desc["a"]), float(desc["b"]))
    if kind == "explicit":
        path = Path(desc["matrix_csv"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        C = np.loadtxt(path, delimiter=",", ndmin=2)
        return explicit_model(C, csv_path=desc["matrix_csv"])
    raise ValueError(f"unknown model type {kind!r}")


def model_from_json(text: str, base_dir: str | Path | None = None) -> PopulationModel:
    """Parse {"type":"ar","n":..,"r":..} | {"type":"two_atom",..} | {"type":"explicit","matrix_csv":..}."""
    return model_from_descriptor(json.loads(text), base_dir=base_dir)
