"""Elliptical sample generation x_i = sqrt(tau_i) * A @ y_i.

The directions y_i are uniform on the sphere of radius sqrt(N), realized
as sqrt(N) * g / ||g|| with g standard Gaussian.  Radial scales tau_i are
drawn from a configurable positive law; the robust estimators downstream
are invariant to them, so laws other than the constant exist only to
exercise that invariance.

Each column gets its own counter-based substream (Philox keyed by
(seed, column index)), so generation is reproducible and independent of
any parallel schedule.  The Gaussian vector is drawn before tau on every
substream, which keeps directions identical across tau laws for a fixed
seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .measure import PopulationModel, model_from_descriptor

__all__ = ["TauLaw", "SampleSet", "sample", "constant_tau", "inverse_gamma_tau", "log_normal_tau"]

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class TauLaw:
    """Positive radial-scale law: constant(1), inverse-gamma(shape) or log-normal(sigma)."""

    kind: str = "constant"
    param: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "inverse_gamma", "log_normal"):
            raise ValueError(f"unknown tau law {self.kind!r}")
        if self.kind != "constant" and (self.param is None or self.param <= 0):
            raise ValueError(f"{self.kind} law needs a positive parameter")

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "constant":
            return 1.0
        if self.kind == "inverse_gamma":
            g = 0.0
            while g <= 0.0:
                g = rng.gamma(self.param)
            return 1.0 / g
        return float(np.exp(self.param * rng.standard_normal()))

    def to_json(self) -> dict:
        d = {"law": self.kind}
        if self.param is not None:
            d["param"] = self.param
        return d

    @staticmethod
    def from_json(d: dict) -> "TauLaw":
        return TauLaw(d["law"], d.get("param"))


def constant_tau() -> TauLaw:
    return TauLaw("constant")


def inverse_gamma_tau(shape: float) -> TauLaw:
    return TauLaw("inverse_gamma", shape)


def log_normal_tau(sigma: float) -> TauLaw:
    return TauLaw("log_normal", sigma)


@dataclass(frozen=True)
class SampleSet:
    """n samples of dimension N, stored as the columns of `data`."""

    data: np.ndarray
    seed: int = 0
    tau_law: TauLaw = field(default_factory=constant_tau)
    model_descriptor: dict | None = None

    def __post_init__(self):
        X = np.asarray(self.data, dtype=float)
        if X.ndim != 2:
            raise ValueError("data must be an N x n matrix")
        norms = np.linalg.norm(X, axis=0)
        if np.any(norms == 0):
            raise ValueError("sample set contains a zero column")
        object.__setattr__(self, "data", X)
        self.data.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def count(self) -> int:
        return self.data.shape[1]

    def normalized(self) -> "SampleSet":
        """Columns rescaled to sqrt(N) * x / ||x|| (removes radial scales)."""
        X = self.data
        Y = X * (np.sqrt(self.dim) / np.linalg.norm(X, axis=0))
        return SampleSet(Y, seed=self.seed, tau_law=self.tau_law,
                         model_descriptor=self.model_descriptor)

    def rescaled(self, alphas: np.ndarray) -> "SampleSet":
        alphas = np.asarray(alphas, dtype=float)
        if alphas.shape != (self.count,) or np.any(alphas <= 0):
            raise ValueError("need one positive scale per column")
        return SampleSet(self.data * alphas, seed=self.seed, tau_law=self.tau_law,
                         model_descriptor=self.model_descriptor)

    def save(self, path: str | Path) -> None:
        """Write samples as CSV (n rows x N columns) plus a JSON sidecar."""
        path = Path(path)
        np.savetxt(path, self.data.T, delimiter=",")
        sidecar = {
            "N": self.dim,
            "n": self.count,
            "seed": int(self.seed),
            "model": self.model_descriptor,
            "tau": self.tau_law.to_json(),
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))

    @staticmethod
    def load(path: str | Path) -> "SampleSet":
        path = Path(path)
        X = np.loadtxt(path, delimiter=",", ndmin=2).T
        meta_path = path.with_suffix(".json")
        seed, tau, model = 0, constant_tau(), None
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            seed = int(meta.get("seed", 0))
            if meta.get("tau"):
                tau = TauLaw.from_json(meta["tau"])
            model = meta.get("model")
        return SampleSet(X, seed=seed, tau_law=tau, model_descriptor=model)


def _column_rng(seed: int, col: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed & _SEED_MASK, spawn_key=(col,))
    return np.random.Generator(np.random.Philox(ss))


def sample(model: PopulationModel, n: int, tau: TauLaw | None = None, seed: int = 0) -> SampleSet:
    """Draw n elliptical samples from the model; deterministic given (seed, model, n, tau)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    tau = tau or constant_tau()
    N = model.dim
    G = np.empty((N, n))
    taus = np.empty(n)
    for i in range(n):
        rng = _column_rng(seed, i)
        g = rng.standard_normal(N)
        while not np.any(g):  # probability-zero degenerate draw
            g = rng.standard_normal(N)
        G[:, i] = g
        taus[i] = tau.draw(rng)
    Y = G * (np.sqrt(N) / np.linalg.norm(G, axis=0))
    X = model.sqrt_factor @ (Y * np.sqrt(taus))
    return SampleSet(X, seed=seed, tau_law=tau, model_descriptor=model.descriptor or None)


def resample(descriptor: dict, n: int, tau: TauLaw | None = None, seed: int = 0) -> SampleSet:
    """Rebuild the model from its descriptor and sample (worker-process helper)."""
    return sample(model_from_descriptor(descriptor), n, tau, seed)
