"""Command-line experiment harness.

Subcommands
-----------
density          eigenvalue histogram of a fitted estimator vs. its limiting law
shrinkage-sweep  Monte Carlo sweep over n: selected/oracle losses and parameters
estimate         fit an estimator to a CSV of samples (rows = samples)

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import report
from .estimators import (
    EstimatorConvergenceError,
    SolverConfig,
    abramovich_pascal,
    chen,
    linear_combine,
)
from .measure import (
    PopulationModel,
    ar_toeplitz,
    explicit_model,
    identity_model,
    model_from_descriptor,
    spectral_measure,
    two_atom,
)
from .sampling import SampleSet, TauLaw, constant_tau, sample
from .shrinkage import select_rho_check, select_rho_hat
from .spectrum import DeltaConvergenceError, DensityCurve, density_curve, support_window
from .sweep import SweepConfig, run_sweep

__all__ = ["main"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        raise UsageError(message)


def parse_model(spec: str, N: int | None) -> PopulationModel:
    """Accept shorthand (identity | ar:R | two_atom:A,B | explicit:PATH), inline JSON
    or a path to a JSON descriptor file."""
    spec = spec.strip()
    if spec.startswith("{"):
        return model_from_descriptor(json.loads(spec))
    if spec.endswith(".json") and Path(spec).exists():
        return model_from_descriptor(json.loads(Path(spec).read_text()), base_dir=Path(spec).parent)
    kind, _, rest = spec.partition(":")
    kind = kind.replace("-", "_").lower()
    if kind == "identity":
        if N is None:
            raise UsageError("--N is required with the identity model")
        return identity_model(N)
    if kind == "ar":
        if N is None:
            raise UsageError("--N is required with the ar model")
        try:
            return ar_toeplitz(N, float(rest))
        except ValueError as exc:
            raise UsageError(f"bad ar model spec {spec!r}: {exc}")
    if kind == "two_atom":
        if N is None:
            raise UsageError("--N is required with the two_atom model")
        try:
            a, b = (float(v) for v in rest.split(","))
            return two_atom(N, a, b)
        except (ValueError, TypeError) as exc:
            raise UsageError(f"bad two_atom model spec {spec!r}: {exc}")
    if kind == "explicit":
        return model_from_descriptor({"type": "explicit", "matrix_csv": rest})
    raise UsageError(f"cannot parse model spec {spec!r}")


def _parse_tau(spec: str | None) -> TauLaw:
    if not spec or spec == "constant":
        return constant_tau()
    kind, _, rest = spec.partition(":")
    try:
        return TauLaw(kind.replace("-", "_"), float(rest))
    except ValueError as exc:
        raise UsageError(f"bad tau spec {spec!r}: {exc}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with defaults for any flag")
    p.add_argument("--model", help="identity | ar:R | two_atom:A,B | explicit:PATH | JSON")
    p.add_argument("--N", type=int, help="dimension")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--out", help="output directory (default .)")
    p.add_argument("--threads", type=int, help="worker processes (default 1)")
    p.add_argument("--epsilon", type=float, help="density inversion epsilon (default 1e-4)")
    p.add_argument("--branch", choices=["hat", "check", "both"], help="estimator branch")
    p.add_argument("--tau", help="constant | inverse_gamma:SHAPE | log_normal:SIGMA")


def _build_parser() -> _Parser:
    parser = _Parser(prog="shrinkcov", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("density", help="histogram vs limiting spectral density")
    _add_common(d)
    d.add_argument("--n", type=int, help="sample count")
    d.add_argument("--rho", type=float, help="shrinkage parameter")
    d.add_argument("--points", type=int, help="grid points for the limit curve (default 2000)")
    d.add_argument("--bins", type=int, help="histogram bins (default 100)")

    w = sub.add_parser("shrinkage-sweep", help="Monte Carlo shrinkage performance sweep")
    _add_common(w)
    w.add_argument("--n", help="comma-separated sample counts, e.g. 8,32,128")
    w.add_argument("--trials", type=int, help="Monte Carlo trials per n (default 1000)")
    w.add_argument("--grid-points", type=int, help="rho grid size for oracle curves (default 64)")
    w.add_argument("--grid-min", type=float, help="smallest rho on the oracle grid (default 1e-3)")
    w.add_argument("--tol", type=float, help="inner fixed-point tolerance (default 1e-8)")

    e = sub.add_parser("estimate", help="fit an estimator to samples from a CSV")
    _add_common(e)
    e.add_argument("--input", help="CSV with one sample per row")
    e.add_argument("--rho", help='shrinkage parameter or "auto"')
    e.add_argument("--kind", help="abramovich_pascal | chen | linear (aliases: hat, check)")

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """CLI flags override --config file values, which override defaults."""
    merged: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        merged.update(json.loads(path.read_text()))
    for key, val in vars(args).items():
        if key not in ("config", "command") and val is not None:
            merged[key.replace("-", "_")] = val
    merged.setdefault("seed", 0)
    merged.setdefault("out", ".")
    merged.setdefault("threads", 1)
    merged.setdefault("epsilon", 1e-4)
    merged.setdefault("branch", "hat")
    return merged


def _require(cfg: dict, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join(f"--{k}" for k in missing))


def _fit(branch: str, s: SampleSet, rho: float, cfg: SolverConfig):
    if branch == "hat":
        return abramovich_pascal(s, rho, cfg)
    return chen(s, rho, cfg)


def _density_one_branch(branch: str, model, s, rho: float, out: Path,
                        epsilon: float, points: int, bins: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    est = _fit(branch, s, rho, SolverConfig())
    eigs = np.linalg.eigvalsh(est.matrix)
    nu = spectral_measure(model)
    c = s.dim / s.count

    curve = None
    warning = None
    if rho == 1.0:
        warning = "rho = 1: limiting law degenerates to a unit point mass; curve suppressed"
        print(f"warning: {warning}", file=sys.stderr)
        atom_location, atom_mass = None, 0.0
    else:
        lo, hi = support_window(nu, rho, c, branch, epsilon)
        lo = min(lo, eigs.min() - 0.02 * (hi - lo))
        hi = max(hi, eigs.max() + 0.02 * (hi - lo))
        curve = density_curve(nu, rho, c, max(lo, 1e-9), hi, points, epsilon, branch)
        atom_location, atom_mass = curve.atom_location, curve.atom_mass

    span = eigs.max() - eigs.min()
    edges = np.linspace(eigs.min() - 0.01 * span - 1e-12, eigs.max() + 0.01 * span + 1e-12, bins + 1)
    counts, _ = np.histogram(eigs, bins=edges)
    dens = counts / (counts.sum() * np.diff(edges))
    hist = np.column_stack([edges[:-1], edges[1:], counts, dens])
    with (out / "hist.csv").open("w") as fh:
        fh.write("bin_left,bin_right,count,density\n")
        for row in hist:
            fh.write(f"{row[0]:.12g},{row[1]:.12g},{int(row[2])},{row[3]:.12g}\n")

    if curve is not None:
        curve.save(out / "limit.csv")
    else:
        (out / "limit.csv").write_text("x,density\n")
    atoms = {
        "branch": branch,
        "rho": rho,
        "c": c,
        "epsilon": epsilon,
        "atom_location": atom_location,
        "atom_mass": atom_mass,
        "estimator": est.diagnostics(),
    }
    if warning:
        atoms["warning"] = warning
    (out / "atoms.json").write_text(json.dumps(atoms, indent=2))
    report.render_density(out / "density.png", hist, curve, atom_location, atom_mass,
                          title=f"{branch} branch, rho={rho:g}, N={s.dim}, n={s.count}")


def _cmd_density(cfg: dict) -> int:
    _require(cfg, "model", "n", "rho")
    model = parse_model(cfg["model"], cfg.get("N"))
    rho = float(cfg["rho"])
    s = sample(model, int(cfg["n"]), _parse_tau(cfg.get("tau")), int(cfg["seed"]))
    out = Path(cfg["out"])
    points = int(cfg.get("points") or 2000)
    bins = int(cfg.get("bins") or 100)
    branches = ["hat", "check"] if cfg["branch"] == "both" else [cfg["branch"]]
    for branch in branches:
        target = out if len(branches) == 1 else out / branch
        _density_one_branch(branch, model, s, rho, target, float(cfg["epsilon"]), points, bins)
    return 0


def _cmd_sweep(cfg: dict) -> int:
    _require(cfg, "model", "n")
    model = parse_model(cfg["model"], cfg.get("N"))
    n_list = tuple(int(v) for v in str(cfg["n"]).split(","))
    sweep_cfg = SweepConfig(
        model_descriptor=model.descriptor,
        n_list=n_list,
        trials=int(cfg.get("trials") or 1000),
        seed=int(cfg["seed"]),
        branch=cfg["branch"] if cfg.get("branch") else "both",
        grid_points=int(cfg.get("grid_points") or 64),
        grid_min=float(cfg.get("grid_min") or 1e-3),
        tol=float(cfg.get("tol") or 1e-8),
        threads=int(cfg["threads"]),
        tau=_parse_tau(cfg.get("tau")),
    )
    result = run_sweep(sweep_cfg, model)
    out = Path(cfg["out"])
    sweep_path, rho_path = result.save(out)
    report.render_sweep_losses(out / "loss.png", result.loss_rows)
    report.render_sweep_rhos(out / "rho.png", result.rho_rows)
    total_failures = sum(result.failures.values())
    print(f"wrote {sweep_path} and {rho_path}; {total_failures} failed trial(s)")
    for msg in result.messages:
        print(f"  failure: {msg}", file=sys.stderr)
    return 0


_KIND_ALIASES = {
    "abramovich_pascal": "abramovich_pascal", "ap": "abramovich_pascal", "hat": "abramovich_pascal",
    "chen": "chen", "check": "chen",
    "linear": "linear",
}


def _cmd_estimate(cfg: dict) -> int:
    _require(cfg, "input", "rho", "kind")
    kind = _KIND_ALIASES.get(str(cfg["kind"]).lower())
    if kind is None:
        raise UsageError(f"unknown estimator kind {cfg['kind']!r}")
    path = Path(cfg["input"])
    if not path.exists():
        raise UsageError(f"input file not found: {path}")
    try:
        X = np.loadtxt(path, delimiter=",", ndmin=2).T
    except ValueError as exc:
        raise UsageError(f"malformed CSV {path}: {exc}")
    if X.size == 0:
        raise UsageError(f"no samples in {path}")
    s = SampleSet(X)

    rho_arg = str(cfg["rho"]).lower()
    solver = SolverConfig()
    selection = None
    if rho_arg == "auto":
        if kind == "linear":
            raise UsageError('rho="auto" needs kind abramovich_pascal or chen')
        selection = select_rho_hat(s, solver) if kind == "abramovich_pascal" \
            else select_rho_check(s, solver)
        rho = selection.rho
    else:
        try:
            rho = float(rho_arg)
        except ValueError:
            raise UsageError(f'rho must be a number or "auto", got {cfg["rho"]!r}')

    if kind == "abramovich_pascal":
        est = abramovich_pascal(s, rho, solver)
    elif kind == "chen":
        est = chen(s, rho, solver)
    else:
        est = linear_combine(s, rho)

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "covariance.csv", est.matrix, delimiter=",")
    diag = est.diagnostics()
    if selection is not None:
        diag["selection"] = json.loads(selection.to_json())
    (out / "estimate.json").write_text(json.dumps(diag, indent=2))
    print(f"wrote {out / 'covariance.csv'} (kind={kind}, rho={rho:.6g})")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _merge_config(args)
        if args.command == "density":
            return _cmd_density(cfg)
        if args.command == "shrinkage-sweep":
            return _cmd_sweep(cfg)
        return _cmd_estimate(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (EstimatorConvergenceError, DeltaConvergenceError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
