"""Command-line front end: train, analyze spectra, and sweep parameter grids.

Run configuration is resolved in precedence order: built-in defaults, then
``--preset``, then ``--config`` (a JSON file of RunSpec fields), then explicit
flags. Invalid specs are rejected before any work starts with one aggregated
message listing every violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import artifacts, diagnostics, ntk
from .errors import NonFiniteLossError, RitzffError, SpecValidationError
from .features import FeatureMap, fourier1d, fourier2d_plus_identity, identity_map
from .network import NetworkConfig
from .presets import PRESETS
from .problems import PROBLEM_IDS, VariationalProblem, make_problem
from .training import TrainConfig, train

ACTIVATIONS = ("relu", "smoothsqrt")


@dataclass
class RunSpec:
    """Everything one training run needs, as plain CLI-settable fields."""

    problem: str = "dw1d"
    layers: int = 5
    width: int = 128
    activation: str = "relu"
    rho: float = 0.1
    fourier_i: int | None = None
    epochs: int = 20_000
    lr0: float = 1e-4
    lam: float = 500.0
    eps: float = 0.0
    seed: int = 0
    sampling: str = "auto"
    out: str | None = None

    def resolved_sampling(self) -> str:
        if self.sampling != "auto":
            return self.sampling
        return "fixed" if self.problem.startswith("twin2d") else "resample"


def validate_spec(spec: RunSpec, need_out: bool = True) -> None:
    """Reject an invalid spec with a single message naming every violation."""
    bad = []
    if spec.problem not in PROBLEM_IDS:
        bad.append(f"problem must be one of {PROBLEM_IDS}, got {spec.problem!r}")
    if spec.layers < 1:
        bad.append(f"layers must be >= 1, got {spec.layers}")
    if spec.width < 1:
        bad.append(f"width must be >= 1, got {spec.width}")
    if spec.activation not in ACTIVATIONS:
        bad.append(f"activation must be one of {ACTIVATIONS}, got {spec.activation!r}")
    if spec.activation == "smoothsqrt" and spec.rho <= 0.0:
        bad.append(f"rho must be positive for smoothsqrt, got {spec.rho}")
    if spec.fourier_i is not None and spec.fourier_i < 0:
        bad.append(f"fourier-i must be >= 0, got {spec.fourier_i}")
    if spec.epochs < 1:
        bad.append(f"epochs must be >= 1, got {spec.epochs}")
    if spec.lr0 <= 0.0:
        bad.append(f"lr must be positive, got {spec.lr0}")
    if spec.lam <= 0.0:
        bad.append(f"lambda must be positive, got {spec.lam}")
    if spec.eps < 0.0:
        bad.append(f"eps must be nonnegative, got {spec.eps}")
    if spec.eps > 0.0 and spec.problem != "twin2d-reg":
        bad.append(f"eps applies to twin2d-reg only, got eps={spec.eps} with {spec.problem!r}")
    if spec.seed < 0:
        bad.append(f"seed must be a nonnegative integer, got {spec.seed}")
    if spec.problem == "twin2d-reg" and spec.activation == "relu":
        bad.append("twin2d-reg needs the smoothsqrt activation (u_yy term)")
    if spec.sampling not in ("auto", "resample", "fixed"):
        bad.append(f"sampling must be auto, resample or fixed, got {spec.sampling!r}")
    if need_out and not spec.out:
        bad.append("out directory is required")
    if bad:
        raise SpecValidationError("invalid run spec: " + "; ".join(bad))


def build_components(spec: RunSpec) -> tuple[VariationalProblem, NetworkConfig, FeatureMap, TrainConfig]:
    prob = make_problem(spec.problem, eps=spec.eps, lam=spec.lam)
    if spec.fourier_i is None:
        fmap = identity_map(prob.dimension)
    elif prob.dimension == 1:
        fmap = fourier1d(spec.fourier_i)
    else:
        fmap = fourier2d_plus_identity(spec.fourier_i)
    netconfig = NetworkConfig(
        input_dim=fmap.output_dim,
        hidden_layers=spec.layers,
        width=spec.width,
        activation=spec.activation,
        rho=spec.rho,
    )
    if prob.dimension == 1:
        batches = {"batch_interior": 128, "batch_boundary": 2}
    else:
        batches = {"batch_interior": 600, "batch_boundary": 400}
    tconfig = TrainConfig(
        epochs=spec.epochs,
        lr0=spec.lr0,
        lam=spec.lam,
        seed=spec.seed,
        schedule="cosine",
        sampling=spec.resolved_sampling(),
        **batches,
    )
    return prob, netconfig, fmap, tconfig


def run_train(spec: RunSpec, out_dir: Path) -> dict:
    """Train one spec, write all artifacts into out_dir, return a summary."""
    prob, netconfig, fmap, tconfig = build_components(spec)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = train(prob, netconfig, fmap, tconfig, checkpoint_dir=out_dir)
    net = result.network

    grid = diagnostics.evaluate_grid(net, fmap, prob, 1001 if prob.dimension == 1 else 101)
    report = diagnostics.transition_report(net, fmap, prob)
    energy = diagnostics.energy_report(
        net, fmap, prob,
        resolution=512 if prob.dimension == 1 else 201,
        mc_samples=100_000, seed=spec.seed,
    )

    artifacts.write_manifest(out_dir / "manifest.json", result.manifest)
    artifacts.write_loss_history(out_dir / "loss_history.csv", result.history)
    artifacts.write_fields(out_dir / "fields.csv", grid)
    artifacts.write_transition_report(out_dir / "transitions.json", report)
    artifacts.write_energy_report(out_dir / "energy.json", energy)

    return {
        "final_loss": result.manifest.final_loss,
        "grid_energy": energy.grid_energy,
        "boundary_penalty": energy.boundary_penalty,
        "transitions": report.count,
        "wall_clock_s": result.manifest.wall_clock_s,
    }


def _require_fresh_dir(out: Path, force: bool) -> None:
    if out.exists() and not force:
        raise SpecValidationError(
            f"output directory {out} exists; pass --force to overwrite"
        )


def cmd_train(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    validate_spec(spec)
    out = Path(spec.out)
    _require_fresh_dir(out, args.force)
    try:
        summary = run_train(spec, out)
    except NonFiniteLossError as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 1
    print(
        f"trained {spec.problem} ({spec.layers}x{spec.width}, "
        f"{'ff i=' + str(spec.fourier_i) if spec.fourier_i is not None else 'no ff'}, "
        f"seed {spec.seed}): loss {summary['final_loss']:.6g}, "
        f"energy {summary['grid_energy']:.6g}, penalty {summary['boundary_penalty']:.6g}, "
        f"{summary['transitions']} transitions  [{summary['wall_clock_s']:.1f}s]"
    )
    return 0


SWEEP_AXES = {"depth": "layers", "frequency": "fourier_i", "eps": "eps", "seed": "seed"}
MAX_SWEEP_RUNS = 64


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    axis = args.axis
    values = _parse_sweep_values(axis, args.values)
    if not values:
        raise SpecValidationError("sweep values must be a nonempty list")
    if len(values) > MAX_SWEEP_RUNS:
        raise SpecValidationError(f"a sweep is limited to {MAX_SWEEP_RUNS} runs, got {len(values)}")
    validate_spec(spec)
    out = Path(spec.out)
    _require_fresh_dir(out, args.force)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for value in values:
        sub = dataclasses.replace(spec, **{SWEEP_AXES[axis]: value})
        sub_dir = out / f"run-{axis}-{value}"
        t0 = time.perf_counter()
        try:
            validate_spec(sub)
            summary = run_train(sub, sub_dir)
            row = [float(value), summary["final_loss"], summary["grid_energy"],
                   summary["boundary_penalty"], float(summary["transitions"]),
                   summary["wall_clock_s"], 0.0]
        except RitzffError as exc:
            print(f"run {axis}={value} failed: {exc}", file=sys.stderr)
            row = [float(value), np.nan, np.nan, np.nan, np.nan,
                   time.perf_counter() - t0, 1.0]
        rows.append(row)
        print(f"sweep {axis}={value}: "
              + ("ok" if row[-1] == 0.0 else "FAILED"))

    header = [axis, "final_loss", "grid_energy", "boundary_penalty",
              "transitions", "wall_clock_s", "failed"]
    columns = [np.array([r[i] for r in rows]) for i in range(len(header))]
    artifacts.write_table(out / "summary.csv", header, columns)
    return 0


def _parse_sweep_values(axis: str, raw: str) -> list:
    if axis not in SWEEP_AXES:
        raise SpecValidationError(f"sweep axis must be one of {sorted(SWEEP_AXES)}")
    items = [v for v in raw.split(",") if v.strip()]
    if axis == "eps":
        return [parse_eps(v) for v in items]
    return [int(v) for v in items]


def cmd_ntk(args: argparse.Namespace) -> int:
    out = Path(args.out) if args.out else None
    if out is not None:
        _require_fresh_dir(out, args.force)
        out.mkdir(parents=True, exist_ok=True)

    if args.self_test:
        kernel = ntk.constant_kernel if args.self_test == "constant" else ntk.brownian_kernel
        n_values = tuple(int(v) for v in args.n_values.split(","))
        table = ntk.operator_eigenvalue_relation(kernel, n_values, k_max=args.k_show)
        print(f"{args.self_test} kernel: lambda_k / n")
        for n, vals in table.items():
            print(f"  n={n}: " + ", ".join(f"{v:.6g}" for v in vals))
        if args.self_test == "brownian":
            ref = ntk.brownian_operator_eigenvalue(1)
            print(f"  closed-form limit for k=1: {ref:.6g}")
        if out is not None:
            ns, ks, vals = [], [], []
            for n, v in table.items():
                for k, lam in enumerate(v, start=1):
                    ns.append(n)
                    ks.append(k)
                    vals.append(lam)
            artifacts.write_table(out / "operator_table.csv",
                                  ["n", "k", "lambda_over_n"],
                                  [np.array(ns), np.array(ks), np.array(vals)])
        return 0

    seeds = tuple(range(args.seeds))
    experiment = ntk.scalar_decay_experiment(
        width=args.width, n_points=args.points, freq_exponent=args.fourier_i,
        seeds=seeds, k_range=(args.k_min, args.k_max),
        hidden_layers=args.layers, activation=args.activation,
    )
    fit = experiment.fit
    print(f"scalar kernel spectrum: width {args.width}, {args.points} points, "
          f"i={args.fourier_i}, {len(seeds)} seeds")
    print(f"  log-log slope over k in [{fit.k_min}, {fit.k_max}]: {fit.slope:.4f} "
          f"(per-seed spread {experiment.per_seed_slopes.min():.4f} "
          f"to {experiment.per_seed_slopes.max():.4f})")
    if out is not None:
        artifacts.write_spectrum(out / "spectrum.csv", experiment.eigenvalues)
        artifacts.write_fit_report(out / "fit.json", {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "k_min": fit.k_min,
            "k_max": fit.k_max,
            "n_used": fit.n_used,
            "per_seed_slopes": [float(s) for s in experiment.per_seed_slopes],
            "width": args.width,
            "points": args.points,
            "fourier_i": args.fourier_i,
            "seeds": len(seeds),
        })

    if args.dynamics:
        dyn = ntk.convex_dynamics_experiment(
            width=args.dynamics_width, n_points=args.dynamics_points,
            lr=args.lr, compare_steps=args.steps, seed=args.seed,
        )
        worst = float(np.max(np.abs(np.log(dyn.decay_ratio))))
        print(f"convex-case dynamics: worst decay ratio factor {np.exp(worst):.3f} "
              f"over {args.steps} steps; parameter drift {dyn.param_drift:.4f}, "
              f"kernel drift {dyn.gram_drift:.4f}")
        if out is not None:
            artifacts.write_table(out / "dynamics.csv",
                                  ["step", "measured_norm", "predicted_norm",
                                   "measured_decay", "predicted_decay"],
                                  [dyn.times, dyn.measured_norm, dyn.predicted_norm,
                                   dyn.measured_decay, dyn.predicted_decay])
            artifacts.write_fit_report(out / "dynamics.json", {
                "param_drift": dyn.param_drift,
                "gram_drift": dyn.gram_drift,
                "worst_decay_factor": float(np.exp(worst)),
                "n_modes": dyn.n_modes,
            })
    return 0


def parse_eps(text: str) -> float:
    """Parse eps given as a float or an exact fraction like 0.1/16."""
    text = str(text).strip()
    if "/" in text:
        num, den = text.split("/", maxsplit=1)
        return float(num) / float(den)
    return float(text)


_SPEC_FIELDS = [f.name for f in dataclasses.fields(RunSpec)]


def _spec_from_args(args: argparse.Namespace) -> RunSpec:
    values = dataclasses.asdict(RunSpec())
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise SpecValidationError(f"unknown preset {args.preset!r}")
        values.update(PRESETS[args.preset])
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecValidationError(f"cannot read config file {args.config}: {exc}") from exc
        unknown = sorted(set(loaded) - set(_SPEC_FIELDS))
        if unknown:
            raise SpecValidationError(f"unknown config fields: {unknown}")
        values.update(loaded)
    for name in _SPEC_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if getattr(args, "no_fourier", False):
        values["fourier_i"] = None
    return RunSpec(**values)


def _add_spec_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--problem", choices=PROBLEM_IDS)
    sp.add_argument("--layers", type=int, help="number of hidden layers")
    sp.add_argument("--width", type=int)
    sp.add_argument("--activation", choices=ACTIVATIONS)
    sp.add_argument("--rho", type=float, help="smoothsqrt smoothing parameter")
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--fourier-i", type=int, dest="fourier_i",
                       help="frequency exponent i of the sinusoid features")
    group.add_argument("--no-fourier", action="store_true", help="disable the feature map")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--lr", type=float, dest="lr0")
    sp.add_argument("--lambda", type=float, dest="lam", help="boundary penalty weight")
    sp.add_argument("--eps", type=parse_eps, help="regularization eps (accepts fractions like 0.1/16)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--sampling", choices=("auto", "resample", "fixed"))
    sp.add_argument("--out")
    sp.add_argument("--preset", help="named preset; flags override its fields")
    sp.add_argument("--config", help="JSON file of RunSpec fields; flags override")
    sp.add_argument("--force", action="store_true", help="allow writing into an existing directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ritzff",
        description="Minimize non-convex variational energies with deep networks "
                    "and analyze the induced kernel spectra.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="train one configuration and export its artifacts")
    _add_spec_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("sweep", help="train a grid of configurations along one axis")
    _add_spec_flags(sp)
    sp.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    sp.add_argument("--values", required=True, help="comma-separated axis values")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("ntk", help="kernel spectra, decay fits, self tests, dynamics checks")
    sp.add_argument("--self-test", choices=("constant", "brownian"))
    sp.add_argument("--n-values", default="128,256,512", help="grid sizes for the self tests")
    sp.add_argument("--k-show", type=int, default=4, help="eigenvalues to print per grid size")
    sp.add_argument("--width", type=int, default=512)
    sp.add_argument("--points", type=int, default=256)
    sp.add_argument("--layers", type=int, default=1)
    sp.add_argument("--activation", choices=ACTIVATIONS, default="relu")
    sp.add_argument("--fourier-i", type=int, dest="fourier_i", default=0)
    sp.add_argument("--seeds", type=int, default=8, help="number of init seeds to average")
    sp.add_argument("--k-min", type=int, default=4)
    sp.add_argument("--k-max", type=int, default=64)
    sp.add_argument("--dynamics", action="store_true",
                    help="also run the convex-case gradient-dynamics comparison")
    sp.add_argument("--dynamics-width", type=int, default=1024)
    sp.add_argument("--dynamics-points", type=int, default=64)
    sp.add_argument("--lr", type=float, default=1e-4)
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_ntk)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpecValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RitzffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
