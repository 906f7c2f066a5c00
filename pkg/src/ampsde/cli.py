"""Command-line front end.

Subcommands::

    ampsde coeffs     [--config C] [--out DIR] [--seed S]
    ampsde simulate   [--config C] [--out DIR] [--seed S]
    ampsde experiment {coupled|weak|qv|stabilization|averaging}
                      [--config C] [--out DIR] [--seed S] [--workers W]
    ampsde selftest

Without ``--config`` the calibrated default configuration of the selected
command is used.  Every output file embeds the resolved configuration and
the package version; identical (config, seed) runs produce byte-identical
outputs regardless of the worker count.  Exit codes: 0 success, 1 usage or
configuration error, 2 experiment threshold failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import figures
from .amplitude import simulate_amplitude
from .coefficients import coefficient_report, compute_coefficients
from .config import EXPERIMENTS, ConfigError, RunConfig, default_config, run_experiment
from .core import SpectralField
from .noise import NoiseStream, ou_step, ou_stationary_sample
from .report import _jsonable
from .selftest import run_selftest
from .solver import simulate_full
from .version import __version__

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ampsde",
        description="amplitude-equation toolkit for slow/fast spectral models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, default=None, help="YAML config path")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override (u64)")
        p.add_argument("--workers", type=int, default=1, help="parallel worker count")

    add_common(sub.add_parser("coeffs", help="compute amplitude-equation coefficients"))
    add_common(sub.add_parser("simulate", help="simulate one path of the configured target"))
    exp = sub.add_parser("experiment", help="run a verification experiment")
    exp.add_argument("name", choices=EXPERIMENTS)
    add_common(exp)
    sub.add_parser("selftest", help="run the built-in example checks")
    return parser


def _load_config(args, fallback: str) -> RunConfig:
    if args.config is not None:
        config = RunConfig.load(args.config)
    else:
        config = default_config(fallback)
    data = config.as_dict()
    if args.seed is not None:
        if not (0 <= args.seed < 2**64):
            raise ConfigError("run.seed: must be an unsigned 64-bit integer")
        data["run"]["seed"] = args.seed
    if args.out is not None:
        data["output"]["directory"] = str(args.out)
    return RunConfig.from_dict(data)


def _csv_header(config: RunConfig) -> str:
    return (
        f"# version: {__version__}\n"
        "# config: " + json.dumps(_jsonable(config.as_dict()), sort_keys=True) + "\n"
    )


def _outdir(config: RunConfig) -> Path:
    out = Path(config.output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_coeffs(args) -> int:
    config = _load_config(args, "coeffs")
    out = _outdir(config)
    values = coefficient_report(config.build_spec(), config.build_tensor())
    payload = {
        "version": __version__,
        "config": _jsonable(config.as_dict()),
        **{k: _jsonable(v) for k, v in values.items()},
    }
    (out / "coefficients.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    lines = [_csv_header(config) + "name,value"]
    lines += [f"{k},{v!r}" for k, v in sorted(values.items())]
    (out / "coefficients.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    figures.render_coefficients(values, out / "coefficients.png", config.as_dict())
    print(f"wrote {out / 'coefficients.json'}")
    return 0


def _simulate_spde(config: RunConfig, out: Path) -> None:
    run = config.run
    eps = config.eps_ladder()[0]
    h = config.resolve_h()
    spec = config.build_spec()
    v0 = np.zeros(spec.n_modes)
    v0[0] = run["x0"]
    record = simulate_full(
        spec, config.build_tensor(), eps, run["t_final"], h, SpectralField(v0),
        NoiseStream(run["seed"], 0), kappa=run["kappa"],
        record_every=run["record_every"], snapshots=run["snapshots"],
    )
    rows = ["t,X,norm_fast,norm_residual_vs_ou"]
    for i in range(record.times.size):
        rows.append(
            f"{record.times[i]!r},{record.X[i]!r},{record.fast_norm[i]!r},"
            f"{record.ou_residual_norm[i]!r}"
        )
    (out / "spde_path.csv").write_text(
        _csv_header(config) + "\n".join(rows) + "\n", encoding="utf-8"
    )
    if run["snapshots"]:
        for name, snaps in (("spde_snapshots.csv", record.v_snapshots),
                            ("ou_reference_snapshots.csv", record.z_snapshots)):
            body = "\n".join(",".join(repr(v) for v in row) for row in snaps)
            (out / name).write_text(_csv_header(config) + body + "\n", encoding="utf-8")
    figures.render_spde_path(record, out / "spde_path.png", config.as_dict())


def _simulate_ou(config: RunConfig, out: Path) -> None:
    run = config.run
    eps = config.eps_ladder()[0]
    h = config.resolve_h()
    spec = config.build_spec()
    stream = NoiseStream(run["seed"], 0)
    state = ou_stationary_sample(spec, eps, stream)
    steps = int(round(run["t_final"] / h))
    rows = ["t,mode,value"]
    times, norm_series = [0.0], [float(np.linalg.norm(state.z.coeffs))]
    for k in range(1, spec.n_modes + 1):
        rows.append(f"{0.0!r},{k},{state.z.coeffs[k - 1]!r}")
    for i in range(steps):
        state = ou_step(state, h, spec, stream)
        if (i + 1) % run["record_every"] == 0 or i == steps - 1:
            for k in range(1, spec.n_modes + 1):
                rows.append(f"{state.t!r},{k},{state.z.coeffs[k - 1]!r}")
            times.append(state.t)
            norm_series.append(float(np.linalg.norm(state.z.coeffs)))
    (out / "ou_path.csv").write_text(
        _csv_header(config) + "\n".join(rows) + "\n", encoding="utf-8"
    )
    figures.render_scalar_path(times, norm_series, "fast-mode norm", out / "ou_path.png", config.as_dict())


def _simulate_amplitude(config: RunConfig, out: Path) -> None:
    run = config.run
    coeffs = compute_coefficients(config.build_spec(), config.build_tensor())
    h = run.get("amp_h", 1e-3)
    path = simulate_amplitude(
        coeffs, run["x0"], run["t_final"], h, NoiseStream(run["seed"], 0),
        record_every=run["record_every"],
    )
    rows = ["t,a"] + [f"{path.times[i]!r},{path.a[i]!r}" for i in range(path.times.size)]
    (out / "amplitude_path.csv").write_text(
        _csv_header(config) + "\n".join(rows) + "\n", encoding="utf-8"
    )
    figures.render_scalar_path(path.times, path.a, "amplitude a", out / "amplitude_path.png", config.as_dict())


def cmd_simulate(args) -> int:
    config = _load_config(args, "simulate")
    out = _outdir(config)
    target = config.run["target"]
    if target == "spde":
        _simulate_spde(config, out)
    elif target == "ou":
        _simulate_ou(config, out)
    else:
        _simulate_amplitude(config, out)
    print(f"wrote {target} path files under {out}")
    return 0


def cmd_experiment(args) -> int:
    config = _load_config(args, args.name)
    if config.run.get("experiment") != args.name:
        data = config.as_dict()
        data["run"]["experiment"] = args.name
        config = RunConfig.from_dict(data)
    report = run_experiment(config, workers=max(1, args.workers))
    paths = report.write(_outdir(config))
    for path in paths:
        print(f"wrote {path}")
    print(f"experiment {args.name}: {'pass' if report.passed else 'FAIL'}")
    return 0 if report.passed else 2


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return 0 if exc.code == 0 else 1
    try:
        if args.command == "coeffs":
            return cmd_coeffs(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "experiment":
            return cmd_experiment(args)
        if args.command == "selftest":
            return 0 if run_selftest() else 1
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
