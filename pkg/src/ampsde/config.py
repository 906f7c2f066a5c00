"""Run configuration: a single YAML file with nested key/value sections.

Sections: ``model`` (spectrum and nonlinearity), ``noise`` (forcing),
``run`` (experiment geometry and Monte Carlo sizes), ``output``.  Unknown
sections or keys are errors, as are out-of-range values; error messages name
the offending field.  Parsing, serializing and re-parsing is the identity on
all fields.

Noise conventions for the built-in Burgers model: ``single_mode`` puts
amplitude sigma on the plain sine mode sin(mode x) (so q_mode = sigma in the
unnormalized basis), ``white`` puts q_k = sigma on every orthonormal fast
mode (space-time white forcing).  For custom models the amplitudes are taken
as given in the model's own basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .core import ModelSpec
from .tensor import BilinearTensor, burgers_tensor, tensor_from_text

__all__ = ["ConfigError", "RunConfig", "default_config", "run_experiment",
           "spec_sections", "EXPERIMENTS", "TARGETS"]

EXPERIMENTS = ("coupled", "weak", "qv", "stabilization", "averaging")
TARGETS = ("spde", "ou", "amplitude")
H_RULES = ("eps2_over_8",)

_SINE_SCALE = math.sqrt(math.pi / 2.0)  # norm of sin(kx) on [0, pi]


class ConfigError(ValueError):
    pass


def _check(cond, field_name, message):
    if not cond:
        raise ConfigError(f"{field_name}: {message}")


_MODEL_KEYS = {"kind", "normalized", "n", "alpha", "nu", "tensor_path", "eigenvalues"}
_NOISE_KEYS = {"kind", "sigma", "mode", "q"}
_RUN_KEYS = {
    "experiment", "target", "eps", "t_final", "h", "batch", "seed", "kappa",
    "x0", "record_every", "probe_times", "amp_batch", "amp_h", "sigma_sq",
    "spde_sigma_sq", "spde_batch", "a0", "indices", "snapshots",
}
_OUTPUT_KEYS = {"directory"}

_RUN_DEFAULTS = {
    "target": "spde",
    "h": "eps2_over_8",
    "kappa": 3.0,
    "x0": 1.0,
    "record_every": 10,
    "snapshots": False,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; sections are plain dicts with resolved defaults."""

    model: dict
    noise: dict
    run: dict
    output: dict = field(default_factory=lambda: {"directory": "out"})

    def __post_init__(self):
        _validate(self.model, self.noise, self.run, self.output)

    def as_dict(self) -> dict:
        return {
            "model": dict(self.model),
            "noise": dict(self.noise),
            "run": dict(self.run),
            "output": dict(self.output),
        }

    # -- serialization ------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping of sections")
        unknown = set(data) - {"model", "noise", "run", "output"}
        _check(not unknown, "config", f"unknown sections {sorted(unknown)}")
        for section in ("model", "noise", "run"):
            _check(section in data, section, "section is required")
        merged_run = {**_RUN_DEFAULTS, **data["run"]}
        return cls(
            model=dict(data["model"]),
            noise=dict(data["noise"]),
            run=merged_run,
            output=dict(data.get("output", {"directory": "out"})),
        )

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls.from_dict(yaml.safe_load(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def dumps(self) -> str:
        return yaml.safe_dump(self.as_dict(), sort_keys=True)

    def dump(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    # -- resolution ---------------------------------------------------------

    def eps_ladder(self):
        return [float(e) for e in self.run["eps"]]

    def resolve_h(self) -> float:
        """Absolute step size; the eps^2-relative rule binds at the smallest rung."""
        h = self.run["h"]
        if isinstance(h, str):
            h = min(self.eps_ladder()) ** 2 / 8.0
        h = float(h)
        for eps in self.eps_ladder():
            _check(h <= eps**2 / 4.0, "run.h", f"h = {h} violates h <= eps^2/4 at eps = {eps}")
        return h

    def build_spec(self) -> ModelSpec:
        model = self.model
        n = model["n"]
        if model["kind"] == "burgers":
            lam = np.arange(1, n + 1, dtype=float) ** 2 - 1.0
        else:
            lam = np.asarray(model["eigenvalues"], dtype=float)
        q = np.zeros(n)
        noise = self.noise
        sine = model["kind"] == "burgers"
        normalized = model.get("normalized", False)
        if noise["kind"] == "single_mode":
            sigma = noise["sigma"]
            scale = (_SINE_SCALE if normalized else 1.0) if sine else 1.0
            q[noise["mode"] - 1] = sigma * scale
        elif noise["kind"] == "white":
            sigma = noise["sigma"]
            scale = (1.0 if normalized else math.sqrt(2.0 / math.pi)) if sine else 1.0
            q[1:] = sigma * scale
        else:
            q[:] = np.asarray(noise["q"], dtype=float)
        return ModelSpec(
            eigenvalues=lam, noise_amplitudes=q, nu=float(model["nu"]),
            alpha=float(model.get("alpha", 0.0)),
        )

    def build_tensor(self) -> BilinearTensor:
        model = self.model
        if model["kind"] == "burgers":
            return burgers_tensor(model["n"], normalized=model.get("normalized", False))
        text = Path(model["tensor_path"]).read_text(encoding="utf-8")
        return tensor_from_text(text, model["n"])


def _validate(model, noise, run, output):
    unknown = set(model) - _MODEL_KEYS
    _check(not unknown, "model", f"unknown keys {sorted(unknown)}")
    _check(model.get("kind") in ("burgers", "custom"), "model.kind", "must be 'burgers' or 'custom'")
    n = model.get("n")
    _check(isinstance(n, int) and n >= 2, "model.n", "must be an integer >= 2")
    alpha = model.get("alpha", 0.0)
    _check(isinstance(alpha, (int, float)) and 0.0 <= alpha < 2.0, "model.alpha", "must lie in [0, 2)")
    _check(isinstance(model.get("nu"), (int, float)), "model.nu", "must be a number")
    _check(isinstance(model.get("normalized", False), bool), "model.normalized", "must be a boolean")
    if model["kind"] == "custom":
        _check("tensor_path" in model, "model.tensor_path", "required for custom models")
        eig = model.get("eigenvalues")
        _check(
            isinstance(eig, list) and len(eig) == n,
            "model.eigenvalues", f"custom models need a list of {n} eigenvalues",
        )

    unknown = set(noise) - _NOISE_KEYS
    _check(not unknown, "noise", f"unknown keys {sorted(unknown)}")
    kind = noise.get("kind")
    _check(kind in ("single_mode", "white", "custom"), "noise.kind",
           "must be 'single_mode', 'white' or 'custom'")
    if kind in ("single_mode", "white"):
        sigma = noise.get("sigma")
        _check(isinstance(sigma, (int, float)) and sigma >= 0.0, "noise.sigma",
               "must be a nonnegative number")
    if kind == "single_mode":
        mode = noise.get("mode", 2)
        _check(isinstance(mode, int) and 2 <= mode <= n, "noise.mode",
               f"must be a fast-mode index in [2, {n}]")
    if kind == "custom":
        q = noise.get("q")
        _check(isinstance(q, list) and len(q) == n, "noise.q", f"must list {n} amplitudes")
        _check(q[0] == 0.0, "noise.q", "the slow mode must be unforced (q_1 = 0)")
        _check(all(float(v) >= 0.0 for v in q), "noise.q", "amplitudes must be nonnegative")

    unknown = set(run) - _RUN_KEYS
    _check(not unknown, "run", f"unknown keys {sorted(unknown)}")
    if "experiment" in run:
        _check(run["experiment"] in EXPERIMENTS, "run.experiment",
               f"must be one of {EXPERIMENTS}")
    _check(run.get("target", "spde") in TARGETS, "run.target", f"must be one of {TARGETS}")
    eps = run.get("eps")
    _check(isinstance(eps, list) and len(eps) >= 1, "run.eps", "must be a nonempty list")
    _check(all(isinstance(e, (int, float)) and e > 0.0 for e in eps), "run.eps",
           "values must be positive")
    _check(len(set(map(float, eps))) == len(eps), "run.eps", "values must be distinct")
    _check(isinstance(run.get("t_final"), (int, float)) and run["t_final"] > 0.0,
           "run.t_final", "must be a positive number")
    h = run.get("h", "eps2_over_8")
    if isinstance(h, str):
        _check(h in H_RULES, "run.h", f"rule must be one of {H_RULES} or a positive number")
    else:
        _check(isinstance(h, (int, float)) and h > 0.0, "run.h", "must be positive")
    _check(isinstance(run.get("batch"), int) and run["batch"] >= 1, "run.batch",
           "must be a positive integer")
    _check(isinstance(run.get("seed"), int) and 0 <= run["seed"] < 2**64, "run.seed",
           "must be an unsigned 64-bit integer")
    _check(isinstance(run.get("kappa", 3.0), (int, float)) and run.get("kappa", 3.0) > 0.0,
           "run.kappa", "must be positive")
    _check(isinstance(run.get("record_every", 10), int) and run.get("record_every", 10) >= 1,
           "run.record_every", "must be a positive integer")
    for key in ("x0", "a0", "amp_h"):
        if key in run:
            _check(isinstance(run[key], (int, float)), f"run.{key}", "must be a number")
    for key in ("amp_batch", "spde_batch"):
        if key in run:
            _check(isinstance(run[key], int) and run[key] >= 1, f"run.{key}",
                   "must be a positive integer")
    if "probe_times" in run:
        _check(
            isinstance(run["probe_times"], list)
            and all(isinstance(t, (int, float)) and 0.0 <= t <= run["t_final"]
                    for t in run["probe_times"]),
            "run.probe_times", "must be a list of times in [0, t_final]",
        )
    for key in ("sigma_sq", "spde_sigma_sq"):
        if key in run:
            _check(
                isinstance(run[key], list)
                and all(isinstance(v, (int, float)) and v >= 0.0 for v in run[key]),
                f"run.{key}", "must be a list of nonnegative numbers",
            )
    if "indices" in run:
        idx = run["indices"]
        _check(
            isinstance(idx, list) and len(idx) == 3
            and all(isinstance(i, int) and 2 <= i <= n for i in idx),
            "run.indices", f"must be three fast-mode indices in [2, {n}]",
        )
    _check(isinstance(run.get("snapshots", False), bool), "run.snapshots", "must be a boolean")

    unknown = set(output) - _OUTPUT_KEYS
    _check(not unknown, "output", f"unknown keys {sorted(unknown)}")
    _check(isinstance(output.get("directory", "out"), str), "output.directory",
           "must be a path string")


def spec_sections(spec: ModelSpec, tensor_path: str = "tensor.txt") -> dict:
    """Express a ModelSpec as the config's ``model`` and ``noise`` sections.

    Uses the custom kinds, so amplitudes and eigenvalues round-trip as given;
    together with :func:`ampsde.tensor.tensor_to_text` this serializes a full
    model to the CLI format.
    """
    return {
        "model": {
            "kind": "custom",
            "n": spec.n_modes,
            "alpha": float(spec.alpha),
            "nu": float(spec.nu),
            "eigenvalues": [float(v) for v in spec.eigenvalues],
            "tensor_path": tensor_path,
        },
        "noise": {"kind": "custom", "q": [float(v) for v in spec.noise_amplitudes]},
    }


def default_config(experiment: str, out_dir: str = "out") -> RunConfig:
    """Calibrated default configuration for each experiment family."""
    base_model = {"kind": "burgers", "normalized": False, "n": 32, "alpha": 0.0, "nu": 1.0}
    if experiment == "coupled":
        noise = {"kind": "single_mode", "sigma": 1.0, "mode": 2}
        run = {"experiment": "coupled", "eps": [0.4, 0.2, 0.1], "t_final": 1.0,
               "batch": 256, "seed": 2026}
    elif experiment == "weak":
        noise = {"kind": "white", "sigma": 1.0}
        run = {"experiment": "weak", "eps": [0.4, 0.2, 0.1], "t_final": 1.0,
               "batch": 1024, "amp_batch": 32768, "amp_h": 0.001,
               "probe_times": [1.0], "seed": 2026}
    elif experiment == "qv":
        noise = {"kind": "white", "sigma": 1.0}
        run = {"experiment": "qv", "eps": [0.4, 0.2, 0.1], "t_final": 1.0,
               "batch": 384, "seed": 2026}
    elif experiment == "stabilization":
        noise = {"kind": "single_mode", "sigma": 1.0, "mode": 2}
        run = {"experiment": "stabilization", "eps": [0.1], "t_final": 10.0,
               "batch": 512, "spde_batch": 64, "sigma_sq": [44.0, 88.0, 132.0, 176.0],
               "spde_sigma_sq": [44.0, 176.0], "a0": 1e-8, "amp_h": 5e-4,
               "seed": 2026}
    elif experiment == "averaging":
        base_model = {"kind": "burgers", "normalized": True, "n": 8, "alpha": 0.0, "nu": 0.0}
        noise = {"kind": "white", "sigma": 1.0}
        run = {"experiment": "averaging", "eps": [0.4, 0.2, 0.1], "t_final": 1.0,
               "batch": 1500, "indices": [2, 3, 4], "seed": 2026}
    elif experiment == "simulate":
        base_model = {"kind": "burgers", "normalized": False, "n": 64, "alpha": 0.0, "nu": 1.0}
        noise = {"kind": "single_mode", "sigma": 1.0, "mode": 2}
        run = {"eps": [0.2], "t_final": 1.0, "batch": 1, "seed": 2026}
    elif experiment == "coeffs":
        base_model = {"kind": "burgers", "normalized": False, "n": 64, "alpha": 0.0, "nu": 1.0}
        noise = {"kind": "single_mode", "sigma": 1.0, "mode": 2}
        run = {"eps": [0.1], "t_final": 1.0, "batch": 1, "seed": 2026}
    else:
        raise ConfigError(f"no default configuration for {experiment!r}")
    return RunConfig.from_dict(
        {"model": base_model, "noise": noise, "run": run,
         "output": {"directory": out_dir}}
    )


def run_experiment(config: RunConfig, workers: int = 1):
    """Dispatch a validated config to its experiment; returns the report."""
    from . import harness
    from .noise import averaging_statistics as run_averaging

    run = config.run
    name = run.get("experiment")
    if name is None:
        raise ConfigError("run.experiment: required for the experiment command")
    echo = config.as_dict()
    if name == "averaging":
        h = run["h"]
        return run_averaging(
            config.build_spec(), config.eps_ladder(), run["t_final"], run["seed"],
            run["batch"], indices=tuple(run.get("indices", [2, 3, 4])),
            h=None if isinstance(h, str) else float(h),
            workers=workers, config_echo=echo,
        )
    if name == "coupled":
        if config.noise["kind"] != "single_mode" or config.model["kind"] != "burgers":
            raise ConfigError(
                "run.experiment: coupled requires the single-mode Burgers configuration"
            )
        return harness.coupled_error_experiment(
            config.eps_ladder(), config.noise["sigma"], config.model["nu"],
            run["t_final"], run["batch"], n_modes=config.model["n"],
            seed=run["seed"], kappa=run["kappa"], h=config.resolve_h(),
            x0=run["x0"], record_every=run["record_every"], workers=workers,
            config_echo=echo,
        )
    if name == "weak":
        return harness.weak_error_experiment(
            config.eps_ladder(), config.build_spec(), config.build_tensor(),
            run["t_final"], run["batch"],
            probe_times=run.get("probe_times", [run["t_final"]]),
            amp_batch=run.get("amp_batch", 1 << 15), amp_h=run.get("amp_h", 1e-3),
            seed=run["seed"], kappa=run["kappa"], h=config.resolve_h(),
            x0=run["x0"], workers=workers, config_echo=echo,
        )
    if name == "qv":
        return harness.qv_discrepancy_experiment(
            config.eps_ladder(), config.build_spec(), config.build_tensor(),
            run["t_final"], run["batch"], seed=run["seed"], kappa=run["kappa"],
            h=config.resolve_h(), x0=run["x0"],
            record_every=run["record_every"], workers=workers, config_echo=echo,
        )
    if name == "stabilization":
        if config.noise["kind"] != "single_mode" or config.model["kind"] != "burgers":
            raise ConfigError(
                "run.experiment: stabilization requires the single-mode Burgers configuration"
            )
        eps = config.eps_ladder()[0]
        h = run["h"]
        return harness.stabilization_experiment(
            run["sigma_sq"], config.model["nu"], eps, run["t_final"], run["batch"],
            spde_sigma_sq=run.get("spde_sigma_sq", [min(run["sigma_sq"]), max(run["sigma_sq"])]),
            spde_batch_size=run.get("spde_batch", 64), n_modes=config.model["n"],
            a0=run.get("a0", 1e-8), amp_h=run.get("amp_h", 5e-4), seed=run["seed"],
            kappa=run["kappa"], h=None if isinstance(h, str) else float(h),
            workers=workers, config_echo=echo,
        )
    raise ConfigError(f"run.experiment: unknown experiment {name!r}")
