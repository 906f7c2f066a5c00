"""Experiment reports, reduction statistics and log-log rate regression.

Reports are deterministic: numeric reduction uses exact summation
(``math.fsum``), JSON is emitted with sorted keys, CSV cells with ``repr``
floats.  Re-running with the same config and seed reproduces the bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import stats as sps

from .version import __version__

__all__ = [
    "ExperimentReport",
    "RateFit",
    "mean_se",
    "rate_regression",
    "regression_selftest",
]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def mean_se(values):
    """Sample mean and standard error with order-independent summation."""
    values = [float(v) for v in values]
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(values) / n
    if n == 1:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass(frozen=True)
class RateFit:
    """OLS fit of log(error) against log(x): error ~ C x^slope."""

    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


def rate_regression(x, errors) -> RateFit:
    """Fit a convergence rate on log-log axes with a 95% slope interval.

    Needs at least 3 grid points and strictly positive values on both axes.
    """
    x = np.asarray(x, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if x.size < 3 or errors.size != x.size:
        raise ValueError("rate_regression needs >= 3 matched (x, error) points")
    if np.any(x <= 0.0) or np.any(errors <= 0.0):
        raise ValueError("rate_regression needs positive grid and error values")
    lx = np.log(x)
    ly = np.log(errors)
    n = lx.size
    mx = lx.mean()
    my = ly.mean()
    sxx = float(np.sum((lx - mx) ** 2))
    if sxx == 0.0:
        raise ValueError("grid values are all equal")
    slope = float(np.sum((lx - mx) * (ly - my)) / sxx)
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    dof = n - 2
    s2 = float(np.sum(resid**2)) / dof if dof > 0 else 0.0
    stderr = math.sqrt(s2 / sxx)
    tq = float(sps.t.ppf(0.975, dof)) if dof > 0 else math.inf
    return RateFit(
        slope=slope,
        intercept=float(intercept),
        stderr=stderr,
        ci_low=slope - tq * stderr,
        ci_high=slope + tq * stderr,
    )


def regression_selftest() -> None:
    """Confirm the rate fitter recovers planted slopes; run before experiment batches."""
    eps = np.array([0.4, 0.2, 0.1, 0.05])
    fit = rate_regression(eps, eps**2)
    if abs(fit.slope - 2.0) > 1e-9:
        raise AssertionError(f"planted slope 2 recovered as {fit.slope}")
    fit = rate_regression(eps, np.ones_like(eps))
    if abs(fit.slope) > 1e-12:
        raise AssertionError(f"planted slope 0 recovered as {fit.slope}")
    rng = np.random.Generator(np.random.Philox(12345))
    noisy = eps**0.25 * np.exp(0.05 * rng.standard_normal(eps.size))
    fit = rate_regression(eps, noisy)
    if abs(fit.slope - 0.25) > 0.1:
        raise AssertionError(f"planted slope 0.25 recovered as {fit.slope}")


@dataclass
class ExperimentReport:
    """Monte Carlo experiment summary: grid, per-cell statistics, fitted rates.

    ``cells`` is one flat dict per grid cell (means, standard errors,
    censoring fractions); ``slopes`` is one dict per fitted rate; ``passed``
    aggregates the experiment's declared thresholds.
    """

    experiment: str
    config: dict
    grid: dict
    cells: list
    slopes: list
    passed: bool
    notes: list = dc_field(default_factory=list)
    version: str = __version__

    def to_json(self) -> str:
        payload = {
            "experiment": self.experiment,
            "version": self.version,
            "config": _jsonable(self.config),
            "grid": _jsonable(self.grid),
            "cells": _jsonable(self.cells),
            "slopes": _jsonable(self.slopes),
            "pass": bool(self.passed),
            "notes": list(self.notes),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        """Plot-ready flat table, one row per grid cell; config in '#' comments."""
        buf = io.StringIO()
        buf.write(f"# experiment: {self.experiment}\n")
        buf.write(f"# version: {self.version}\n")
        buf.write("# config: " + json.dumps(_jsonable(self.config), sort_keys=True) + "\n")
        columns = sorted({key for cell in self.cells for key in cell})
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for cell in self.cells:
            writer.writerow([_format_csv(cell.get(col)) for col in columns])
        return buf.getvalue()

    def write(self, outdir, render=True) -> list:
        """Write report.json and cells.csv (and a figure) under ``outdir``."""
        from pathlib import Path

        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = []
        json_path = outdir / f"{self.experiment}_report.json"
        json_path.write_text(self.to_json(), encoding="utf-8")
        paths.append(json_path)
        csv_path = outdir / f"{self.experiment}_cells.csv"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        paths.append(csv_path)
        if render:
            from . import figures

            fig_path = outdir / f"{self.experiment}_report.png"
            figures.render_experiment(self, fig_path)
            paths.append(fig_path)
        return paths


def _format_csv(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)
