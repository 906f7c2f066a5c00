"""Figure rendering for the report path.

Every report writer drops a PNG next to its delimited output: log-log decay
panels for the ladder experiments, exponent-versus-forcing panels for the
stabilization study, simple path panels for single simulations.  Rendering
is deterministic (fixed backend, size, dpi; no timestamps in the metadata).
"""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .version import __version__

__all__ = ["render_experiment", "render_coefficients", "render_spde_path",
           "render_scalar_path"]


def _save(fig, path, config):
    # the resolved config and version ride along as PNG text chunks, like the
    # comment header of the delimited outputs
    metadata = {"Software": f"ampsde {__version__}"}
    if config is not None:
        from .report import _jsonable

        metadata["Description"] = json.dumps(_jsonable(config), sort_keys=True)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata=metadata)
    plt.close(fig)


def _loglog_panel(ax, eps, series, slopes):
    for label, values in series.items():
        if min(values) <= 0:
            continue
        ax.loglog(eps, values, "o-", label=label)
    for entry in slopes:
        if entry.get("slope") is None or entry["name"] not in series:
            continue
        values = series[entry["name"]]
        if min(values) <= 0:
            continue
        ref = np.array([min(eps), max(eps)])
        anchor = values[int(np.argmax(eps))]
        ax.loglog(ref, anchor * (ref / max(eps)) ** entry["slope"], "k--", alpha=0.4)
    ax.set_xlabel("eps")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)


def render_experiment(report, path) -> None:
    """Dispatch on the experiment name; writes a PNG at ``path``."""
    cells = report.cells
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if report.experiment == "stabilization":
        s2 = [c["sigma_sq"] for c in cells]
        ax.plot(s2, [c["predicted"] for c in cells], "k-", label="predicted")
        ax.errorbar(
            s2, [c["amp_exponent_mean"] for c in cells],
            yerr=[2 * c["amp_exponent_se"] for c in cells], fmt="o", label="amplitude path",
        )
        spde = [(c["sigma_sq"], c["spde_exponent_mean"], c["spde_exponent_se"])
                for c in cells if "spde_exponent_mean" in c]
        if spde:
            xs, ys, es = zip(*spde)
            ax.errorbar(xs, ys, yerr=[2 * e for e in es], fmt="s", label="full system")
        ax.axhline(0.0, color="grey", lw=0.8)
        ax.set_xlabel("sigma^2")
        ax.set_ylabel("top exponent")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
    elif report.experiment == "averaging":
        eps = [c["eps"] for c in cells]
        series = {
            "mode_integral": [c["sq1_mean"] for c in cells],
            "centered_pair_integral": [c["sq2_mean"] for c in cells],
            "triple_integral": [c["sq3_mean"] for c in cells],
        }
        _loglog_panel(ax, eps, series, report.slopes)
        ax.set_ylabel("mean squared integral")
    elif report.experiment == "weak":
        eps = [c["eps"] for c in cells]
        gap_keys = sorted(k for k in cells[0] if k.endswith("_gap"))
        series = {k: [c[k] for c in cells] for k in gap_keys}
        _loglog_panel(ax, eps, series, report.slopes)
        ax.set_ylabel("moment discrepancy")
    else:  # coupled / qv ladders
        eps = [c["eps"] for c in cells]
        mean_keys = sorted(
            k for k in cells[0] if k.endswith("_mean") and not k.startswith("n_")
        )
        series = {k.removesuffix("_mean"): [c[k] for c in cells] for k in mean_keys}
        _loglog_panel(ax, eps, series, report.slopes)
        ax.set_ylabel("mean sup error")
    ax.set_title(f"{report.experiment} (pass={report.passed})", fontsize=10)
    _save(fig, path, report.config)


def render_coefficients(values: dict, path, config: dict = None) -> None:
    """Bar panel of the headline amplitude-equation coefficients."""
    names = ["nu_tilde", "nu_strat", "eta_tilde", "sigma_a", "sigma_b"]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.bar(range(len(names)), [values[n] for n in names])
    ax.set_xticks(range(len(names)), names, rotation=30, fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    ax.set_title("amplitude equation coefficients", fontsize=10)
    _save(fig, path, config)


def render_spde_path(record, path, config: dict = None) -> None:
    fig, axes = plt.subplots(2, 1, figsize=(6.4, 5.2), sharex=True)
    axes[0].plot(record.times, record.X, lw=0.9)
    axes[0].set_ylabel("slow amplitude X")
    axes[0].grid(alpha=0.3)
    axes[1].plot(record.times, record.fast_norm, lw=0.9, label="fast norm")
    axes[1].plot(record.times, record.ou_residual_norm, lw=0.9, label="gap to linear reference")
    axes[1].set_xlabel("slow time")
    axes[1].legend(fontsize=8)
    axes[1].grid(alpha=0.3)
    _save(fig, path, config)


def render_scalar_path(times, values, ylabel, path, config: dict = None) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(times, values, lw=0.9)
    ax.set_xlabel("time")
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    _save(fig, path, config)
