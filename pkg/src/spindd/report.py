"""Figure rendering for experiment presets.

Only this module imports matplotlib; the computational core stays
plot-free.  ``render_report`` runs the configured experiment, writes the
delimited tables, and draws one PNG next to them.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .config import ExperimentConfig
from .runner import ResultTable, analytic_table, emit, scan_table, simulate_table


def _by_protocol(table: ResultTable):
    groups = {}
    for row in table.rows:
        groups.setdefault(row[5], []).append(row)
    return groups


def _plot_fidelity(ax, mc: ResultTable, ideal: ResultTable, vs_pulses: bool):
    x_col = 6 if vs_pulses else 0
    for label, rows in _by_protocol(ideal).items():
        xs = [r[x_col] for r in rows]
        ax.plot(xs, [r[1] for r in rows], "--", lw=1.0, alpha=0.7, label=f"{label} (ideal, analytic)")
    for label, rows in _by_protocol(mc).items():
        xs = [r[x_col] for r in rows]
        ax.errorbar(xs, [r[1] for r in rows], yerr=[r[2] for r in rows],
                    fmt="o", ms=3, capsize=2, label=f"{label} S_X")
        if any(abs(r[3] - r[1]) > 3.0 * (r[2] + r[4]) for r in rows):
            ax.errorbar(xs, [r[3] for r in rows], yerr=[r[4] for r in rows],
                        fmt="s", ms=3, capsize=2, alpha=0.8, label=f"{label} S_Y")
    ax.set_xlabel("pulse count N_p" if vs_pulses else "total duration T [us]")
    ax.set_ylabel("fidelity")
    ax.set_ylim(-0.05, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)


def _plot_scan(ax, table: ResultTable):
    for label, rows in _by_protocol_scan(table).items():
        ax.plot([r[1] for r in rows], [r[2] for r in rows], "o-", ms=4, label=label)
    ax.set_xlabel("pulse count N_p")
    ax.set_ylabel("T_1/e [us]")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)


def _by_protocol_scan(table: ResultTable):
    groups = {}
    for row in table.rows:
        groups.setdefault(row[0], []).append(row)
    return groups


def render_report(cfg: ExperimentConfig, out_dir: str, name: str, threads: int = 1) -> list:
    """Run the experiment, write CSV table(s) and a PNG; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    if cfg.scan is not None:
        table = scan_table(cfg)
        csv_path = os.path.join(out_dir, f"{name}.csv")
        with open(csv_path, "wb") as fh:
            fh.write(emit(table, "csv"))
        paths.append(csv_path)
        _plot_scan(ax, table)
    else:
        mc = simulate_table(cfg, threads=threads)
        ideal = analytic_table(cfg)
        for suffix, table in (("", mc), ("_analytic", ideal)):
            path = os.path.join(out_dir, f"{name}{suffix}.csv")
            with open(path, "wb") as fh:
                fh.write(emit(table, "csv"))
            paths.append(path)
        _plot_fidelity(ax, mc, ideal, vs_pulses=bool(cfg.grid and cfg.grid.cycles))
    ax.set_title(name)
    fig.tight_layout()
    png_path = os.path.join(out_dir, f"{name}.png")
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    paths.append(png_path)
    return paths
