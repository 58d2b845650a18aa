"""Deterministic SVG rendering of the logged CSV artifacts.

Two schemas are understood: the per-episode training log (return and
final-frequency panels) and substep trajectories (frequency traces with
the 59.9 Hz reference line). Output is plain SVG so renders are
byte-stable for identical inputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .trainer import LOG_COLUMNS


class PlotError(ValueError):
    """The CSV is empty or does not match a known schema."""


def _read_csv(path: str) -> tuple[list[str], np.ndarray]:
    with open(path) as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines:
        raise PlotError(f"{path} is empty")
    columns = lines[0].split(",")
    if len(lines) == 1:
        raise PlotError(f"{path} has a header but no data rows")
    try:
        data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    except ValueError as exc:
        raise PlotError(f"{path} has non-numeric data rows: {exc}") from exc
    if data.shape[1] != len(columns):
        raise PlotError(f"{path} rows do not match the {len(columns)}-column header")
    return columns, data


def _deterministic_figure():
    plt.rcParams["svg.hashsalt"] = "qdrl"
    plt.rcParams["svg.fonttype"] = "path"
    return plt.subplots


def _save(fig, out_path: str) -> None:
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _render_training_log(columns: list[str], data: np.ndarray, out_path: str) -> None:
    idx = {name: i for i, name in enumerate(columns)}
    episodes = data[:, idx["episode"]]
    subplots = _deterministic_figure()
    fig, (ax_ret, ax_freq) = subplots(2, 1, figsize=(7, 6), sharex=True)
    ax_ret.plot(episodes, data[:, idx["return"]], color="#1f77b4", label="episode return")
    ax_ret.set_ylabel("return")
    ax_ret.legend(loc="lower right")
    ax_ret.grid(True, alpha=0.3)
    ax_freq.plot(
        episodes, data[:, idx["freq_final_hz"]], color="#d62728", label="final frequency"
    )
    ax_freq.plot(
        episodes, data[:, idx["freq_min_hz"]], color="#ff9896", label="episode minimum"
    )
    ax_freq.axhline(60.0, color="gray", linewidth=0.8, linestyle=":")
    ax_freq.axhline(59.9, color="gray", linewidth=0.8, linestyle="--", label="59.9 Hz floor")
    ax_freq.set_xlabel("episode")
    ax_freq.set_ylabel("frequency (Hz)")
    ax_freq.legend(loc="lower right")
    ax_freq.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, out_path)


def _render_trajectory(columns: list[str], data: np.ndarray, out_path: str) -> None:
    idx = {name: i for i, name in enumerate(columns)}
    time_s = data[:, idx["time_s"]]
    freq_cols = [c for c in columns if c.startswith("f") and c.endswith("_hz")]
    subplots = _deterministic_figure()
    fig, ax = subplots(figsize=(7, 4))
    for name in freq_cols:
        ax.plot(time_s, data[:, idx[name]], label=name.replace("_hz", ""))
    ax.axhline(60.0, color="gray", linewidth=0.8, linestyle=":")
    ax.axhline(59.9, color="gray", linewidth=0.8, linestyle="--", label="59.9 Hz floor")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (Hz)")
    ax.legend(loc="lower right", ncol=2, fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, out_path)


def plot_csv(csv_path: str, out_path: str) -> None:
    """Render a known CSV schema to SVG; raise PlotError otherwise."""
    columns, data = _read_csv(csv_path)
    if columns == list(LOG_COLUMNS):
        _render_training_log(columns, data, out_path)
        return
    if columns[0] == "time_s" and any(c.startswith("f") and c.endswith("_hz") for c in columns):
        _render_trajectory(columns, data, out_path)
        return
    raise PlotError(
        "unknown CSV schema; expected the training log columns "
        f"({','.join(LOG_COLUMNS)}) or a trajectory starting with time_s,f1_hz,…"
    )
