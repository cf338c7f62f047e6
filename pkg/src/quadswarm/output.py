"""CSV and SVG emission for trajectory logs.

The CSV layout is one row per control tick: ``t`` followed, for every agent
``i`` (1-based), by position, velocity, commanded acceleration and attitude.
Values are written with 9 significant digits and LF line endings so that
identical logs always serialize to identical bytes.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .engine import TrajectoryLog
from .errors import EmptyLogError

FIELDS = ("pX", "pY", "pZ", "vX", "vY", "vZ", "aX", "aY", "aZ", "roll", "pitch", "yaw")
NUMBER_FORMAT = "%.9g"
CSV_NAME = "trajectory.csv"
META_NAME = "run_meta.json"


def csv_header(n_agents: int) -> list[str]:
    cols = ["t"]
    for i in range(1, n_agents + 1):
        cols.extend(f"{name}_{i}" for name in FIELDS)
    return cols


def log_table(log: TrajectoryLog) -> np.ndarray:
    """The log flattened to the CSV column order, shape ``(ticks, 1 + 12 n)``."""
    per_agent = np.concatenate([log.positions, log.velocities, log.commands, log.attitudes], axis=2)
    return np.column_stack([log.times, per_agent.reshape(len(log), -1)])


def write_csv(log: TrajectoryLog, path) -> Path:
    path = Path(path)
    table = log_table(log)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(csv_header(log.n_agents)) + "\n")
        for row in table:
            fh.write(",".join(NUMBER_FORMAT % x for x in row) + "\n")
    return path


def write_metadata(log: TrajectoryLog, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(log.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_csv(path) -> TrajectoryLog:
    """Parse a CSV written by :func:`write_csv` back into a log."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "t" or (len(header) - 1) % len(FIELDS):
            raise ValueError(f"{path}: not a trajectory CSV (bad header)")
        n = (len(header) - 1) // len(FIELDS)
        if header != csv_header(n):
            raise ValueError(f"{path}: unexpected column names")
        rows = [line for line in fh if line.strip()]
    table = np.array([[float(x) for x in line.split(",")] for line in rows]).reshape(len(rows), 1 + 12 * n)
    blocks = table[:, 1:].reshape(len(rows), n, 12)
    meta = {}
    meta_path = path.with_name(META_NAME)
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    return TrajectoryLog(table[:, 0], blocks[:, :, 0:3].copy(), blocks[:, :, 3:6].copy(),
                         blocks[:, :, 6:9].copy(), blocks[:, :, 9:12].copy(), meta)


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "quadswarm"
    return plt


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def _series_plot(plt, log: TrajectoryLog, data: np.ndarray, axis: int, ylabel: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for i in range(log.n_agents):
        ax.plot(log.times, data[:, i, axis], label=f"agent {i + 1}", lw=1.2)
    ax.set_xlabel("time (s)")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
    return path


def emit_plots(log: TrajectoryLog, out_dir, *, position: bool = True, velocity: bool = False) -> list[Path]:
    """Write the enabled SVG plots into ``out_dir`` and return their paths.

    Position flags give ``position_x``, ``position_y`` and the x-y
    ``trajectory_xy`` plot; the velocity flag adds ``velocity_x`` and
    ``velocity_y``. An empty log raises before any file is opened.
    """
    if len(log) == 0 or log.n_agents == 0:
        raise EmptyLogError("cannot plot an empty trajectory log")
    out_dir = Path(out_dir)
    plt = _pyplot()
    written = []
    if position:
        written.append(_series_plot(plt, log, log.positions, 0, "x position (m)", out_dir / "position_x.svg"))
        written.append(_series_plot(plt, log, log.positions, 1, "y position (m)", out_dir / "position_y.svg"))
        fig, ax = plt.subplots(figsize=(6, 6))
        for i in range(log.n_agents):
            line, = ax.plot(log.positions[:, i, 0], log.positions[:, i, 1], label=f"agent {i + 1}", lw=1.2)
            ax.plot(log.positions[0, i, 0], log.positions[0, i, 1], "o", color=line.get_color(), ms=4)
            ax.plot(log.positions[-1, i, 0], log.positions[-1, i, 1], "x", color=line.get_color(), ms=6)
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_aspect("equal", adjustable="datalim")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        path = out_dir / "trajectory_xy.svg"
        _save(fig, path)
        plt.close(fig)
        written.append(path)
    if velocity:
        written.append(_series_plot(plt, log, log.velocities, 0, "x velocity (m/s)", out_dir / "velocity_x.svg"))
        written.append(_series_plot(plt, log, log.velocities, 1, "y velocity (m/s)", out_dir / "velocity_y.svg"))
    return written


def plot_from_csv(csv_path, out_dir=None, *, velocity: bool = True) -> list[Path]:
    log = read_csv(csv_path)
    out_dir = Path(out_dir) if out_dir is not None else Path(csv_path).parent
    os.makedirs(out_dir, exist_ok=True)
    return emit_plots(log, out_dir, position=True, velocity=velocity)
