"""Tracking-error figures from telemetry CSVs.

Every figure is written next to a CSV holding exactly the plotted series, so
the numbers behind a plot can be diffed or re-plotted elsewhere.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 3.6),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


def read_telemetry(path: str | Path) -> dict[str, np.ndarray]:
    """Load a telemetry CSV into ``{column: array}``; the vehicle column stays text."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty telemetry file") from None
        rows = list(reader)
    if "t" not in header:
        raise ValueError(f"{path}: missing 't' column")
    cols = list(zip(*rows)) if rows else [()] * len(header)
    out = {}
    for name, values in zip(header, cols):
        if name == "vehicle":
            out[name] = np.array(values, dtype=object)
        else:
            out[name] = np.array(values, dtype=float)
    return out


def tracking_error(tel: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    if "err_norm" not in tel or np.all(np.isnan(tel["err_norm"])):
        raise ValueError("telemetry has no reference, so there is no tracking error to plot")
    return {k: tel[k] for k in ("t", "err_x", "err_y", "err_z", "err_norm")}


def plot_tracking_error(telemetry: str | Path | list, out: str | Path) -> tuple[Path, Path]:
    """Plot position tracking error against time for one or more vehicles.

    ``out`` is the figure path (format from its suffix, e.g. ``.svg`` or
    ``.png``); the plotted series land in ``out`` with a ``.csv`` suffix, in
    long format with a ``vehicle`` column.
    """
    paths = [telemetry] if isinstance(telemetry, (str, Path)) else list(telemetry)
    out = Path(out)
    if out.suffix.lower() == ".csv":
        raise ValueError("figure path must not be .csv; the data file takes that name")
    out.parent.mkdir(parents=True, exist_ok=True)
    data_path = out.with_suffix(".csv")

    with plt.rc_context(STYLE):
        fig, (ax_n, ax_c) = plt.subplots(2, 1, sharex=True, figsize=(7.0, 5.0))
        with open(data_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["vehicle", "t", "err_x", "err_y", "err_z", "err_norm"])
            for p in paths:
                tel = read_telemetry(p)
                err = tracking_error(tel)
                name = tel["vehicle"][0] if len(tel["vehicle"]) else Path(p).stem
                for row in zip(*err.values()):
                    w.writerow([name, *(format(float(v), ".17g") for v in row)])
                (line,) = ax_n.plot(err["t"], err["err_norm"], lw=1.2, label=name)
                for axis, ls in zip("xyz", ("-", "--", ":")):
                    ax_c.plot(err["t"], err[f"err_{axis}"], lw=0.9, ls=ls, color=line.get_color(),
                              label=f"{name} {axis}")
        ax_n.set_ylabel("|p - p_ref| [m]")
        ax_n.legend(loc="upper right")
        ax_c.set_ylabel("error [m]")
        ax_c.set_xlabel("time [s]")
        ax_c.legend(loc="upper right", ncol=3, fontsize=7)
        fig.suptitle("Position tracking error")
        fig.savefig(out)
        plt.close(fig)
    return out, data_path


def plot_run(out_dir: str | Path, fmt: str = "svg") -> list[Path]:
    """Render the standard figures for a finished run directory."""
    out_dir = Path(out_dir)
    csvs = sorted(p for p in out_dir.glob("*.csv") if not p.stem.startswith("tracking_error"))
    with_ref = []
    for p in csvs:
        try:
            tracking_error(read_telemetry(p))
        except ValueError:
            continue
        with_ref.append(p)
    if not with_ref:
        return []
    fig, data = plot_tracking_error(with_ref, out_dir / f"tracking_error.{fmt}")
    return [fig, data]
