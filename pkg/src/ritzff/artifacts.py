"""Readers and writers for every file the CLI emits.

Tables are comma-separated with a single header line; floats carry 17
significant digits so round-trips are exact in double precision. Structured
records (manifest, transition and energy reports, fit reports) are JSON.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .diagnostics import EnergyReport, FieldGrid, TransitionReport
from .training import RunManifest


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_table(path: str | Path, header: list[str], columns: list[np.ndarray]) -> None:
    if len(header) != len(columns):
        raise ValueError("one header entry per column required")
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValueError("all columns must have equal length")
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(_fmt(c[i]) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Returns (header, data) with data shaped (n_rows, n_cols), float64."""
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    if data.size and data.shape[1] != len(header):
        raise ValueError(f"malformed table {path}")
    return header, data


def write_loss_history(path: str | Path, history: dict) -> None:
    write_table(path, ["epoch", "loss"], [history["epoch"], history["loss"]])


def read_loss_history(path: str | Path) -> dict:
    header, data = read_table(path)
    if header != ["epoch", "loss"]:
        raise ValueError(f"unexpected loss-history header {header}")
    return {"epoch": data[:, 0].astype(np.int64), "loss": data[:, 1]}


def write_fields(path: str | Path, grid: FieldGrid) -> None:
    if grid.dimension == 1:
        header = ["x", "u", "u_x"]
        columns = [grid.points[:, 0], grid.u, grid.du[:, 0]]
    else:
        header = ["x", "y", "u", "u_x", "u_y"]
        columns = [grid.points[:, 0], grid.points[:, 1], grid.u, grid.du[:, 0], grid.du[:, 1]]
    if grid.u_yy is not None:
        header.append("u_yy")
        columns.append(grid.u_yy)
    write_table(path, header, columns)


def read_fields(path: str | Path) -> tuple[list[str], np.ndarray]:
    header, data = read_table(path)
    if header[0] != "x" or "u" not in header:
        raise ValueError(f"unexpected fields header {header}")
    return header, data


def write_spectrum(path: str | Path, eigenvalues: np.ndarray) -> None:
    ks = np.arange(1, len(eigenvalues) + 1)
    write_table(path, ["k", "lambda_k"], [ks, np.asarray(eigenvalues)])


def read_spectrum(path: str | Path) -> np.ndarray:
    header, data = read_table(path)
    if header != ["k", "lambda_k"]:
        raise ValueError(f"unexpected spectrum header {header}")
    return data[:, 1]


def _write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_manifest(path: str | Path, manifest: RunManifest) -> None:
    _write_json(path, manifest.to_dict())


def read_manifest(path: str | Path) -> RunManifest:
    return RunManifest.from_dict(_read_json(path))


def write_transition_report(path: str | Path, report: TransitionReport) -> None:
    _write_json(path, {
        "count": report.count,
        "states": report.states,
        "unclassified_fraction": report.unclassified_fraction,
        "threshold": report.threshold,
    })


def read_transition_report(path: str | Path) -> TransitionReport:
    d = _read_json(path)
    return TransitionReport(d["count"], list(d["states"]), d["unclassified_fraction"], d["threshold"])


def write_energy_report(path: str | Path, report: EnergyReport) -> None:
    _write_json(path, {
        "grid_energy": report.grid_energy,
        "mc_energy": report.mc_energy,
        "mc_standard_error": report.mc_standard_error,
        "boundary_penalty": report.boundary_penalty,
        "resolution": report.resolution,
        "mc_samples": report.mc_samples,
    })


def read_energy_report(path: str | Path) -> EnergyReport:
    d = _read_json(path)
    return EnergyReport(d["grid_energy"], d["mc_energy"], d["mc_standard_error"],
                        d["boundary_penalty"], d["resolution"], d["mc_samples"])


def write_fit_report(path: str | Path, payload: dict) -> None:
    _write_json(path, payload)


def read_fit_report(path: str | Path) -> dict:
    return _read_json(path)
