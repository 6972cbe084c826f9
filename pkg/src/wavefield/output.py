"""Field tables, reports, plots and the manifest tying them together.

Layout of an output directory::

    scenario.cfg          the scenario that produced the run (if given)
    fields_0000.csv ...   one table per snapshot, header TABLE_HEADER
    report.json           identity entries keyed by tag, notes, tables
    plot_<f>_<i>.svg      optional line plots
    manifest.json         every file above with its kind and snapshot time

Numbers are written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import OutputError, UnwrapGuardError
from .fields import LABELS, all_fields, frequency_field
from .grid import WaveFunction
from .verify import RunHistory, VerificationReport

COLUMNS = ("x",) + LABELS + ("mask",)
TABLE_HEADER = ",".join(COLUMNS)
_FMT = "%.17g"


def _omega(h: RunHistory, i: int):
    if i == 0 or i == len(h) - 1:
        return None
    try:
        return frequency_field(h.phase(i - 1), h.phase(i + 1), h.dt_out)
    except UnwrapGuardError:
        return None


def snapshot_table(h: RunHistory, i: int) -> np.ndarray:
    """Columns of COLUMNS for snapshot ``i`` as an (n_points, 12) array."""
    cols = all_fields(h.states[i], h.potential, h.mask_threshold, h.deriv, omega=_omega(h, i))
    return np.column_stack([h.grid.x] + [np.asarray(cols[c], dtype=float) for c in COLUMNS[1:]])


def write_field_table(path, table: np.ndarray):
    lines = [TABLE_HEADER]
    for row in table:
        cells = [_FMT % v for v in row[:-1]] + [str(int(row[-1]))]
        lines.append(",".join(cells))
    _write_text(path, "\n".join(lines) + "\n")


def read_field_table(path) -> dict:
    """Column name -> float array (``mask`` as bool)."""
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            header = fh.readline().strip()
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise OutputError(f"cannot read field table ({exc.strerror})", path) from exc
    if header != TABLE_HEADER:
        raise OutputError(f"unexpected header {header!r}", path)
    out = {c: data[:, j] for j, c in enumerate(COLUMNS)}
    out["mask"] = out["mask"].astype(bool)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_document(report: VerificationReport) -> str:
    return json.dumps(_jsonable(report.to_dict()), indent=2, sort_keys=False) + "\n"


def _write_text(path, text: str):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write ({exc.strerror})", path) from exc


def plot_field(table: dict, field: str, path, title: str = ""):
    """Line plot of one column against x, written as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "wavefield", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        y = np.where(table["mask"] & (field not in ("w", "mask")), np.nan, table[field])
        ax.plot(table["x"], y, lw=1.2)
        ax.set_xlabel("x")
        ax.set_ylabel(field)
        if title:
            ax.set_title(title)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OutputError(f"cannot write plot ({exc.strerror})", path) from exc
        finally:
            plt.close(fig)


def write_outputs(h: RunHistory, report: VerificationReport, directory, plots=(), scenario_text: str | None = None,
                  plot_snapshots=None) -> list[dict]:
    """Write tables, report, plots and manifest; return the manifest entries.

    ``plots`` selects field columns; each is drawn at the first and last
    snapshot unless ``plot_snapshots`` lists other indices.
    """
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory ({exc.strerror})", d) from exc
    if not os.access(d, os.W_OK):
        raise OutputError("output directory is not writable", d)
    entries = []
    if scenario_text is not None:
        _write_text(d / "scenario.cfg", scenario_text)
        entries.append({"path": "scenario.cfg", "kind": "scenario"})
    tables = {}
    for i, psi in enumerate(h.states):
        name = f"fields_{i:04d}.csv"
        tables[i] = snapshot_table(h, i)
        write_field_table(d / name, tables[i])
        entries.append({"path": name, "kind": "field_table", "index": i, "time": float(psi.time)})
    _write_text(d / "report.json", report_document(report))
    entries.append({"path": "report.json", "kind": "report"})
    if plots:
        idx = plot_snapshots if plot_snapshots is not None else sorted({0, len(h) - 1})
        for i in idx:
            cols = {c: tables[i][:, j] for j, c in enumerate(COLUMNS)}
            cols["mask"] = cols["mask"].astype(bool)
            for f in plots:
                name = f"plot_{f}_{i:04d}.svg"
                plot_field(cols, f, d / name, title=f"{f} at t = {h.states[i].time:.6g}")
                entries.append({"path": name, "kind": "plot", "field": f, "index": i,
                                "time": float(h.states[i].time)})
    g = h.grid
    manifest = {
        "grid": {"x_min": g.x_min, "x_max": g.x_max, "n_points": g.n_points, "hbar": g.hbar, "mass": g.mass},
        "scheme": h.config.scheme,
        "deriv": h.deriv,
        "mask_threshold": h.mask_threshold,
        "files": entries,
    }
    _write_text(d / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return entries + [{"path": "manifest.json", "kind": "manifest"}]


def history_from_outputs(directory) -> RunHistory:
    """Rebuild a RunHistory from the tables of a written run.

    psi is reconstructed as sqrt(w) exp(i phi); the potential and scheme come
    from the stored scenario.
    """
    from .scenario import load_scenario
    from .potentials import eval_potential

    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    except OSError as exc:
        raise OutputError(f"cannot read manifest ({exc.strerror})", d / "manifest.json") from exc
    s = load_scenario(d / "scenario.cfg")
    grid = s.grid.build()
    v = eval_potential(s.potential.spec(), grid)
    states = []
    for e in sorted((e for e in manifest["files"] if e["kind"] == "field_table"), key=lambda e: e["index"]):
        t = read_field_table(d / e["path"])
        states.append(WaveFunction(grid, np.sqrt(t["w"]) * np.exp(1j * t["phi"]), e["time"]))
    return RunHistory(states, v, s.prop.config(), manifest["mask_threshold"], manifest["deriv"])
