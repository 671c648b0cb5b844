"""History files, run summaries, key=value configs and surface export."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict

import numpy as np

from .flow import FlowState, Record
from .mesh import Mesh
from .morley import MorleySpace

HISTORY_HEADER = ("iter", "E_pot", "E_ki", "E_total", "D_g_1", "D_g_2", "eta", "restarted")
SURFACE_FORMATS = ("vtk-legacy", "obj")


def _fmt(x):
    return repr(int(x)) if isinstance(x, (int, np.integer)) else f"{float(x):.17g}"


def write_history(path, history: list[Record]):
    """One row per iterate, including iterate 0; floats carry 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(HISTORY_HEADER) + "\n")
        for rec in history:
            fh.write(",".join(_fmt(v) for v in rec.as_row()) + "\n")


def read_history(path) -> list[Record]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != HISTORY_HEADER:
            raise ValueError(f"unexpected history header {header}")
        out = []
        for row in reader:
            out.append(Record(int(row[0]), *map(float, row[1:7]), bool(int(row[7]))))
        return out


def summarize(state: FlowState) -> dict:
    last = state.final
    return {
        "N": last.iter,
        "E_pot": last.E_pot,
        "E_ki": last.E_ki,
        "E_total": last.E_total,
        "D_g_1": last.D_g_1,
        "D_g_2": last.D_g_2,
        "restarts": state.restarts,
        "converged": state.converged,
        "wall_time": state.wall_time,
    }


def summary_line(summary: dict) -> str:
    return (
        f"N={summary['N']} E_pot={summary['E_pot']:.10g} E_ki={summary['E_ki']:.4e} "
        f"D_g_1={summary['D_g_1']:.4e} D_g_2={summary['D_g_2']:.4e} restarts={summary['restarts']} "
        f"converged={'yes' if summary['converged'] else 'no'} time={summary['wall_time']:.2f}s"
    )


def write_summary(path, config: dict, state: FlowState, snapshots=()):
    data = {"config": config, "summary": summarize(state), "snapshots": list(snapshots)}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- config files ------------------------------------------------------------


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; keys mirror CLI flags (dashes or underscores), '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def write_config(path, values: dict):
    with open(path, "w") as fh:
        for key in sorted(values):
            fh.write(f"{key} = {values[key]}\n")


# -- surfaces ----------------------------------------------------------------


def surface_points(space: MorleySpace, y) -> np.ndarray:
    """Deformed vertex positions; vertex DOFs are point values, so this is exact."""
    return space.vertex_values(y)


def export_surface(mesh: Mesh, points: np.ndarray, path, fmt="vtk-legacy"):
    """Write the deformed triangulation as legacy ASCII VTK or Wavefront OBJ."""
    if fmt not in SURFACE_FORMATS:
        raise ValueError(f"format must be one of {SURFACE_FORMATS}, got {fmt!r}")
    points = np.asarray(points, dtype=float)
    if points.shape != (mesh.n_vertices, 3):
        raise ValueError(f"expected ({mesh.n_vertices}, 3) points, got {points.shape}")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if fmt == "vtk-legacy":
        mesh.write_vtk(path, points, title="plateflow surface")
        return
    with open(path, "w") as fh:
        fh.write("# plateflow surface\n")
        for x, y, z in points:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.elements + 1:
            fh.write(f"f {a} {b} {c}\n")


def read_obj_vertices(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([[float(t) for t in line.split()[1:4]] for line in fh if line.startswith("v ")])
