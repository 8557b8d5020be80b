"""Serialisation of walk logs, events and metrics.

Floats are written with ``repr`` (shortest round-tripping form) and JSON
keys are sorted, so identical runs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

from ..automaton import TransitionEvent, WalkLog
from ..planner import to_local

SCHEMA_VERSION = 1
TRAJECTORY_COLUMNS = ("t", "zeta", "mode", "x", "y", "z", "xd", "yd", "zd", "omega",
                      "tau_x", "tau_y", "tau_z", "sigma", "foot_x", "foot_y", "foot_z")
FILES = {
    "trajectory": "trajectory.csv",
    "events": "events.json",
    "metrics": "metrics.json",
    "sagittal": "portrait_sagittal.csv",
    "lateral": "portrait_lateral.csv",
    "sigma": "portrait_sigma.csv",
}


def load_schema(name: str) -> dict:
    """Bundled JSON schema: ``events``, ``metrics``, ``trajectory`` or ``policy``."""
    text = resources.files("phasewalk").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def _f(v) -> str:
    return repr(float(v))


def _clean(obj):
    """JSON-ready copy: numpy scalars/arrays to Python, non-finite to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, doc: dict) -> Path:
    try:
        path.write_text(json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _writer(path: Path):
    try:
        fh = open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return fh, csv.writer(fh, lineterminator="\n")


def write_trajectory(log: WalkLog, path: Path) -> Path:
    A = log.arrays()
    fh, w = _writer(path)
    with fh:
        w.writerow(TRAJECTORY_COLUMNS)
        for k in range(A["t"].shape[0]):
            s, c = A["states"][k], A["controls"][k]
            w.writerow([_f(A["t"][k]), _f(A["zeta"][k]), A["mode"][k],
                        *(_f(v) for v in s), *(_f(v) for v in c[:4]), _f(A["sigma"][k]),
                        *(_f(v) for v in c[4:])])
    return path


def write_portraits(log: WalkLog, out: Path) -> dict:
    """Phase-portrait data in each step's own frame (sagittal s, lateral l)."""
    A = log.arrays()
    plans = {p.index: p for p in log.plans}
    paths = {k: out / FILES[k] for k in ("sagittal", "lateral", "sigma")}
    fs, ws = _writer(paths["sagittal"])
    fl, wl = _writer(paths["lateral"])
    fz, wz = _writer(paths["sigma"])
    with fs, fl, fz:
        ws.writerow(("step", "x", "xd"))
        wl.writerow(("step", "y", "yd"))
        wz.writerow(("step", "zeta", "sigma"))
        for k in range(A["t"].shape[0]):
            q = int(A["step"][k])
            p = plans.get(q)
            st = A["states"][k]
            th = p.heading if p is not None else 0.0
            s, l_ = to_local(th, st[:2])
            sd, ld = to_local(th, st[3:5])
            ws.writerow((q, _f(s), _f(sd)))
            wl.writerow((q, _f(l_), _f(ld)))
            wz.writerow((q, _f(A["zeta"][k]), _f(A["sigma"][k])))
    return paths


def write_events(events, path: Path) -> Path:
    return write_json(path, {"schema_version": SCHEMA_VERSION,
                             "events": [e.to_dict() for e in events]})


def load_events(path) -> list:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported events schema {doc.get('schema_version')}")
    return [TransitionEvent.from_dict(d) for d in doc["events"]]


def emit_outputs(log: WalkLog | None, metrics, out_dir) -> dict:
    """Write every output of a run into ``out_dir``.

    A run without a log (planning failed) writes only the metrics file,
    which then carries the failure cause.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    m = metrics.to_dict() if hasattr(metrics, "to_dict") else dict(metrics)
    m["schema_version"] = SCHEMA_VERSION
    if log is not None and log.t:
        paths["trajectory"] = write_trajectory(log, out / FILES["trajectory"])
        paths["events"] = write_events(log.events, out / FILES["events"])
        paths.update(write_portraits(log, out))
    paths["metrics"] = write_json(out / FILES["metrics"], m)
    return paths
