"""Bit-stable CSV and JSON export of plans and trajectories.

CSV floats use 17 significant digits. JSON floats use Python's shortest
round-trip representation, which re-imports to the identical double.
Non-finite values are written as ``nan``/``inf`` strings in CSV and as
``null`` in JSON.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, fields, is_dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .planner.compose import ComposedTrajectory
from .planner.gait import GaitSpec, PeriodicGait, Phase, SagittalTransition
from .planner.lateral import LateralTransition, P2Orbit
from .rom.params import RomParams, SpringLaw

COMPOSED_COLUMNS = ["t", "x", "y", "z", "xdot", "ydot", "zdot", "F_ref_L", "F_ref_R"]
FORMAT_VERSION = 1


class ExportError(OSError):
    pass


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_csv(path, header, rows) -> Path:
    return write_text(path, csv_text(header, rows))


# -- JSON -------------------------------------------------------------------------

def _plain(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj) if f.name != "report"}
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _report(rep):
    if rep is None:
        return None
    return {"status": rep.status, "iterations": int(rep.iterations), "kkt_residual": _plain(rep.kkt_residual),
            "objective": _plain(rep.objective), "message": rep.message}


def _phase_doc(ph: Phase):
    return {"domain": ph.domain, "t": _plain(ph.t), "X": _plain(ph.X), "Ldd": _plain(ph.Ldd),
            "u": _plain(ph.u), "feet": _plain(ph.feet)}


def _phase(doc) -> Phase:
    return Phase(doc["domain"], np.array(doc["t"], float), np.array(doc["X"], float),
                 np.array(doc["Ldd"], float), np.array(doc["u"], float), np.array(doc["feet"], float))


def _params_doc(p: RomParams, law: SpringLaw):
    return {"rom": asdict(p), "spring": _plain(asdict(law))}


def _params(doc):
    law = doc["spring"]
    return (RomParams(**doc["rom"]),
            SpringLaw(tuple(law["stiffness_coeffs"]), tuple(law["damping_coeffs"]), law["mass_ratio"]))


def to_document(artifact) -> dict:
    """JSON-ready dictionary of a plan artifact."""
    if isinstance(artifact, PeriodicGait):
        return {"kind": "periodic_gait", "version": FORMAT_VERSION, "spec": _plain(asdict(artifact.spec)),
                **_params_doc(artifact.params, artifact.law), "ssp": _phase_doc(artifact.ssp),
                "dsp": _phase_doc(artifact.dsp), "report": _report(artifact.report)}
    if isinstance(artifact, SagittalTransition):
        return {"kind": "sagittal_transition", "version": FORMAT_VERSION,
                **_params_doc(artifact.params, artifact.law), "dsp": _phase_doc(artifact.dsp),
                "ssp": _phase_doc(artifact.ssp), "report": _report(artifact.report)}
    if isinstance(artifact, P2Orbit):
        return {"kind": "p2_orbit", "version": FORMAT_VERSION, "sigma2": artifact.sigma2, "y0": artifact.y0,
                "yd0": artifact.yd0, "w": artifact.w, "T_SSP": artifact.T_SSP, "T_DSP": artifact.T_DSP,
                "rom": asdict(artifact.params), "return_error": _plain(artifact.return_error)}
    if isinstance(artifact, LateralTransition):
        return {"kind": "lateral_transition", "version": FORMAT_VERSION, "t": _plain(artifact.t),
                "Y": _plain(artifact.Y), "u_L": _plain(artifact.u_L), "u_R": _plain(artifact.u_R),
                "F_L": _plain(artifact.F_L), "F_R": _plain(artifact.F_R), "domains": list(artifact.domains),
                "A": _plain(artifact.A), "B": _plain(artifact.B), "rom": asdict(artifact.params),
                "method": artifact.method, "stance_foot_y": artifact.stance_foot_y,
                "report": _report(artifact.report)}
    if isinstance(artifact, dict):
        return _plain(artifact)
    raise TypeError(f"cannot export {type(artifact).__name__} as JSON")


def from_document(doc):
    kind = doc.get("kind")
    if kind == "periodic_gait":
        p, law = _params(doc)
        return PeriodicGait(GaitSpec(**doc["spec"]), p, law, _phase(doc["ssp"]), _phase(doc["dsp"]))
    if kind == "sagittal_transition":
        p, law = _params(doc)
        return SagittalTransition(p, law, _phase(doc["dsp"]), _phase(doc["ssp"]))
    if kind == "p2_orbit":
        err = doc.get("return_error")
        return P2Orbit(doc["sigma2"], doc["y0"], doc["yd0"], doc["w"], doc["T_SSP"], doc["T_DSP"],
                       RomParams(**doc["rom"]), float("nan") if err is None else err)
    if kind == "lateral_transition":
        return LateralTransition(np.array(doc["t"]), np.array(doc["Y"]), np.array(doc["u_L"]),
                                 np.array(doc["u_R"]), np.array(doc["F_L"]), np.array(doc["F_R"]),
                                 tuple(doc["domains"]), tuple(np.array(a) for a in doc["A"]),
                                 tuple(np.array(b) for b in doc["B"]), RomParams(**doc["rom"]),
                                 doc["method"], None, doc["stance_foot_y"])
    raise ValueError(f"unknown document kind {kind!r}")


def json_text(artifact) -> str:
    return json.dumps(to_document(artifact), indent=1, sort_keys=True, allow_nan=False) + "\n"


def export_json(artifact, path) -> Path:
    return write_text(path, json_text(artifact))


def import_json(path):
    try:
        with open(path) as fh:
            return from_document(json.load(fh))
    except OSError as exc:
        raise ExportError(f"cannot read {path}: {exc.strerror or exc}") from exc


# -- CSV views --------------------------------------------------------------------

def composed_rows(traj: ComposedTrajectory):
    for k in range(traj.t.size):
        yield [traj.t[k], *traj.pos[k], *traj.vel[k], traj.F_L[k], traj.F_R[k]]


def phase_rows(phases, law):
    """Rows t, domain, x, z, xdot, zdot, then the normal force per leg."""
    for ph in phases:
        p, v, F = ph.com(), ph.com_velocity(), ph.normal_forces(law)
        for i in range(ph.t.size):
            f = list(F[i]) + [""] * (2 - F.shape[1])
            yield [ph.t[i], ph.domain, p[i, 0], p[i, 1], v[i, 0], v[i, 1], *f]


PHASE_COLUMNS = ["t", "domain", "x", "z", "xdot", "zdot", "F_leg1", "F_leg2"]


def export_csv(artifact, path) -> Path:
    """CSV view of an artifact.

    Composed trajectories use ``COMPOSED_COLUMNS``. Sagittal plans list
    their node data per phase. Orbits are sampled every 5 ms. An empty
    composed trajectory gives a header-only file.
    """
    if isinstance(artifact, ComposedTrajectory):
        return write_csv(path, COMPOSED_COLUMNS, composed_rows(artifact))
    if isinstance(artifact, (PeriodicGait, SagittalTransition)):
        return write_csv(path, PHASE_COLUMNS, phase_rows(artifact.phases, artifact.law))
    if isinstance(artifact, P2Orbit):
        t, y, yd = artifact.sample()
        return write_csv(path, ["t", "y", "ydot"], zip(t, y, yd))
    if isinstance(artifact, LateralTransition):
        return write_csv(path, ["t", "y", "ydot", "u_L", "u_R", "F_L", "F_R"],
                         ([artifact.t[k], *artifact.Y[k], artifact.u_L[k], artifact.u_R[k],
                           artifact.F_L[k], artifact.F_R[k]] for k in range(artifact.N)))
    raise TypeError(f"cannot export {type(artifact).__name__} as CSV")


def export(artifact, fmt_name: str, path) -> Path:
    if fmt_name == "json":
        return export_json(artifact, path)
    if fmt_name == "csv":
        return export_csv(artifact, path)
    raise ValueError(f"unknown export format {fmt_name!r}")
