"""Plan, compose and simulate stages driven by one TOML configuration.

Stages and their dependencies::

    gait        periodic aSLIP gait
    orbit       lateral P2 orbit
    transition  standing -> walking (needs gait)
    compose     3D reference (needs gait, orbit, transition)
    simulate    closed-loop biped (needs compose)

Every stage writes its artifacts into the output directory and the run
ends with ``manifest.json`` listing exactly the files written.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .biped import BipedModel, WalkingReference, model_from_dict, standing_posture
from .clfqp.core import ControllerConfig, ControllerFailure
from .clfqp.embed import LOG_COLUMNS, simulate_embedding
from .io import export_csv, export_json, write_csv, write_text
from .planner import (
    GaitSpec,
    PlanningError,
    audit_periodic,
    audit_transition,
    identify_p2_orbit,
    plan_periodic_aslip,
    plan_transition_aslip,
    plan_transition_hlip,
    standing_state,
)
from .planner.compose import (
    SagittalTrack,
    chain_lateral,
    compose_3d,
    lateral_transition_track,
    p2_track,
    periodic_pieces,
    transition_pieces,
)
from .rom.aslip import DSP, SSP
from .rom.params import RomParams, SpringLaw, params_from_dict

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

STAGES = ("gait", "orbit", "transition", "compose", "simulate")
DEPENDS = {"gait": (), "orbit": (), "transition": ("gait",), "compose": ("gait", "orbit", "transition"),
           "simulate": ("compose",)}

# The embedding preset: walking heights the seven-link model reaches with
# bent knees, and a planning foot centred on the biped's foot.
DEFAULT_DOC = {
    "rom": {"L_h": 0.10, "L_t": 0.10},
    "gait": {"speed": 0.4, "z_lo": 0.78, "z_hi": 0.84},
    "lateral": {"w": 0.2},
    "embedding": {"foot_offset": 0.03},
}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class StageError(RuntimeError):
    def __init__(self, stage, message, diagnostics=None):
        super().__init__(f"stage {stage} failed: {message}")
        self.stage = stage
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class LateralConfig:
    w: float = 0.2
    z0: Optional[float] = None          # default: middle of the gait height band
    method: str = "exact"
    intervals_per_segment: int = 20


@dataclass(frozen=True)
class TransitionConfig:
    height: Optional[float] = None      # default: time-averaged height of the gait
    stance: str = "R"


@dataclass(frozen=True)
class EmbeddingConfig:
    steps: int = 3
    dt: float = 0.005
    foot_offset: float = 0.0
    apex: float = 0.05
    descent_ratio: float = 0.5
    pitch: float = 0.0
    Kp: float = 100.0
    Kd: float = 20.0
    band: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    rom: RomParams = field(default_factory=RomParams)
    spring: SpringLaw = field(default_factory=SpringLaw)
    biped: BipedModel = field(default_factory=BipedModel)
    gait: GaitSpec = field(default_factory=GaitSpec)
    lateral: LateralConfig = field(default_factory=LateralConfig)
    transition: TransitionConfig = field(default_factory=TransitionConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    stages: tuple = STAGES
    out: str = "out"
    seed: int = 0
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def orbit_height(self):
        z = self.lateral.z0
        return 0.5 * (self.gait.z_lo + self.gait.z_hi) if z is None else z

    def digest(self) -> str:
        blob = json.dumps(self.source, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _merge(base: dict, over: dict) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _build(cls, section: str, table: dict):
    names = {f.name for f in fields(cls)}
    for key in table:
        if key not in names:
            raise ConfigError(f"{section}.{key}", "unknown key")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(_field_in(section, str(exc), table), str(exc)) from exc


def _field_in(section, message, table):
    for key in sorted(table, key=len, reverse=True):
        if key in message:
            return f"{section}.{key}"
    return section


MODEL_FILES = {"rom_file": ("rom", "spring"), "biped_file": ("biped",)}


def _model_tables(pipe: dict, base_dir) -> dict:
    """Tables pulled in from the model files named in [pipeline]."""
    out = {}
    for key, sections in MODEL_FILES.items():
        if key not in pipe:
            continue
        path = Path(pipe[key])
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"pipeline.{key}", f"file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"pipeline.{key}", f"not valid TOML: {exc}") from exc
        for sec in sections:
            if sec in doc:
                out[sec] = doc[sec]
    return out


def config_from_dict(doc: dict, defaults: bool = True, base_dir=None) -> PipelineConfig:
    """Validate a parsed configuration document.

    Model files named by ``pipeline.rom_file`` / ``pipeline.biped_file`` are
    read first; tables in the document itself override them.
    """
    known = {"pipeline", "rom", "spring", "biped", "gait", "lateral", "transition", "embedding", "controller"}
    for key in doc:
        if key not in known:
            raise ConfigError(key, "unknown section")
    full = _merge(DEFAULT_DOC, doc) if defaults else dict(doc)
    files = _model_tables(dict(doc.get("pipeline", {})), base_dir)
    if files:
        full = _merge(_merge(DEFAULT_DOC if defaults else {}, files), doc)
    try:
        rom, law = params_from_dict({"rom": full.get("rom", {}), "spring": full.get("spring", {})})
    except (TypeError, ValueError) as exc:
        raise ConfigError(_field_in("rom", str(exc), full.get("rom", {})), str(exc)) from exc
    try:
        biped = model_from_dict(full.get("biped", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(_field_in("biped", str(exc), full.get("biped", {})), str(exc)) from exc
    gait_t = dict(full.get("gait", {}))
    if "speed" in gait_t and "step_length" in gait_t:
        raise ConfigError("gait.step_length", "give either speed or step_length")
    if "step_length" in gait_t:
        gait_t["speed"] = None
    if gait_t.get("z_lo", 0.9) >= gait_t.get("z_hi", 1.1):
        raise ConfigError("gait.z_lo", "z_lo must be below z_hi")
    gait = _build(GaitSpec, "gait", gait_t)
    lateral = _build(LateralConfig, "lateral", full.get("lateral", {}))
    if lateral.w < 0:
        raise ConfigError("lateral.w", "step width must be non-negative")
    if lateral.method not in ("exact", "euler"):
        raise ConfigError("lateral.method", "must be 'exact' or 'euler'")
    transition = _build(TransitionConfig, "transition", full.get("transition", {}))
    if transition.stance not in ("L", "R"):
        raise ConfigError("transition.stance", "must be 'L' or 'R'")
    if transition.stance == "L" and lateral.w > 0:
        # the P2 orbit is anchored at right-foot single support
        raise ConfigError("transition.stance", "lateral sway needs a right-foot first step")
    embedding = _build(EmbeddingConfig, "embedding", full.get("embedding", {}))
    if embedding.steps < 1:
        raise ConfigError("embedding.steps", "need at least one periodic step")
    if embedding.dt <= 0:
        raise ConfigError("embedding.dt", "must be positive")
    ctrl_t = dict(full.get("controller", {}))
    if "u_max" in ctrl_t:
        u = float(ctrl_t.pop("u_max"))
        ctrl_t.setdefault("u_lb", -u)
        ctrl_t.setdefault("u_ub", u)
    ctrl_t.setdefault("mu", rom.mu)
    controller = _build(ControllerConfig, "controller", ctrl_t)
    if abs(biped.mass - rom.m) > 1e-9 * rom.m:
        raise ConfigError("rom.m", f"planning mass {rom.m} differs from biped mass {biped.mass}")
    pipe = dict(full.get("pipeline", {}))
    for key in pipe:
        if key not in ("stages", "out", "seed", *MODEL_FILES):
            raise ConfigError(f"pipeline.{key}", "unknown key")
    stages = tuple(pipe.get("stages", STAGES))
    for s in stages:
        if s not in STAGES:
            raise ConfigError("pipeline.stages", f"unknown stage {s!r}")
    return PipelineConfig(rom, law, biped, gait, lateral, transition, embedding, controller, stages,
                          str(pipe.get("out", "out")), int(pipe.get("seed", 0)), full)


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError("config", f"file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"not valid TOML: {exc}") from exc
    return config_from_dict(doc, base_dir=Path(path).parent)


def resolve_stages(selected) -> List[str]:
    """Selected stages plus their dependencies, in execution order."""
    need = set()

    def add(s):
        if s not in need:
            need.add(s)
            for d in DEPENDS[s]:
                add(d)
    for s in selected:
        if s not in STAGES:
            raise ConfigError("stage", f"unknown stage {s!r}")
        add(s)
    return [s for s in STAGES if s in need]


@dataclass
class RunManifest:
    config_hash: str
    version: str
    seed: int
    stages: Dict[str, dict] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    status: str = "ok"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    def deterministic_view(self):
        d = asdict(self)
        d.pop("timings")
        return d


class _Writer:
    def __init__(self, out: Path):
        self.out = out
        self.files: List[str] = []

    def _track(self, path: Path):
        rel = str(path.relative_to(self.out))
        if rel not in self.files:
            self.files.append(rel)

    def text(self, name, text):
        self._track(write_text(self.out / name, text))

    def csv(self, name, header, rows):
        self._track(write_csv(self.out / name, header, rows))

    def artifact_csv(self, name, artifact):
        self._track(export_csv(artifact, self.out / name))

    def artifact_json(self, name, artifact):
        self._track(export_json(artifact, self.out / name))


class Pipeline:
    """Executes stages for a validated configuration and keeps the results."""

    def __init__(self, config: PipelineConfig, out=None):
        self.config = config
        self.out = Path(out or config.out)
        self.results = {}

    # -- stages -------------------------------------------------------------
    def gait(self, w: _Writer):
        c = self.config
        g = plan_periodic_aslip(c.gait, c.rom, c.spring)
        audit = audit_periodic(g)
        w.artifact_json("gait.json", g)
        w.artifact_csv("gait.csv", g)
        self._fig2(w, g)
        return g, dict(audit)

    def orbit(self, w: _Writer):
        c = self.config
        o = identify_p2_orbit(c.rom.with_height(c.orbit_height), c.gait.T_SSP, c.gait.T_DSP, c.lateral.w)
        w.artifact_json("orbit.json", o)
        w.artifact_csv("orbit.csv", o)
        self._fig3(w, o)
        return o, {"sigma2": o.sigma2, "y0": o.y0, "yd0": o.yd0, "return_error": o.return_error}

    def transition(self, w: _Writer):
        c = self.config
        g = self.results["gait"]
        height = c.transition.height or g.z0
        xs = standing_state(c.rom, c.spring, height)
        goal = g.ssp.state(g.ssp.t.size - 1)
        tr = plan_transition_aslip(xs, goal, c.gait, c.rom, c.spring)
        audit = audit_transition(tr, xs, goal)
        w.artifact_json("transition.json", tr)
        w.artifact_csv("transition.csv", tr)
        self.results["standing"] = xs
        return tr, dict(audit)

    def _lateral(self, tr, t_tr):
        """Lateral reference: transition QP into the P2 orbit, then the orbit."""
        c = self.config
        o = self.results["orbit"]
        if c.lateral.w == 0:
            return None, None
        stance = c.transition.stance
        foot_y = {stance: 0.0, ("L" if stance == "R" else "R"): o.w}
        n = c.lateral.intervals_per_segment
        segs = [(DSP, tr.dsp.duration, n), (SSP, tr.ssp.duration, n)]
        track = SagittalTrack(transition_pieces(tr, stance), c.rom, c.spring)
        F_L = lambda t: max(track.at(t)["F_L"], 0.0)
        F_R = lambda t: max(track.at(t)["F_R"], 0.0)
        p = c.rom.with_height(o.params.z0)
        goal = np.array(o.at(o.T_SSP)[:2]) - [foot_y[stance], 0.0]
        start = np.array([0.5 * o.w, 0.0])
        lat = plan_transition_hlip(start, goal, segs, F_L, F_R, p, c.lateral.method,
                                   stance_foot_y=0.0)
        if not lat.report.ok:
            raise StageError("compose", f"lateral transition QP {lat.report.status}")
        first = lateral_transition_track(lat, foot_y)
        rest = p2_track(o, c.embedding.steps, t0=0.0, phase_offset=o.T_SSP, first=DSP)
        return chain_lateral(first, rest, t_tr), lat

    def compose(self, w: _Writer):
        c = self.config
        g, tr = self.results["gait"], self.results["transition"]
        t_tr = tr.dsp.duration + tr.ssp.duration
        pieces = (transition_pieces(tr, c.transition.stance)
                  + periodic_pieces(g, c.embedding.steps, first_side=c.transition.stance, t0=t_tr,
                                    start_with_dsp=True))
        track = SagittalTrack(pieces, c.rom, c.spring)
        lat, lat_plan = self._lateral(tr, t_tr)
        traj = compose_3d(track, lat, dt=c.embedding.dt)
        w.artifact_csv("composed.csv", traj)
        if lat_plan is not None:
            w.artifact_json("lateral_transition.json", lat_plan)
        return traj, {"samples": int(traj.t.size), "duration": traj.duration}

    def simulate(self, w: _Writer):
        c = self.config
        traj = self.results["compose"]
        e = c.embedding
        refs = WalkingReference(traj, pitch=e.pitch, apex=e.apex, descent_ratio=e.descent_ratio,
                                foot_offset=e.foot_offset)
        xs = self.results["standing"]
        soles = {s: (-e.foot_offset, 0.0) for s in ("L", "R")}
        q0 = standing_posture(c.biped, xs.com(), soles, e.pitch)
        res = simulate_embedding(c.biped, refs, q0, np.zeros(q0.size), c.controller, e.Kp, e.Kd, e.band)
        w.csv("closed_loop.csv", LOG_COLUMNS, res.rows())
        w.text("biped_states.csv", res.trajectory.to_csv())
        self._fig6(w, res)
        summary = embedding_summary(res, c.controller)
        if res.trajectory.status not in ("t_end", "t_end_no_events", "terminal"):
            raise StageError("simulate", f"simulation ended with status {res.trajectory.status}", summary)
        return res, summary

    # -- figure data --------------------------------------------------------
    def _fig2(self, w, g):
        law = g.law
        rows = []
        for ph in g.phases:
            F = ph.normal_forces(law)
            z = ph.com()[:, 1]
            for i in range(ph.t.size):
                rows.append([ph.t[i], z[i], F[i, 0], F[i, 1] if F.shape[1] > 1 else 0.0])
        w.csv("fig2_gait.csv", ["t", "z", "F_stance", "F_leading"], rows)

    def _fig3(self, w, o):
        t, y, yd = o.sample()
        w.csv("fig3_orbit_phase.csv", ["y", "ydot"], zip(y, yd))

    def _fig6(self, w, res):
        tt = res.column("t")
        w.csv("fig6a_com_tracking.csv", ["t", "com_x", "com_x_ref", "com_z", "com_z_ref"],
              zip(tt, res.column("com_x"), res.column("com_x_ref"), res.column("com_z"), res.column("com_z_ref")))
        w.csv("fig6d_force_band.csv",
              ["t", "Fz_L", "Fref_L", "band_lo_L", "band_hi_L", "Fz_R", "Fref_R", "band_lo_R", "band_hi_R"],
              zip(tt, res.column("Fz_L"), res.column("Fref_L"), res.column("band_lo_L"), res.column("band_hi_L"),
                  res.column("Fz_R"), res.column("Fref_R"), res.column("band_lo_R"), res.column("band_hi_R")))
        w.text("plots.gp", GNUPLOT)

    # -- driver -------------------------------------------------------------
    def run(self, stages=None) -> RunManifest:
        c = self.config
        order = resolve_stages(stages or c.stages)
        np.random.seed(c.seed)
        w = _Writer(self.out)
        man = RunManifest(c.digest(), __version__, c.seed)
        failed = None
        for s in order:
            if failed is not None:
                man.stages[s] = {"status": "skipped", "reason": f"depends on failed stage {failed}"}
                continue
            t0 = time.perf_counter()
            try:
                result, summary = getattr(self, s)(w)
                self.results[s] = result
                man.stages[s] = {"status": "ok", **_plain(summary)}
            except (PlanningError, ControllerFailure, StageError, np.linalg.LinAlgError) as exc:
                failed = s
                info = {"status": "failed", "error": str(exc)}
                rep = getattr(exc, "report", None)
                if rep is not None:
                    info["report"] = {"status": rep.status, "iterations": rep.iterations, "message": rep.message}
                if getattr(exc, "reason", ""):
                    info["reason"] = exc.reason
                if isinstance(exc, StageError):
                    info.update(_plain(exc.diagnostics))
                man.stages[s] = info
                man.status = "failed"
            man.timings[s] = time.perf_counter() - t0
        man.files = list(w.files)
        man.files.append("manifest.json")
        write_text(self.out / "manifest.json", man.to_json())
        return man


def run(config: PipelineConfig, out=None, stages=None) -> RunManifest:
    return Pipeline(config, out).run(stages)


def embedding_summary(res, ctrl: ControllerConfig) -> dict:
    """Closed-loop audit numbers used by the manifest and the acceptance suite."""
    V, Vd, bound, delta = (res.column(k) for k in ("V", "V_dot", "bound", "delta"))
    band_viol = 0.0
    for s in ("L", "R"):
        F, lo, hi = res.column(f"Fz_{s}"), res.column(f"band_lo_{s}"), res.column(f"band_hi_{s}")
        on = np.isfinite(lo) & np.isfinite(F)
        if on.any():
            band_viol = max(band_viol, float(np.max(np.maximum(lo[on] - F[on], F[on] - hi[on]))))
    return {
        "steps": len(res.log),
        "events": [e for _, e in res.touchdowns],
        "max_com_error": float(res.com_error.max()) if res.log else float("nan"),
        "clf_violation": float(np.max(Vd - bound)) if res.log else float("nan"),
        "delta_fraction": float(np.mean(delta > 1e-3 * ctrl.penalty * V)) if res.log else float("nan"),
        "band_violation": band_viol,
        "grf_violation": float(res.column("grf_violation").max()) if res.log else float("nan"),
        "fallbacks": int(res.column("fallback").sum()) if res.log else 0,
        "t_final": res.trajectory.t_final,
        "end": res.trajectory.status,
    }


def _plain(d):
    if isinstance(d, dict):
        return {k: _plain(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_plain(v) for v in d]
    if isinstance(d, (np.floating, float)):
        v = float(d)
        return v if np.isfinite(v) else None
    if isinstance(d, np.integer):
        return int(d)
    return d


GNUPLOT = """# gnuplot script for the figure data files in this directory
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,600
set output 'fig2_gait.png'
plot 'fig2_gait.csv' using 1:3 with lines, '' using 1:4 with lines
set output 'fig3_orbit_phase.png'
plot 'fig3_orbit_phase.csv' using 1:2 with lines
set output 'fig6a_com_tracking.png'
plot 'fig6a_com_tracking.csv' using 1:2 with lines, '' using 1:3 with lines dashtype 2
set output 'fig6d_force_band.png'
plot 'fig6d_force_band.csv' using 1:2 with lines, '' using 1:4 with lines dashtype 2, '' using 1:5 with lines dashtype 2, \\
     '' using 1:6 with lines, '' using 1:8 with lines dashtype 3, '' using 1:9 with lines dashtype 3
"""
