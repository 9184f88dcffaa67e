"""Event-driven simulation of hybrid systems over a domain graph.

Continuous flow uses an adaptive embedded Runge-Kutta 4(5) pair
(``scipy.integrate.RK45``). Each accepted step's dense output is searched
for guard crossings, and the earliest crossing is located by bisection.
Edges fire either on a state guard crossing or after a fixed time spent in
the source domain.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import RK45

EVENT_TOL = 1e-10
GUARD_SAMPLES = 3


class ZenoError(RuntimeError):
    pass


@dataclass(frozen=True)
class Edge:
    """Domain transition.

    Exactly one of ``guard`` (g(t, x, u) -> float, fires when it crosses zero
    in ``direction``: -1 falling, +1 rising, 0 either) or ``duration`` (time
    spent in the source domain) must be given.
    """

    source: str
    target: str
    guard: Optional[Callable] = None
    direction: int = -1
    duration: Optional[float] = None
    reset: Optional[Callable] = None
    name: str = ""
    terminal: bool = False

    def __post_init__(self):
        if (self.guard is None) == (self.duration is None):
            raise ValueError("an edge needs exactly one of guard or duration")
        if self.duration is not None and self.duration <= 0:
            raise ValueError("edge duration must be positive")
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or 1")
        if not self.name:
            object.__setattr__(self, "name", f"{self.source}->{self.target}")

    def apply_reset(self, t, x):
        return np.asarray(x, float).copy() if self.reset is None else np.asarray(self.reset(t, x), float)


@dataclass
class HybridSystem:
    dynamics: Dict[str, Callable]
    edges: List[Edge]
    forces: Dict[str, Callable] = field(default_factory=dict)

    def __post_init__(self):
        for d in self.dynamics:
            if not any(e.source == d for e in self.edges):
                raise ValueError(f"domain {d!r} has no outgoing edge")
        for e in self.edges:
            if e.source not in self.dynamics or e.target not in self.dynamics:
                raise ValueError(f"edge {e.name} references an unknown domain")

    def outgoing(self, domain):
        return [e for e in self.edges if e.source == domain]


@dataclass(frozen=True)
class Segment:
    domain: str
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    forces: np.ndarray


@dataclass(frozen=True)
class Event:
    t: float
    edge: str
    source: str
    target: str
    x_pre: np.ndarray
    x_post: np.ndarray


@dataclass(frozen=True)
class HybridTrajectory:
    segments: tuple
    events: tuple
    status: str = "t_end"

    @property
    def t_final(self) -> float:
        return float(self.segments[-1].t[-1]) if self.segments else 0.0

    @property
    def x_final(self) -> np.ndarray:
        return self.segments[-1].x[-1]

    @property
    def domain_final(self) -> str:
        return self.segments[-1].domain

    @property
    def reached_end(self) -> bool:
        return self.status == "t_end"

    def to_csv(self, path=None, state_names=None, input_names=None, force_names=None):
        return trajectory_csv(self, path, state_names, input_names, force_names)


def locate_event(guard: Callable, bracket: Sequence[float], interpolant: Optional[Callable] = None,
                 tol: float = EVENT_TOL) -> float:
    """Bisection for the zero of a guard over ``bracket = (a, b)``.

    ``guard(t)`` when no interpolant is given, else ``guard(t, interpolant(t))``.
    Returns the bracket end on the far side of the crossing, so the returned
    time is at most ``tol`` past the root.
    """
    def g(t):
        return guard(t) if interpolant is None else guard(t, interpolant(t))

    a, b = float(bracket[0]), float(bracket[1])
    ga, gb = g(a), g(b)
    if ga == 0:
        return a
    if gb == 0:
        return b
    if np.sign(ga) == np.sign(gb):
        raise ValueError("guard does not change sign over the bracket")
    while b - a > tol:
        mid = 0.5 * (a + b)
        gm = g(mid)
        if gm == 0:
            return mid
        if np.sign(gm) == np.sign(ga):
            a, ga = mid, gm
        else:
            b, gb = mid, gm
    return b


def _crossed(g0, g1, direction):
    if direction < 0:
        return g0 > 0 >= g1
    if direction > 0:
        return g0 < 0 <= g1
    return (g0 > 0 >= g1) or (g0 < 0 <= g1)


def _armed(g, direction):
    return (direction < 0 and g > 0) or (direction > 0 and g < 0) or (direction == 0 and g != 0)


class _SegmentLog:
    def __init__(self, domain):
        self.domain = domain
        self.t, self.x, self.u, self.f = [], [], [], []

    def add(self, t, x, u, f):
        self.t.append(float(t))
        self.x.append(np.array(x, dtype=float))
        self.u.append(np.atleast_1d(np.array([] if u is None else u, dtype=float)))
        self.f.append(np.atleast_1d(np.array([] if f is None else f, dtype=float)))

    def freeze(self):
        return Segment(self.domain, np.array(self.t), np.array(self.x),
                       np.array(self.u), np.array(self.f))


def integrate(system: HybridSystem, x0, domain0: str, t_end: float, controls: Optional[Callable] = None,
              *, t0: float = 0.0, control_period: Optional[float] = None, rtol: float = 1e-9,
              atol: float = 1e-11, max_step: float = np.inf, event_tol: float = EVENT_TOL,
              max_events: Optional[int] = None, zeno_limit: int = 1000,
              record: str = "steps") -> HybridTrajectory:
    """Simulate ``system`` from (``x0``, ``domain0``) until ``t_end``.

    ``controls(t, x, domain)`` supplies the input. With ``control_period``
    the input is sampled and held (zero-order hold), otherwise it is
    evaluated inside the vector field. Integration also stops after
    ``max_events`` events or at a terminal edge. ``record="samples"`` keeps
    only interval end points (control samples and events) instead of every
    solver step.

    Guards are checked at the step end and at a few interior points of the
    dense output. A guard that can leave and re-enter its side faster than
    the integrator's step needs ``max_step`` to bound the step.
    """
    if domain0 not in system.dynamics:
        raise ValueError(f"unknown domain {domain0!r}")
    t = float(t0)
    x = np.asarray(x0, dtype=float).copy()
    domain = domain0
    dom_start = t
    segments, events = [], []
    event_times: List[float] = []
    status = "t_end"
    log = _SegmentLog(domain)
    held = None

    def current_u(tt, xx):
        if controls is None:
            return None
        if control_period is not None:
            return held
        return controls(tt, xx, domain)

    def force_of(tt, xx, uu):
        fn = system.forces.get(domain)
        return None if fn is None else fn(tt, xx, uu)

    def fire(edge, te, xe, ue):
        nonlocal x, domain, dom_start, log, t
        log.add(te, xe, ue, force_of(te, xe, ue))
        segments.append(log.freeze())
        x_post = edge.apply_reset(te, xe)
        events.append(Event(te, edge.name, edge.source, edge.target, np.array(xe), x_post))
        event_times.append(te)
        t, x, domain, dom_start = te, x_post, edge.target, te
        log = _SegmentLog(domain)

    armed = {}
    n_sample = 0
    if control_period is not None:
        n_sample = int(np.floor((t - t0) / control_period + 1e-9))
    first_step = None
    while t < t_end - 1e-15:
        if control_period is not None:
            held = controls(t, x, domain)
        u_now = current_u(t, x)
        edges = system.outgoing(domain)
        if not log.t:
            log.add(t, x, u_now, force_of(t, x, u_now))
            armed = {e.name: False for e in edges}

        # guards already on the fired side after an input update
        fired = None
        for e in edges:
            if e.guard is None:
                continue
            gv = e.guard(t, x, u_now)
            if armed.get(e.name) and not _armed(gv, e.direction):
                fired = e
                break
            armed[e.name] = armed.get(e.name) or _armed(gv, e.direction)
        if fired is not None:
            fire(fired, t, x, u_now)
            stop = _stop(fired, events, max_events, event_times, zeno_limit)
            if stop:
                status = stop
                break
            continue

        t_stop = t_end
        timed = None
        for e in edges:
            if e.duration is not None:
                tf = dom_start + e.duration
                if tf < t_stop - 1e-15 or (abs(tf - t_stop) <= 1e-15 and timed is None):
                    t_stop, timed = tf, e
        if control_period is not None:
            t_sample = t0 + (n_sample + 1) * control_period
            if t_sample < t_stop - 1e-13:
                t_stop, timed = t_sample, None
        if t_stop <= t + 1e-15:
            if timed is not None:
                fire(timed, t_stop, x, u_now)
                stop = _stop(timed, events, max_events, event_times, zeno_limit)
                if stop:
                    status = stop
                    break
            if control_period is not None:
                n_sample += 1
            continue

        dyn = system.dynamics[domain]
        if control_period is not None or controls is None:
            fun = (lambda tt, xx, _u=u_now, _d=dyn: _d(tt, xx, _u))
        else:
            fun = (lambda tt, xx, _d=dyn: _d(tt, xx, controls(tt, xx, domain)))
        kw = {} if first_step is None else {"first_step": min(first_step, t_stop - t)}
        solver = RK45(fun, t, x, t_stop, rtol=rtol, atol=atol, max_step=max_step, **kw)
        g_prev = {e.name: e.guard(t, x, u_now) for e in edges if e.guard is not None}
        event_hit = None
        while solver.status == "running":
            t_prev = solver.t
            msg = solver.step()
            if solver.status == "failed":
                raise RuntimeError(f"integration failed at t={t_prev}: {msg}")
            if solver.step_size is not None and solver.t < t_stop:
                first_step = solver.step_size
            tn, xn = solver.t, solver.y
            un = current_u(tn, xn)
            fixed_u = control_period is not None or controls is None
            dense = None
            best = None
            for e in edges:
                if e.guard is None:
                    continue
                # interior samples catch a guard that leaves and re-enters within one step
                grid = [t_prev + (tn - t_prev) * k / (GUARD_SAMPLES + 1) for k in range(1, GUARD_SAMPLES + 1)]
                gp, a, arm = g_prev[e.name], t_prev, armed.get(e.name, True)
                bracket = None
                for tt in grid + [tn]:
                    if tt == tn:
                        gv = e.guard(tn, xn, un)
                    else:
                        dense = dense or solver.dense_output()
                        xx = dense(tt)
                        gv = e.guard(tt, xx, un if fixed_u else controls(tt, xx, domain))
                    if arm and _crossed(gp, gv, e.direction):
                        bracket = (a, tt)
                        break
                    arm = arm or _armed(gv, e.direction)
                    gp, a = gv, tt
                armed[e.name] = arm
                g_prev[e.name] = gv
                if bracket is None:
                    continue
                dense = dense or solver.dense_output()

                def gfun(tt, xx, _e=e):
                    return _e.guard(tt, xx, un if fixed_u else controls(tt, xx, domain))
                te = locate_event(gfun, bracket, dense, tol=event_tol)
                if best is None or te < best[0]:
                    best = (te, e)
            if best is not None:
                event_hit = best
                break
            if record == "steps" and tn < t_stop:
                log.add(tn, xn, un, force_of(tn, xn, un))
        if event_hit is not None:
            te, e = event_hit
            xe = dense(te)
            fire(e, te, xe, current_u(te, xe))
            stop = _stop(e, events, max_events, event_times, zeno_limit)
            if stop:
                status = stop
                break
            continue
        t, x = t_stop, solver.y.copy()
        u_end = current_u(t, x)
        if timed is not None:
            fire(timed, t, x, u_end)
            stop = _stop(timed, events, max_events, event_times, zeno_limit)
            if stop:
                status = stop
                break
            if control_period is not None and abs(t - (t0 + (n_sample + 1) * control_period)) < 1e-12:
                n_sample += 1
            continue
        log.add(t, x, u_end, force_of(t, x, u_end))
        if control_period is not None:
            n_sample += 1
    if not log.t and events:
        log.add(t, x, None, None)
    if log.t:
        segments.append(log.freeze())
    if status == "t_end" and not events:
        status = "t_end_no_events"
    return HybridTrajectory(tuple(segments), tuple(events), status)


def _stop(edge, events, max_events, event_times, zeno_limit):
    if edge.terminal:
        return "terminal"
    if max_events is not None and len(events) >= max_events:
        return "max_events"
    if len(event_times) > zeno_limit:
        window = event_times[-zeno_limit - 1:]
        if window[-1] - window[0] < 1.0:
            return "zeno"
    return None


def trajectory_csv(traj: HybridTrajectory, path=None, state_names=None, input_names=None,
                   force_names=None) -> str:
    """Write ``traj`` as CSV.

    Columns, in order: ``t``, ``domain``, the state entries, the input
    entries, the force entries. Default names are ``x0..``, ``u0..``, ``f0..``
    sized to the widest segment; narrower segments leave trailing cells
    empty. Floats use 17 significant digits so output is bit-stable.
    """
    nx = max([s.x.shape[1] for s in traj.segments if s.x.size] or [0])
    nu = max([s.u.shape[1] for s in traj.segments if s.u.ndim == 2] or [0])
    nf = max([s.forces.shape[1] for s in traj.segments if s.forces.ndim == 2] or [0])
    header = (["t", "domain"]
              + list(state_names or [f"x{i}" for i in range(nx)])
              + list(input_names or [f"u{i}" for i in range(nu)])
              + list(force_names or [f"f{i}" for i in range(nf)]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for s in traj.segments:
        for k in range(s.t.size):
            row = [_fmt(s.t[k]), s.domain]
            for arr, width in ((s.x, nx), (s.u, nu), (s.forces, nf)):
                vals = arr[k] if arr.ndim == 2 else np.zeros(0)
                row += [_fmt(v) for v in vals] + [""] * (width - len(vals))
            w.writerow(row)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _fmt(v) -> str:
    return format(float(v), ".17g")
