"""Stable-manifold tracing and exact DOA boundary assembly.

The boundary of a stable equilibrium's basin is the union of the stable
manifolds of the type-1 saddles sitting on it. Each saddle contributes two
branches, seeded a small step along its stable eigenvector on either side
and integrated in reverse time until they leave the working window, hit the
arc-length cap, converge backward onto a source, or close a loop.

Assembly builds a planar subdivision from the traced arcs plus the window
edges and walks its faces; the face containing the equilibrium is the basin
on the fundamental domain. Window-edge segments only appear in the polygon
where the basin leaves the window ("splice" edges).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import _geometry as geo
from .dynamics import (
    Event,
    IntegrationFailure,
    IntegratorSettings,
    RhsMode,
    build_model,
    integrate,
    rk4_grid,
)
from .equilibria import (
    Equilibrium,
    EquilibriumKind,
    find_equilibria,
    pick_sep,
    translates_in_box,
)
from .network import TwoInverterSystem

TWO_PI = 2.0 * math.pi


class OpenBasinError(RuntimeError):
    """No closed cycle of boundary arcs encloses the equilibrium."""


class BranchTermination(enum.Enum):
    DOMAIN_EXIT = "DomainExit"
    ARC_LENGTH_CAP = "ArcLengthCap"
    CONVERGED_TO_EQUILIBRIUM = "ConvergedToEquilibrium"
    CLOSED_LOOP = "ClosedLoop"


@dataclass
class ManifoldBranch:
    source: Equilibrium
    direction: int                      # +1 / -1 along the stable eigenvector
    polyline: np.ndarray                # starts at source.state + dir*eps*v
    termination: Optional[BranchTermination]
    captured_state: Optional[np.ndarray] = None
    failed: bool = False
    error: Optional[str] = None


def default_trace_settings(gain_scale: float,
                           half_width: float = math.pi,
                           trace_margin: float = 1.0,
                           spatial_step: float = 0.05) -> IntegratorSettings:
    """Backward-tracing settings tuned to the loop-gain time scale.

    max_step bounds the chord length of the recorded polyline: speeds stay
    below roughly 3 * gain, so spatial strides stay near spatial_step.
    """
    return IntegratorSettings(
        method="RK45Adaptive",
        dt=min(1e-3, spatial_step / gain_scale),
        rel_tol=1e-8, abs_tol=1e-10,
        t_max=1e4 / gain_scale,
        max_arc_length=50.0,
        domain_box=half_width + trace_margin,
        max_step=spatial_step / (3.0 * gain_scale))


def trace_stable_manifolds(sys: TwoInverterSystem, mode: RhsMode,
                           ueps: Sequence[Equilibrium],
                           epsilon: float = 1e-4,
                           settings: Optional[IntegratorSettings] = None,
                           capture_targets: Sequence[Equilibrium] = (),
                           box_center: Optional[np.ndarray] = None,
                           capture_radius: float = 1e-3,
                           spatial_step: float = 0.05) -> list[ManifoldBranch]:
    """Both stable-manifold branches of every given type-1 saddle.

    Branch failures are recorded on the branch and do not abort the batch.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError("epsilon outside [1e-6, 1e-3]")
    model = build_model(sys, mode)
    gain_scale = max(model.gains)
    if settings is None:
        settings = default_trace_settings(gain_scale, spatial_step=spatial_step)
    if settings.max_step is None:
        settings = replace(settings, max_step=spatial_step / (3.0 * gain_scale))
    branches = []
    for uep in ueps:
        if uep.kind is not EquilibriumKind.TYPE1_UEP:
            raise ValueError("trace_stable_manifolds expects type-1 UEPs")
        v = uep.stable_eigenvector()
        for direction in (+1, -1):
            x0 = uep.state + direction * epsilon * v
            events = [Event(
                "ClosedLoop",
                lambda t, y, c=uep.state: float(np.linalg.norm(y - c)) - capture_radius,
                direction=-1, terminal=True)]
            for j, tgt in enumerate(capture_targets):
                if np.linalg.norm(tgt.state - uep.state) < 10 * capture_radius:
                    continue
                events.append(Event(
                    f"Captured:{j}",
                    lambda t, y, c=tgt.state: float(np.linalg.norm(y - c)) - capture_radius,
                    direction=-1, terminal=True))
            try:
                traj = integrate(model, None, x0, settings,
                                 direction="backward", events=events,
                                 box_center=box_center)
            except IntegrationFailure as exc:
                branches.append(ManifoldBranch(
                    source=uep, direction=direction,
                    polyline=np.array([x0]), termination=None,
                    failed=True, error=str(exc)))
                continue
            poly = traj.y
            term = BranchTermination.ARC_LENGTH_CAP
            captured = None
            if traj.terminal_event == "DomainExit":
                term = BranchTermination.DOMAIN_EXIT
            elif traj.terminal_event == "ClosedLoop":
                term = BranchTermination.CLOSED_LOOP
                captured = uep.state
                poly = np.vstack([poly, uep.state])
            elif traj.terminal_event and traj.terminal_event.startswith("Captured:"):
                term = BranchTermination.CONVERGED_TO_EQUILIBRIUM
                tgt = capture_targets[int(traj.terminal_event.split(":")[1])]
                captured = tgt.state
                poly = np.vstack([poly, tgt.state])
            branches.append(ManifoldBranch(
                source=uep, direction=direction, polyline=poly,
                termination=term, captured_state=captured))
    return branches


# ---------------------------------------------------------------------------
# Planar subdivision and face extraction
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _Arc:
    u: int                  # node ids
    v: int
    pts: np.ndarray         # polyline from node u to node v
    splice: bool            # True for window-edge segments


class _NodeRegistry:
    def __init__(self, snap: float = 1e-7):
        self.snap = snap
        self.coords: list[np.ndarray] = []
        self._index: dict[tuple, int] = {}

    def key(self, p) -> tuple:
        return (round(float(p[0]) / self.snap), round(float(p[1]) / self.snap))

    def add(self, p) -> int:
        p = np.asarray(p, dtype=float)
        k = self.key(p)
        if k in self._index:
            return self._index[k]
        # tolerate off-by-one quantization
        for dk1 in (-1, 0, 1):
            for dk2 in (-1, 0, 1):
                kk = (k[0] + dk1, k[1] + dk2)
                if kk in self._index:
                    i = self._index[kk]
                    if np.linalg.norm(self.coords[i] - p) <= self.snap:
                        return i
        i = len(self.coords)
        self.coords.append(p)
        self._index[k] = i
        return i


def _departure_dir(pts: np.ndarray, min_len: float) -> np.ndarray:
    p0 = pts[0]
    for q in pts[1:]:
        d = q - p0
        n = np.linalg.norm(d)
        if n > min_len:
            return d / n
    d = pts[-1] - p0
    n = np.linalg.norm(d)
    return d / n if n > 0 else np.array([1.0, 0.0])


def _walk_faces(nodes: _NodeRegistry, arcs: list[_Arc], dir_eps: float):
    """Enumerate faces of the subdivision via the rotational half-edge walk.

    Returns a list of faces; each face is a list of (arc_index, forward)
    pairs traversed so the face interior lies on the left.
    """
    out_edges: dict[int, list] = {}
    half = {}
    for ai, arc in enumerate(arcs):
        d_uv = _departure_dir(arc.pts, dir_eps)
        d_vu = _departure_dir(arc.pts[::-1], dir_eps)
        half[(ai, True)] = (arc.u, arc.v, math.atan2(d_uv[1], d_uv[0]))
        half[(ai, False)] = (arc.v, arc.u, math.atan2(d_vu[1], d_vu[0]))
        out_edges.setdefault(arc.u, []).append((ai, True))
        out_edges.setdefault(arc.v, []).append((ai, False))
    for node, lst in out_edges.items():
        lst.sort(key=lambda h: (half[h][2], h[0], h[1]))

    def next_half(h):
        _, head, _ = half[h]
        twin = (h[0], not h[1])
        lst = out_edges[head]
        i = lst.index(twin)
        return lst[(i - 1) % len(lst)]

    faces = []
    visited = set()
    for h0 in half:
        if h0 in visited:
            continue
        cycle = []
        h = h0
        for _ in range(len(half) + 1):
            visited.add(h)
            cycle.append(h)
            h = next_half(h)
            if h == h0:
                break
        else:
            continue   # non-closing walk; defensive, should not happen
        faces.append(cycle)
    return faces


def _face_polygon(cycle, arcs) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate arc polylines of a face cycle; returns (polygon, splice
    mask per segment). Each arc of m points contributes m-1 segments."""
    pts = []
    seg_flags = []
    for ai, fwd in cycle:
        p = arcs[ai].pts if fwd else arcs[ai].pts[::-1]
        if pts:
            p = p[1:]
        pts.append(p)
        seg_flags.append(np.full(len(arcs[ai].pts) - 1, arcs[ai].splice))
    poly = np.vstack(pts)
    seg = np.concatenate(seg_flags)
    if not np.allclose(poly[0], poly[-1]):
        poly = np.vstack([poly, poly[0]])
        seg = np.append(seg, False)
    return poly, seg


@dataclass
class DOABoundary:
    sep: Equilibrium
    branches: list[ManifoldBranch]
    closed_polygon: np.ndarray          # closed: last row repeats first
    splice_mask: np.ndarray             # per-segment, True = window edge
    is_bounded: bool
    half_width: float = math.pi

    def boundary_points(self) -> np.ndarray:
        return self.closed_polygon

    def area(self) -> float:
        return geo.polygon_area(self.closed_polygon)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.closed_polygon, delimiter=",",
                   header="delta1,delta2", comments="", fmt="%.12g")


@dataclass(frozen=True)
class Membership:
    inside: bool
    on_boundary: bool
    pole_slip: bool


def membership(doa: DOABoundary, point, boundary_tol: float = 1e-9) -> Membership:
    """Strict membership with boundary flag; points are first reduced into
    the fundamental window (a nontrivial reduction marks pole slip)."""
    p = np.asarray(point, dtype=float)
    c = doa.sep.state
    shift = np.round((p - c) / TWO_PI)
    reduced = p - TWO_PI * shift
    pole_slip = bool(np.any(shift != 0))
    d = geo.point_polyline_distance(reduced, doa.closed_polygon)
    if d <= boundary_tol:
        return Membership(inside=False, on_boundary=True, pole_slip=pole_slip)
    inside = bool(geo.points_in_polygon(reduced[None, :], doa.closed_polygon)[0])
    return Membership(inside=inside, on_boundary=False, pole_slip=pole_slip)


def contains(doa: DOABoundary, point) -> bool:
    """Strict polygon membership of a state (reduced into the window)."""
    return membership(doa, point).inside


def contains_batch(doa: DOABoundary, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    c = doa.sep.state
    reduced = pts - TWO_PI * np.round((pts - c) / TWO_PI)
    return geo.points_in_polygon(reduced, doa.closed_polygon)


def assemble_doa(sep: Equilibrium, branches: Sequence[ManifoldBranch],
                 domain_half_width: float = math.pi,
                 snap: float = 1e-7) -> DOABoundary:
    """Close the boundary polygon around `sep` from traced branches.

    Branch polylines are clipped to the window [sep +- half_width]^2,
    assembled into a planar subdivision together with the window edges, and
    the subdivision face containing the equilibrium is extracted. Raises
    OpenBasinError when no face strictly contains it.
    """
    if sep.kind is not EquilibriumKind.SEP:
        raise ValueError("assemble_doa needs a stable equilibrium")
    center = sep.state
    lo = center - domain_half_width
    hi = center + domain_half_width

    nodes = _NodeRegistry(snap=snap)
    arcs: list[_Arc] = []

    for br in branches:
        if br.failed or len(br.polyline) < 2:
            continue
        full = np.vstack([br.source.state[None, :], br.polyline])
        for piece in geo.clip_polyline_to_box(full, lo, hi):
            piece = _dedupe(piece, snap)
            if len(piece) < 2:
                continue
            u = nodes.add(piece[0])
            v = nodes.add(piece[-1])
            if u == v and len(piece) < 4:
                continue
            arcs.append(_Arc(u=u, v=v, pts=piece, splice=False))

    # Prune dangling chains: interior endpoints of degree 1 cannot sit on a
    # closed face boundary (arc-cap truncations and grazing clips).
    arcs = _prune_dangling(nodes, arcs, lo, hi, snap)

    # Window edges, split at every node lying on them.
    corners = [np.array([lo[0], lo[1]]), np.array([hi[0], lo[1]]),
               np.array([hi[0], hi[1]]), np.array([lo[0], hi[1]])]
    corner_ids = [nodes.add(c) for c in corners]
    for side in range(4):
        a = corners[side]
        b = corners[(side + 1) % 4]
        axis = 0 if abs(b[0] - a[0]) > abs(b[1] - a[1]) else 1
        hits = []
        for i, p in enumerate(nodes.coords):
            if i in corner_ids:
                continue
            t = (p[axis] - a[axis]) / (b[axis] - a[axis])
            off = abs(p[1 - axis] - a[1 - axis])
            if off <= snap * 20 and 0.0 < t < 1.0:
                hits.append((t, i))
        hits.sort()
        chain = [corner_ids[side]] + [i for _, i in hits] + [corner_ids[(side + 1) % 4]]
        for u, v in zip(chain[:-1], chain[1:]):
            if u == v:
                continue
            arcs.append(_Arc(u=u, v=v,
                             pts=np.vstack([nodes.coords[u], nodes.coords[v]]),
                             splice=True))

    faces = _walk_faces(nodes, arcs, dir_eps=snap * 5)
    best = None
    for cycle in faces:
        poly, seg = _face_polygon(cycle, arcs)
        if len(poly) < 4:
            continue
        area = geo.signed_area(poly)
        if area <= 0:
            continue
        if not geo.points_in_polygon(center[None, :], poly)[0]:
            continue
        if best is None or area < best[2]:
            best = (poly, seg, area)
    if best is None:
        raise OpenBasinError(
            "no closed boundary encloses the equilibrium on this window; "
            "enlarge domain_half_width or the tracing caps")
    poly, seg, _ = best
    is_bounded = not bool(seg.any())
    return DOABoundary(sep=sep, branches=list(branches), closed_polygon=poly,
                       splice_mask=seg, is_bounded=is_bounded,
                       half_width=domain_half_width)


def _dedupe(poly: np.ndarray, tol: float) -> np.ndarray:
    keep = [0]
    for i in range(1, len(poly)):
        if np.linalg.norm(poly[i] - poly[keep[-1]]) > tol:
            keep.append(i)
    out = poly[keep]
    return out


def _prune_dangling(nodes: _NodeRegistry, arcs: list[_Arc], lo, hi,
                    snap: float) -> list[_Arc]:
    def protected(i: int) -> bool:
        p = nodes.coords[i]
        return bool(np.any(np.abs(p - lo) <= snap * 20)
                    or np.any(np.abs(p - hi) <= snap * 20))

    alive = list(arcs)
    while True:
        degree: dict[int, int] = {}
        for arc in alive:
            degree[arc.u] = degree.get(arc.u, 0) + 1
            degree[arc.v] = degree.get(arc.v, 0) + 1
        doomed = [arc for arc in alive
                  if (degree[arc.u] == 1 and not protected(arc.u))
                  or (degree[arc.v] == 1 and not protected(arc.v))]
        if not doomed:
            return alive
        alive = [arc for arc in alive if arc not in doomed]


# ---------------------------------------------------------------------------
# End-to-end boundary computation
# ---------------------------------------------------------------------------

def compute_doa(sys: TwoInverterSystem, mode: RhsMode = RhsMode.EXACT,
                sep: Optional[Equilibrium] = None,
                equilibria: Optional[list[Equilibrium]] = None,
                domain_half_width: float = math.pi,
                epsilon: float = 1e-4,
                settings: Optional[IntegratorSettings] = None,
                saddle_margin: float = 1.0) -> DOABoundary:
    """Locate equilibria, trace every nearby saddle, and assemble the DOA."""
    if equilibria is None:
        equilibria = find_equilibria(sys, mode)
    if sep is None:
        sep = pick_sep(equilibria)
    if sep is None:
        raise OpenBasinError("system has no stable equilibrium")
    center = sep.state
    saddles = [e for e in translates_in_box(
        equilibria, center, domain_half_width + saddle_margin)
        if e.kind is EquilibriumKind.TYPE1_UEP]
    sinks = [e for e in translates_in_box(
        equilibria, center, domain_half_width + saddle_margin + 1.0)
        if e.kind is EquilibriumKind.TYPE2_UEP]
    model = build_model(sys, mode)
    if settings is None:
        settings = default_trace_settings(max(model.gains),
                                          half_width=domain_half_width,
                                          trace_margin=saddle_margin)
    branches = trace_stable_manifolds(
        sys, mode, saddles, epsilon=epsilon, settings=settings,
        capture_targets=sinks, box_center=center)
    return assemble_doa(sep, branches, domain_half_width=domain_half_width)


# ---------------------------------------------------------------------------
# Limit cycles (rotating orbits on the angle cylinder)
# ---------------------------------------------------------------------------

@dataclass
class LimitCycle:
    polyline: np.ndarray       # one period, unwrapped angles
    period: float
    winding: tuple[int, int]

    def to_csv(self, path) -> None:
        np.savetxt(path, self.polyline, delimiter=",",
                   header="delta1,delta2", comments="", fmt="%.12g")


def detect_limit_cycle(sys: TwoInverterSystem, mode: RhsMode, seed,
                       settings: Optional[IntegratorSettings] = None,
                       state_tol: float = 1e-5,
                       period_tol: float = 1e-5) -> Optional[LimitCycle]:
    """Find a rotating periodic orbit by recurrence on a Poincare section.

    The section is the seed's first angle modulo 2*pi, crossed with
    increasing delta1. Returns None when the trajectory instead converges
    toward an equilibrium or shows no recurrence within t_max.
    """
    model = build_model(sys, mode)
    seed = np.asarray(seed, dtype=float)
    gain = max(model.gains)
    if settings is None:
        settings = IntegratorSettings(t_max=40.0, max_arc_length=1e4)
    c = seed[0]

    section = Event("section",
                    lambda t, y: math.sin(y[0] - c), direction=0,
                    terminal=False)
    slow = Event("converged",
                 lambda t, y: float(np.linalg.norm(model.rhs(y))) - 1e-6 * gain,
                 direction=-1, terminal=True)

    chunk = min(settings.t_max, max(1.0, 250.0 / gain))
    t_done = 0.0
    y_cur = seed
    times = np.array([])
    states = np.empty((0, 2))
    while t_done < settings.t_max:
        leg = replace(settings, t_max=min(chunk, settings.t_max - t_done))
        traj = integrate(model, None, y_cur, leg, events=[section, slow],
                         t0=t_done)
        if traj.terminal_event == "converged":
            return None
        t_ev, y_ev = traj.events.get("section", (np.array([]), np.empty((0, 2))))
        if len(t_ev):
            # keep true crossings of delta1 = c (mod 2pi), not the antipode
            keep = np.cos(np.asarray(y_ev)[:, 0] - c) > 0.5
            times = np.concatenate([times, np.asarray(t_ev)[keep]])
            states = np.vstack([states, np.asarray(y_ev)[keep]])
        cyc = _find_recurrence(times, states, state_tol, period_tol)
        if cyc is not None:
            i, period, winding = cyc
            poly = _sample_period(model, states[i], period)
            return LimitCycle(polyline=poly, period=period, winding=winding)
        t_done += leg.t_max
        y_cur = traj.final_state
    return None


def _find_recurrence(times, states, state_tol, period_tol):
    if len(times) < 3:
        return None
    for i in range(1, len(times) - 1):
        d_prev = states[i] - states[i - 1]
        d_next = states[i + 1] - states[i]
        w_prev = np.round(d_prev / TWO_PI).astype(int)
        w_next = np.round(d_next / TWO_PI).astype(int)
        if w_next[0] == 0:
            continue   # no rotation in delta1 between these crossings
        same_state = np.max(np.abs(d_next - TWO_PI * w_next)) < state_tol \
            and np.max(np.abs(d_prev - TWO_PI * w_prev)) < state_tol
        same_period = abs((times[i + 1] - times[i]) - (times[i] - times[i - 1])) < period_tol
        if same_state and same_period and np.array_equal(w_prev, w_next):
            return i, float(times[i + 1] - times[i]), (int(w_next[0]), int(w_next[1]))
    return None


def _sample_period(model, y0: np.ndarray, period: float, n: int = 1200) -> np.ndarray:
    from scipy.integrate import solve_ivp
    t_eval = np.linspace(0.0, period, n)
    sol = solve_ivp(lambda t, y: model.rhs(y), (0.0, period), y0,
                    method="RK45", rtol=1e-10, atol=1e-12, t_eval=t_eval)
    return sol.y.T


# ---------------------------------------------------------------------------
# Forward-simulation basin oracle
# ---------------------------------------------------------------------------

def basin_grid(sys: TwoInverterSystem, mode: RhsMode, sep: Equilibrium,
               half_width: float = math.pi, n: int = 41,
               t_max: float = 10.0, dt: float = 1e-3,
               conv_tol: float = 1e-3):
    """Classify an n x n grid by forward simulation.

    Returns (points, stable_mask): a point is stable when its trajectory
    ends within conv_tol of the unwrapped equilibrium (convergence one or
    more periods away counts as unstable). All points advance together in a
    vectorized fixed-step integrator.
    """
    model = build_model(sys, mode)
    c = sep.state
    ticks = np.linspace(-half_width, half_width, n)
    g1, g2 = np.meshgrid(c[0] + ticks, c[1] + ticks, indexing="ij")
    pts = np.stack([g1.ravel(), g2.ravel()], axis=-1)

    escape = half_width + TWO_PI

    def freeze(y):
        near = np.linalg.norm(y - c, axis=-1) < 0.2 * conv_tol
        gone = np.max(np.abs(y - c), axis=-1) > escape
        return near | gone

    final = rk4_grid(model.rhs, pts, dt=dt, t_max=t_max, freeze_fn=freeze)
    stable = np.linalg.norm(final - c, axis=-1) < conv_tol
    return pts, stable


def basin_agreement(doa: DOABoundary, sys: TwoInverterSystem, mode: RhsMode,
                    n: int = 41, band: float = 0.05, t_max: float = 10.0,
                    dt: float = 1e-3) -> float:
    """Fraction of off-boundary grid points where polygon membership and the
    forward-simulation oracle agree."""
    pts, stable = basin_grid(sys, mode, doa.sep, doa.half_width, n=n,
                             t_max=t_max, dt=dt)
    inside = contains_batch(doa, pts)
    dists = np.array([geo.point_polyline_distance(p, doa.closed_polygon)
                      for p in pts])
    keep = dists > band
    if not keep.any():
        return 1.0
    return float(np.mean(inside[keep] == stable[keep]))
