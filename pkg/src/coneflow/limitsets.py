"""Omega-limit estimation, flow/direction-field alignment, and classification.

The classifier is a sample-based decision tree: tight point clouds are fixed
points; recurrent trajectories whose tail aligns with the dominant direction
field are limit cycles; multiple equilibrium clusters joined by aligned arcs
are reported as such; tails transversal to the cone everywhere are
non-aligned (non-attracting) sets. Anything ambiguous degrades to
Inconclusive rather than guessing.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynsys import ChartTopology, CoordKind, SystemDef, linearize
from .errors import InvalidInput, NoPeriod, NonContractive, NotHyperbolic
from .geometry import cone_contains, hilbert_distance
from .integrate import DEFAULT_STEP, flow, variational_flow
from .pffield import pf_vector_at

TWO_PI = 2.0 * math.pi


class LimitSetVerdict(enum.Enum):
    FIXED_POINT = "FixedPoint"
    LIMIT_CYCLE = "LimitCycle"
    FIXED_POINTS_AND_ARCS = "FixedPointsAndArcs"
    NON_ALIGNED = "NonAligned"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class OmegaSet:
    """Tail sample cloud of a trajectory after the transient cut."""

    points: np.ndarray
    source: np.ndarray
    t_transient: float
    t_tail: float

    def __post_init__(self):
        if len(self.points) == 0:
            raise InvalidInput("omega estimate produced no points")

    def to_csv(self, path):
        n = self.points.shape[1]
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(f"x_{i + 1}" for i in range(n)) + "\n")
            for row in self.points:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass(frozen=True)
class Section:
    """Hyperplane through `point` with normal `normal`."""

    point: np.ndarray
    normal: np.ndarray


@dataclass
class AlignmentPoint:
    x: np.ndarray
    distance: float
    tag: str  # "aligned", "equilibrium", "not_in_cone", or "pf_error:..."


@dataclass
class ClassifySettings:
    t_max: float = 200.0
    h: float = 1e-2
    tail_fraction: float = 0.5
    fp_tol: float = 1e-4  # cloud diameter below this is a fixed point
    align_tol: float = 1e-2  # projective distance between f and the direction field
    period_spread: float = 1e-3  # relative spread of section-crossing gaps
    pf_window: float = 3.0
    pf_tol: float = 1e-3
    pf_max_doublings: int = 4
    profile_points: int = 10
    growth_threshold: float = 20.0  # nats over t_max
    equilibrium_speed: float = 1e-6  # |f| below this marks an equilibrium point
    cluster_radius: float = 1e-2


@dataclass
class LimitSetReport:
    verdict: LimitSetVerdict
    alignment_max: Optional[float]
    period: Optional[float]
    growth_flag: bool
    location: Optional[np.ndarray]
    omega: OmegaSet
    note: str = ""

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "alignment_max": self.alignment_max,
            "period": self.period,
            "growth_flag": self.growth_flag,
            "location": None if self.location is None else self.location.tolist(),
            "n_omega_points": int(len(self.omega.points)),
            "t_transient": self.omega.t_transient,
            "t_tail": self.omega.t_tail,
            "note": self.note,
        }

    def to_json(self, path):
        with open(path, "w", newline="\n") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")


def verdict_table(reports: Sequence["LimitSetReport"]) -> str:
    """Fixed-format summary table for a batch of classification reports."""
    lines = [f"{'#':>3}  {'verdict':<20} {'period':>12} {'align_max':>12} {'growth':>6}  note"]
    for i, r in enumerate(reports):
        period = "-" if r.period is None else f"{r.period:12.6g}"
        align = "-" if r.alignment_max is None else f"{r.alignment_max:12.4g}"
        lines.append(
            f"{i:>3}  {r.verdict.value:<20} {period:>12} {align:>12} {str(r.growth_flag):>6}  {r.note}"
        )
    return "\n".join(lines) + "\n"


def omega_estimate(sys: SystemDef, x0, u=None, t_max: float = 200.0, tail_fraction: float = 0.2,
                   h: float = DEFAULT_STEP) -> OmegaSet:
    """Keep the last tail_fraction of a flow as the limit-set estimate."""
    if not (0.0 < tail_fraction <= 1.0):
        raise InvalidInput("tail_fraction must be in (0, 1]")
    traj = flow(sys, x0, u=u, t_span=(0.0, t_max), h=h)
    cut = traj.times[-1] - tail_fraction * (traj.times[-1] - traj.times[0])
    mask = traj.times >= cut
    return OmegaSet(
        points=traj.states[mask],
        source=np.asarray(x0, dtype=float),
        t_transient=float(cut),
        t_tail=float(traj.times[-1]),
    )


def _section_offsets(traj_states, section: Section, topology: Optional[ChartTopology]):
    nu = np.asarray(section.normal, dtype=float)
    p = np.asarray(section.point, dtype=float)
    deltas = traj_states - p
    jump_guard = math.inf
    if topology is not None:
        circ = list(topology.circle_axes)
        if circ:
            for i in circ:
                deltas[:, i] = np.remainder(deltas[:, i] + math.pi, TWO_PI) - math.pi
            jump_guard = math.pi * float(np.sum(np.abs(nu[circ])))
            if jump_guard == 0.0:
                jump_guard = math.inf
    return deltas @ nu, jump_guard


def detect_period(traj, section: Section, topology: Optional[ChartTopology] = None,
                  spread_tol: float = 1e-3) -> Optional[float]:
    """Period from same-direction section crossings (linear interpolation).

    Returns the mean gap when the gaps' relative spread is below spread_tol,
    None when the crossings are too irregular; raises NoPeriod with fewer
    than 3 crossings.
    """
    g, jump_guard = _section_offsets(traj.states, section, topology)
    t = traj.times
    crossings = []
    for i in range(len(g) - 1):
        if g[i] < 0.0 <= g[i + 1] and abs(g[i + 1] - g[i]) < jump_guard:
            frac = -g[i] / (g[i + 1] - g[i])
            crossings.append(t[i] + frac * (t[i + 1] - t[i]))
    if len(crossings) < 3:
        raise NoPeriod(f"only {len(crossings)} same-direction crossings")
    gaps = np.diff(crossings)
    mean = float(np.mean(gaps))
    spread = float((np.max(gaps) - np.min(gaps)) / mean) if mean > 0 else math.inf
    if spread > spread_tol:
        return None
    return mean


def alignment_profile(
    sys: SystemDef,
    u,
    omega: OmegaSet,
    max_points: int = 24,
    pf_window: float = 3.0,
    pf_tol: float = 1e-3,
    pf_max_doublings: int = 4,
    h: float = 1e-2,
    equilibrium_speed: float = 1e-6,
    abort_after_errors: int = 3,
) -> List[AlignmentPoint]:
    """Projective distance between f(x) (or -f(x)) and the direction field.

    Points with |f| below equilibrium_speed are tagged as equilibria; points
    where neither +f nor -f lies in the cone are tagged not_in_cone with
    distance inf. Per-point field errors are tagged, and profiling aborts
    early once the first abort_after_errors points all fail (non-strict
    systems have no field anywhere).
    """
    idx = np.unique(np.linspace(0, len(omega.points) - 1, min(max_points, len(omega.points))).astype(int))
    out: List[AlignmentPoint] = []
    consecutive_errors = 0
    for i in idx:
        x = omega.points[i]
        fx = sys.eval_field(x, u)
        speed = float(np.linalg.norm(fx))
        if speed < equilibrium_speed:
            out.append(AlignmentPoint(x=x, distance=0.0, tag="equilibrium"))
            continue
        cone = sys.cone_field.cone_at(x)
        direction = None
        for sign in (+1.0, -1.0):
            cand = sign * fx / speed
            if cone_contains(cone, cand, tol=1e-9):
                direction = cand
                break
        if direction is None:
            out.append(AlignmentPoint(x=x, distance=math.inf, tag="not_in_cone"))
            continue
        try:
            pf = pf_vector_at(sys, x, u=u, window=pf_window, tol=pf_tol, h=h, max_doublings=pf_max_doublings)
        except Exception as exc:
            out.append(AlignmentPoint(x=x, distance=math.nan, tag=f"pf_error:{type(exc).__name__}"))
            consecutive_errors += 1
            if consecutive_errors >= abort_after_errors and all(p.tag.startswith("pf_error") for p in out):
                break
            continue
        consecutive_errors = 0
        d = hilbert_distance(cone, direction, pf.w).value
        out.append(AlignmentPoint(x=x, distance=d, tag="aligned"))
    return out


def _circle_aware_diameter(points, topology: Optional[ChartTopology]):
    spans = []
    circ = set(topology.circle_axes) if topology is not None else set()
    for axis in range(points.shape[1]):
        col = points[:, axis]
        if axis in circ:
            rel = np.remainder(col - col[0] + math.pi, TWO_PI) - math.pi
            spans.append(np.ptp(rel))
        else:
            spans.append(np.ptp(col))
    return float(np.linalg.norm(spans))


def _circle_aware_mean(points, topology: Optional[ChartTopology]):
    circ = set(topology.circle_axes) if topology is not None else set()
    out = np.mean(points, axis=0)
    for axis in circ:
        rel = np.remainder(points[:, axis] - points[0, axis] + math.pi, TWO_PI) - math.pi
        out[axis] = np.remainder(points[0, axis] + np.mean(rel), TWO_PI)
    return out


def _equilibrium_clusters(sys, u, points, speed_tol, radius, topology):
    """Greedy clustering of near-zero-speed points; returns cluster centers."""
    slow = [x for x in points if float(np.linalg.norm(sys.eval_field(x, u))) < speed_tol]
    centers: List[np.ndarray] = []
    for x in slow:
        matched = False
        for c in centers:
            delta = x - c
            if topology is not None:
                for axis in topology.circle_axes:
                    delta[axis] = math.remainder(delta[axis], TWO_PI)
            if np.linalg.norm(delta) <= radius:
                matched = True
                break
        if not matched:
            centers.append(np.array(x, dtype=float))
    return centers


def detect_fixed_points_and_arcs(sys: SystemDef, u, omega: OmegaSet, settings: ClassifySettings):
    """Heuristic for limit sets made of several equilibria plus aligned arcs.

    Returns (True, detail) when at least two equilibrium clusters exist and
    the non-equilibrium points align with the direction field; (False, detail)
    otherwise. Ambiguity is reported as False so the caller degrades to
    Inconclusive instead of guessing.
    """
    speed_tol = max(settings.equilibrium_speed, 1e-4)
    centers = _equilibrium_clusters(
        sys, u, omega.points, speed_tol, max(settings.cluster_radius, 10 * settings.fp_tol), sys.topology
    )
    if len(centers) < 2:
        return False, f"{len(centers)} equilibrium cluster(s)"
    arc_points = OmegaSet(
        points=np.array([x for x in omega.points if float(np.linalg.norm(sys.eval_field(x, u))) >= speed_tol]),
        source=omega.source,
        t_transient=omega.t_transient,
        t_tail=omega.t_tail,
    )
    profile = alignment_profile(
        sys, u, arc_points,
        max_points=settings.profile_points,
        pf_window=settings.pf_window,
        pf_tol=settings.pf_tol,
        pf_max_doublings=settings.pf_max_doublings,
        h=settings.h,
        equilibrium_speed=settings.equilibrium_speed,
    )
    aligned = [p for p in profile if p.tag == "aligned"]
    if not aligned or any(p.tag == "not_in_cone" for p in profile):
        return False, "arc points not verifiably aligned"
    worst = max(p.distance for p in aligned)
    if worst <= settings.align_tol:
        return True, f"{len(centers)} clusters, arc alignment {worst:.2e}"
    return False, f"arc alignment {worst:.2e} above tolerance"


def classify_limit_set(sys: SystemDef, u, x0, settings: Optional[ClassifySettings] = None) -> LimitSetReport:
    """Decision tree over the tail of one trajectory (see module docstring)."""
    s = settings or ClassifySettings()
    traj = flow(sys, x0, u=u, t_span=(0.0, s.t_max), h=s.h)
    cut = s.t_max * (1.0 - s.tail_fraction)
    mask = traj.times >= cut
    omega = OmegaSet(points=traj.states[mask], source=np.asarray(x0, dtype=float),
                     t_transient=float(cut), t_tail=float(traj.times[-1]))

    diameter = _circle_aware_diameter(omega.points, sys.topology)
    if diameter < s.fp_tol:
        return LimitSetReport(
            verdict=LimitSetVerdict.FIXED_POINT,
            alignment_max=None,
            period=None,
            growth_flag=False,
            location=_circle_aware_mean(omega.points, sys.topology),
            omega=omega,
            note=f"cloud diameter {diameter:.2e}",
        )

    tail_traj_states = traj.states[mask]
    tail_times = traj.times[mask]
    from .integrate import Trajectory

    tail = Trajectory(times=tail_times, states=tail_traj_states, wrap_counts=traj.wrap_counts[mask])
    centroid = _circle_aware_mean(omega.points, sys.topology)
    f_c = sys.eval_field(centroid, u)
    period = None
    if float(np.linalg.norm(f_c)) > 0:
        try:
            period = detect_period(tail, Section(point=centroid, normal=f_c / np.linalg.norm(f_c)),
                                   topology=sys.topology, spread_tol=s.period_spread)
        except NoPeriod:
            period = None

    profile = alignment_profile(
        sys, u, omega,
        max_points=s.profile_points,
        pf_window=s.pf_window,
        pf_tol=s.pf_tol,
        pf_max_doublings=s.pf_max_doublings,
        h=s.h,
        equilibrium_speed=s.equilibrium_speed,
    )
    aligned = [p.distance for p in profile if p.tag == "aligned"]
    not_in_cone = [p for p in profile if p.tag == "not_in_cone"]
    pf_errors = [p for p in profile if p.tag.startswith("pf_error")]
    alignment_max = max(aligned) if aligned else None

    if period is not None and alignment_max is not None and alignment_max <= s.align_tol and not not_in_cone:
        return LimitSetReport(
            verdict=LimitSetVerdict.LIMIT_CYCLE,
            alignment_max=alignment_max,
            period=period,
            growth_flag=False,
            location=None,
            omega=omega,
            note="recurrent aligned tail",
        )

    arcs, detail = detect_fixed_points_and_arcs(sys, u, omega, s)
    if arcs:
        return LimitSetReport(
            verdict=LimitSetVerdict.FIXED_POINTS_AND_ARCS,
            alignment_max=alignment_max,
            period=period,
            growth_flag=False,
            location=None,
            omega=omega,
            note=detail,
        )

    if not_in_cone and not aligned:
        # tail transversal to the cone wherever f != 0: measure the
        # variational growth ledger to separate the two non-aligned modes
        _, _, logs = variational_flow(
            sys, x0, np.ones(sys.dim) / math.sqrt(sys.dim), u=u,
            t_span=(0.0, s.t_max), h=s.h, renormalize=True,
        )
        growth = bool(logs[-1] > s.growth_threshold)
        return LimitSetReport(
            verdict=LimitSetVerdict.NON_ALIGNED,
            alignment_max=math.inf,
            period=period,
            growth_flag=growth,
            location=None,
            omega=omega,
            note=f"tail outside the cone; log-growth {logs[-1]:.2f} nats",
        )

    note = "mixed alignment evidence"
    if pf_errors and not aligned:
        note = "direction field unavailable on the tail (non-strict dynamics?)"
    return LimitSetReport(
        verdict=LimitSetVerdict.INCONCLUSIVE,
        alignment_max=alignment_max,
        period=period,
        growth_flag=False,
        location=None,
        omega=omega,
        note=note,
    )


def invariant_region_check(
    sys: SystemDef,
    u,
    region: Sequence[Tuple[float, float]],
    samples: int = 200,
    horizon: float = 1.0,
    h: float = 1e-2,
    seed: int = 0,
) -> Tuple[bool, float]:
    """Strict conal interiority of f on a box plus a forward-invariance spot check.

    Circle axes spanning a full period have no faces and are sampled over the
    whole circle. Returns (ok, margin) where margin is the smallest facet
    value of f over the interior samples (negative when interiority fails).
    """
    region = [(float(lo), float(hi)) for lo, hi in region]
    if len(region) != sys.dim:
        raise InvalidInput("region must have one (lo, hi) pair per dimension")
    rng = np.random.default_rng(seed)
    full_circle = [
        i in sys.topology.circle_axes and region[i][1] - region[i][0] >= TWO_PI - 1e-9
        for i in range(sys.dim)
    ]

    def sample_interior():
        return np.array([rng.uniform(lo, hi) for (lo, hi) in region])

    margin = math.inf
    ok = True
    for _ in range(samples):
        x = sample_interior()
        fx = sys.eval_field(x, u)
        vals = sys.cone_field.cone_at(x).halfspaces @ fx
        margin = min(margin, float(np.min(vals)))
        if not cone_contains(sys.cone_field.cone_at(x), fx, strict=True):
            ok = False
    if not ok:
        return False, margin

    # forward-invariance spot check from face samples
    def inside(x):
        for i, (lo, hi) in enumerate(region):
            if full_circle[i]:
                continue
            if not (lo - 1e-9 <= x[i] <= hi + 1e-9):
                return False
        return True

    per_face = max(4, samples // (4 * sys.dim))
    for axis in range(sys.dim):
        if full_circle[axis]:
            continue
        for edge in (0, 1):
            for _ in range(per_face):
                x = sample_interior()
                x[axis] = region[axis][edge]
                traj = flow(sys, x, u=u, t_span=(0.0, horizon), h=h)
                if not inside(traj.states[-1]):
                    return False, margin
    return True, margin


@dataclass
class ArcResult:
    sign: float
    status: str  # "arrived", "diverged", "no_equilibrium"
    omega_point: Optional[np.ndarray]
    arrival_angle: Optional[float]


@dataclass
class SaddleReport:
    saddle: np.ndarray
    eigenvalues: np.ndarray
    unstable_direction: np.ndarray
    dominant_direction: np.ndarray
    unstable_vs_dominant_angle: float
    arcs: List[ArcResult]


def _angle_between(a, b):
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    c = abs(float(a @ b))
    return math.acos(min(1.0, c))


def saddle_tangency_diagnostic(
    sys: SystemDef,
    u,
    saddle,
    tol: float = 1e-2,
    seed_offset: float = 1e-4,
    t_max: float = 80.0,
    h: float = 1e-2,
    arrival_radius: float = 1e-3,
) -> SaddleReport:
    """Launch arcs along the unstable eigendirection of a hyperbolic saddle and
    measure their arrival tangency against the dominant eigendirection of the
    linearization at the receiving equilibrium."""
    saddle = np.asarray(saddle, dtype=float)
    A, _ = linearize(sys, saddle, u)
    eigvals, eigvecs = np.linalg.eig(A)
    re = eigvals.real
    eps = 1e-9
    if np.any(np.abs(re) < eps) or not (np.any(re > eps) and np.any(re < -eps)):
        raise NotHyperbolic(f"eigenvalues {np.sort_complex(eigvals)} do not split into stable/unstable")
    i_unstable = int(np.argmax(re))
    if abs(eigvals[i_unstable].imag) > 1e-9:
        raise NotHyperbolic("dominant unstable eigenvalue is complex")
    v_u = np.real(eigvecs[:, i_unstable])
    v_u = v_u / np.linalg.norm(v_u)
    # dominant direction of the linearization, sign-fixed into the cone when possible
    w_saddle = v_u.copy()
    cone = sys.cone_field.cone_at(saddle)
    vals = cone.halfspaces @ w_saddle
    if np.all(vals <= 0):
        w_saddle = -w_saddle
    angle = _angle_between(v_u, w_saddle)

    arcs: List[ArcResult] = []
    for sign in (+1.0, -1.0):
        x0 = saddle + sign * seed_offset * v_u
        try:
            traj = flow(sys, x0, u=u, t_span=(0.0, t_max), h=h)
        except Exception as exc:
            arcs.append(ArcResult(sign=sign, status=f"diverged:{type(exc).__name__}", omega_point=None, arrival_angle=None))
            continue
        endpoint = traj.states[-1]
        f_end = sys.eval_field(endpoint, u)
        if float(np.linalg.norm(f_end)) > 1e-6:
            arcs.append(ArcResult(sign=sign, status="no_equilibrium", omega_point=None, arrival_angle=None))
            continue
        A_end, _ = linearize(sys, endpoint, u)
        vals_end, vecs_end = np.linalg.eig(A_end)
        w_end = np.real(vecs_end[:, int(np.argmax(vals_end.real))])
        # tangency measured where the arc first enters the arrival ball
        dist = np.linalg.norm(traj.states - endpoint, axis=1)
        inside = np.where(dist < arrival_radius)[0]
        k = int(inside[0]) if len(inside) else len(traj.states) - 1
        if k == len(traj.states) - 1 and len(inside) > 1:
            k = int(inside[1])
        tangent = sys.eval_field(traj.states[k], u)
        arcs.append(
            ArcResult(
                sign=sign,
                status="arrived",
                omega_point=endpoint,
                arrival_angle=_angle_between(tangent, w_end),
            )
        )
    return SaddleReport(
        saddle=saddle,
        eigenvalues=eigvals,
        unstable_direction=v_u,
        dominant_direction=w_saddle,
        unstable_vs_dominant_angle=angle,
        arcs=arcs,
    )
