"""Pointwise positivity certificates and finite-horizon cone contraction.

Verdicts are sample-based certificates, not proofs: every report carries the
number of samples checked so callers can scale density. A system passes the
pointwise test when the variational vector field points inward on every
sampled cone facet; it passes the strict test when pushed boundary rays land
strictly inside the cone after a horizon T with finite projective diameter.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynsys import SystemDef, TimeKind, linearize
from .errors import Diverged, InvalidCone, InvalidInput, LeftDomain, WrongConeKind
from .geometry import Cone, ConeField, cone_contains, contraction_ratio, hilbert_distance, projective_diameter
from .integrate import DEFAULT_STEP, matrix_variational_flow

# pointwise facet-derivative violation threshold (one order above integrator error)
POINTWISE_TOL = 1e-9
# strict interiority threshold <h_i, dx> >= STRICT_TOL * |dx|
STRICT_TOL = 1e-7
# step for the directional derivative of state-dependent facet covectors
FACET_FD_STEP = 1e-6


class Verdict(enum.Enum):
    POSITIVE = "Positive"
    NOT_POSITIVE = "NotPositive"
    INCONCLUSIVE = "Inconclusive"


class StrictVerdict(enum.Enum):
    STRICT = "Strict"
    NON_STRICT = "NonStrict"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class BoundarySample:
    """A unit tangent vector sitting on one facet of the cone at x."""

    x: np.ndarray
    dx: np.ndarray
    facet_index: int
    tight_set: Tuple[int, ...]


@dataclass(frozen=True)
class Witness:
    x: np.ndarray
    dx: np.ndarray
    facet_index: int
    kdot: float


@dataclass
class PositivityReport:
    verdict: Verdict
    witnesses: List[Witness]
    samples_checked: int
    min_margin: float

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "min_margin": self.min_margin,
            "samples_checked": self.samples_checked,
            "witnesses": [
                {
                    "x": w.x.tolist(),
                    "dx": w.dx.tolist(),
                    "facet_index": w.facet_index,
                    "kdot": w.kdot,
                }
                for w in self.witnesses
            ],
        }

    def to_json(self, path):
        with open(path, "w", newline="\n") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")


@dataclass
class ContractionReport:
    T: float
    diameter_estimate: float
    mu_T: float
    fitted_lambda: Optional[float]
    strict_verdict: StrictVerdict
    pointwise_verdict: Verdict
    samples_checked: int
    decay_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    decay_distances: np.ndarray = field(default_factory=lambda: np.empty(0))
    note: str = ""

    def to_dict(self):
        return {
            "T": self.T,
            "diameter_estimate": self.diameter_estimate,
            "mu_T": self.mu_T,
            "fitted_lambda": self.fitted_lambda,
            "strict_verdict": self.strict_verdict.value,
            "pointwise_verdict": self.pointwise_verdict.value,
            "samples_checked": self.samples_checked,
            "note": self.note,
        }

    def to_json(self, path):
        with open(path, "w", newline="\n") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    def decay_to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("t,max_pairwise_hilbert\n")
            for t, d in zip(self.decay_times, self.decay_distances):
                fh.write(f"{t:.17g},{d:.17g}\n")


def boundary_samples(cone_field: ConeField, x, per_facet: int = 1, seed: int = 0) -> List[BoundarySample]:
    """Unit tangent vectors on each facet of the cone at x.

    Facet points are convex combinations of the generators tight on that
    facet (for n = 2 a facet is a single ray and per_facet collapses to 1).
    """
    if per_facet < 1:
        raise InvalidInput("per_facet must be >= 1")
    x = np.asarray(x, dtype=float)
    cone = cone_field.cone_at(x)
    n = cone.dim
    if np.linalg.matrix_rank(cone.generators) < n:
        raise InvalidCone("cone at x is not solid")
    H = cone.halfspaces
    G = cone.generators
    scale = np.linalg.norm(H, axis=1)[:, None] * np.linalg.norm(G, axis=1)[None, :]
    vals = H @ G.T
    rng = np.random.default_rng(seed)
    out: List[BoundarySample] = []
    for i in range(H.shape[0]):
        tight_gens = G[np.abs(vals[i]) <= 1e-9 * scale[i]]
        if len(tight_gens) == 0:
            raise InvalidCone(f"halfspace {i} has no tight generators")
        count = 1 if len(tight_gens) == 1 else per_facet
        for s in range(count):
            if len(tight_gens) == 1:
                v = tight_gens[0]
            elif s < len(tight_gens) and per_facet >= len(tight_gens):
                v = tight_gens[s]  # include the extreme rays themselves first
            else:
                w = rng.dirichlet(np.ones(len(tight_gens)))
                v = w @ tight_gens
            v = v / np.linalg.norm(v)
            facet_vals = H @ v
            tight = tuple(int(j) for j in np.where(np.abs(facet_vals) <= 1e-9 * np.linalg.norm(H, axis=1))[0])
            out.append(BoundarySample(x=x, dx=v, facet_index=i, tight_set=tight))
    return out


def _facet_covector_derivative(cone_field: ConeField, x, facet_index: int, fx):
    """Directional derivative of the facet covector h_i along f, by central differences."""
    if not cone_field.smooth:
        return np.zeros_like(np.asarray(x, dtype=float))
    eps = FACET_FD_STEP
    hp = cone_field.cone_at(x + eps * fx).halfspaces[facet_index]
    hm = cone_field.cone_at(x - eps * fx).halfspaces[facet_index]
    return (hp - hm) / (2.0 * eps)


def _maxnorm_rescale(v):
    return v / np.max(np.abs(v))


def check_pointwise_positivity(
    sys: SystemDef,
    state_samples: Sequence,
    per_facet: int = 1,
    u=None,
    tol: float = POINTWISE_TOL,
) -> PositivityReport:
    """Facet-derivative test at every (state sample x boundary sample).

    Continuous systems: on a facet where k_j vanishes, the derivative
    k_j' = <h_j', dx> + <h_j, A(x) dx> must be >= -tol. Discrete systems:
    pushed boundary samples must satisfy every facet inequality at the image
    point. Margins are evaluated on the max-norm representative of the facet
    direction so reported numbers match hand computations with integer rays.
    """
    witnesses: List[Witness] = []
    min_margin = math.inf
    checked = 0
    discrete = sys.time_kind is TimeKind.DISCRETE
    for x in state_samples:
        x = np.asarray(x, dtype=float)
        samples = boundary_samples(sys.cone_field, x, per_facet=per_facet)
        if discrete:
            x_next = np.asarray(sys.field(x, sys._coerce_input(u)), dtype=float)
            cone_next = sys.cone_field.cone_at(x_next)
            A, _ = linearize(sys, x, u)
            for bs in samples:
                dxc = _maxnorm_rescale(bs.dx)
                vals = cone_next.halfspaces @ (A @ dxc)
                margin = float(np.min(vals))
                checked += 1
                min_margin = min(min_margin, margin)
                if margin < -tol:
                    witnesses.append(Witness(x=x, dx=bs.dx, facet_index=bs.facet_index, kdot=margin))
            continue
        fx = sys.eval_field(x, u)
        A, _ = linearize(sys, x, u)
        cone = sys.cone_field.cone_at(x)
        for bs in samples:
            dxc = _maxnorm_rescale(bs.dx)
            for j in bs.tight_set:
                hdot = _facet_covector_derivative(sys.cone_field, x, j, fx)
                kdot = float(hdot @ dxc + cone.halfspaces[j] @ (A @ dxc))
                checked += 1
                min_margin = min(min_margin, kdot)
                if kdot < -tol:
                    witnesses.append(Witness(x=x, dx=bs.dx, facet_index=j, kdot=kdot))
    verdict = Verdict.NOT_POSITIVE if witnesses else Verdict.POSITIVE
    return PositivityReport(verdict=verdict, witnesses=witnesses, samples_checked=checked, min_margin=min_margin)


def _is_orthant(cone: Cone) -> bool:
    H = cone.halfspaces
    if H.shape[0] != H.shape[1]:
        return False
    # rows must be positive multiples of distinct canonical basis covectors
    seen = set()
    for row in H:
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if len(nz) != 1 or row[nz[0]] <= 0:
            return False
        seen.add(int(nz[0]))
    return len(seen) == H.shape[1]


def metzler_check(sys: SystemDef, state_samples: Sequence, u=None, tol: float = POINTWISE_TOL) -> PositivityReport:
    """Orthant shortcut: all off-diagonal Jacobian entries >= -tol at all samples."""
    if sys.cone_field.smooth:
        raise WrongConeKind("Metzler test needs the constant positive orthant")
    probe = np.asarray(state_samples[0], dtype=float) if len(state_samples) else np.zeros(sys.dim)
    if not _is_orthant(sys.cone_field.cone_at(probe)):
        raise WrongConeKind("Metzler test needs the constant positive orthant")
    witnesses: List[Witness] = []
    min_margin = math.inf
    checked = 0
    eye = np.eye(sys.dim)
    for x in state_samples:
        x = np.asarray(x, dtype=float)
        A, _ = linearize(sys, x, u)
        for i in range(sys.dim):
            for j in range(sys.dim):
                if i == j:
                    continue
                checked += 1
                entry = float(A[i, j])
                min_margin = min(min_margin, entry)
                if entry < -tol:
                    witnesses.append(Witness(x=x, dx=eye[j], facet_index=i, kdot=entry))
    verdict = Verdict.NOT_POSITIVE if witnesses else Verdict.POSITIVE
    return PositivityReport(verdict=verdict, witnesses=witnesses, samples_checked=checked, min_margin=min_margin)


def check_strict_positivity(
    sys: SystemDef,
    state_samples: Sequence,
    T: float,
    per_facet: int = 1,
    u=None,
    h: float = DEFAULT_STEP,
    fit_horizon_factor: float = 3.0,
) -> ContractionReport:
    """Push boundary rays over a horizon T and measure cone contraction.

    Strict iff every pushed ray is strictly interior at time T and the
    pairwise Hilbert distances there are finite. The report carries the
    max-pairwise-distance decay curve out to fit_horizon_factor * T and the
    least-squares decay rate fitted on [T, fit_horizon_factor * T].
    """
    pointwise = check_pointwise_positivity(sys, state_samples, per_facet=per_facet, u=u)
    if pointwise.verdict is not Verdict.POSITIVE:
        return ContractionReport(
            T=T,
            diameter_estimate=math.inf,
            mu_T=1.0,
            fitted_lambda=None,
            strict_verdict=StrictVerdict.NON_STRICT,
            pointwise_verdict=pointwise.verdict,
            samples_checked=pointwise.samples_checked,
            note="pointwise positivity failed; strict contraction not evaluated",
        )

    t_end = fit_horizon_factor * T
    discrete = sys.time_kind is TimeKind.DISCRETE
    all_interior = True
    all_finite = True
    diameter_T = 0.0
    curve: dict = {}
    checked = 0
    note = ""
    for x in state_samples:
        x = np.asarray(x, dtype=float)
        rays = boundary_samples(sys.cone_field, x, per_facet=per_facet)
        directions = np.array([bs.dx for bs in rays])
        span = (0, int(round(t_end))) if discrete else (0.0, t_end)
        try:
            traj, mats, _ = matrix_variational_flow(sys, x, u=u, t_span=span, h=h, renormalize=True)
        except (Diverged, LeftDomain) as exc:
            return ContractionReport(
                T=T,
                diameter_estimate=math.inf,
                mu_T=1.0,
                fitted_lambda=None,
                strict_verdict=StrictVerdict.INCONCLUSIVE,
                pointwise_verdict=pointwise.verdict,
                samples_checked=checked,
                note=f"trajectory from {x.tolist()} failed: {exc}",
            )
        idx_T = int(np.argmin(np.abs(traj.times - T)))
        stride = max(1, (len(traj.times) - 1) // 240)
        sample_idx = sorted(set(range(1, len(traj.times), stride)) | {idx_T, len(traj.times) - 1})
        for k in sample_idx:
            cone_t = sys.cone_field.cone_at(traj.states[k])
            images = [mats[k] @ d for d in directions]
            if k == idx_T:
                checked += len(images)
                for img in images:
                    if not cone_contains(cone_t, img, strict=True, tol=STRICT_TOL * float(np.linalg.norm(img))):
                        all_interior = False
                try:
                    dia = projective_diameter(cone_t, images)
                except InvalidInput:
                    dia = math.inf
                if math.isinf(dia):
                    all_finite = False
                diameter_T = max(diameter_T, dia)
            dmax = 0.0
            for a in range(len(images)):
                for b in range(a + 1, len(images)):
                    try:
                        d = hilbert_distance(cone_t, images[a], images[b]).value
                    except Exception:
                        d = math.inf
                    dmax = max(dmax, d)
            t_k = float(traj.times[k])
            curve[t_k] = max(curve.get(t_k, 0.0), dmax)

    times = np.array(sorted(curve))
    dists = np.array([curve[t] for t in times])
    fitted = None
    mask = (times >= T) & (times <= t_end) & np.isfinite(dists) & (dists > 0)
    if np.count_nonzero(mask) >= 2:
        slope = np.polyfit(times[mask], np.log(dists[mask]), 1)[0]
        fitted = float(-slope)
    strict = all_interior and all_finite
    if strict:
        verdict = StrictVerdict.STRICT
    else:
        verdict = StrictVerdict.NON_STRICT
        note = note or "a pushed boundary ray stayed on the cone boundary at the horizon"
    return ContractionReport(
        T=T,
        diameter_estimate=diameter_T if all_finite else math.inf,
        mu_T=contraction_ratio(diameter_T if all_finite else math.inf),
        fitted_lambda=fitted,
        strict_verdict=verdict,
        pointwise_verdict=pointwise.verdict,
        samples_checked=checked,
        decay_times=times,
        decay_distances=dists,
        note=note,
    )
