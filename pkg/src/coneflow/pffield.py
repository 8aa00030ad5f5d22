"""The dominant interior direction field of a strictly positive system.

Backward-window construction: integrate backward from x, push a deep-interior
probe forward with the renormalizing variational flow, and double the window
until successive results agree in the Hilbert metric. For constant inputs the
result is a time-invariant unit vector field; on linear positive systems it
collapses to the classical Perron eigenvector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .dynsys import SystemDef, TimeKind, linearize
from .errors import InvalidInput, NeedsDenserGrid, NonContractive, OutsideCone
from .geometry import cone_contains, hilbert_distance
from .integrate import DEFAULT_STEP, DIVERGENCE_GUARD, flow, reversed_system, variational_flow

DEFAULT_WINDOW = 2.0
DEFAULT_TOL = 1e-6
MAX_DOUBLINGS = 10  # cap at 2**10 times the initial window
MAX_GRID_SPACING = 0.1  # finite differences on sampled fields need this density


@dataclass(frozen=True)
class PFVector:
    """Unit interior direction at x with its convergence diagnostics."""

    x: np.ndarray
    w: np.ndarray
    residual_hilbert: float
    window: float


@dataclass(frozen=True)
class PFResidual:
    """Defect of the direction-field transport identity at x."""

    x: np.ndarray
    pde_residual: float
    lam: float


def _fix_sign(cone, w):
    vals = cone.halfspaces @ w
    for v in vals:
        if abs(v) > 1e-12:
            return w if v > 0 else -w
    return w


def pf_vector_at(
    sys: SystemDef,
    x,
    u=None,
    window: float = DEFAULT_WINDOW,
    tol: float = DEFAULT_TOL,
    h: float = DEFAULT_STEP,
    max_doublings: int = MAX_DOUBLINGS,
    guard: float = DIVERGENCE_GUARD,
) -> PFVector:
    """Dominant direction at x for a constant input, by window doubling.

    Raises NonContractive when the successive-window gap plateaus above tol
    (non-strict systems) and propagates Diverged when a backward window
    escapes the guard.
    """
    if sys.time_kind is not TimeKind.CONTINUOUS:
        raise InvalidInput("the backward-window construction needs a continuous system (invertible discrete maps are not modeled)")
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.dim,):
        raise InvalidInput("x dimension mismatch")
    cone_x = sys.cone_field.cone_at(x)
    back = reversed_system(sys)
    W = float(window)
    if W <= 0:
        raise InvalidInput("window must be positive")
    w_prev = None
    gap = math.inf
    mutual = math.inf
    for _ in range(max_doublings + 1):
        back_traj = flow(back, x, u=u, t_span=(0.0, W), h=h, guard=guard)
        z = back_traj.states[-1]
        gens = sys.cone_field.cone_at(z).generators
        probe = gens.mean(axis=0)
        probe = probe / np.linalg.norm(probe)
        # second, skewed interior probe: its pushed image must coincide with
        # the primary one, which is what actual cone contraction delivers;
        # transport-equivariant cones (no contraction) keep the two apart
        skew = (np.arange(1, len(gens) + 1) / len(gens)) @ gens
        skew = skew / np.linalg.norm(skew)
        _, tangents, _ = variational_flow(sys, z, probe, u=u, t_span=(0.0, W), h=h, renormalize=True, guard=guard)
        w = _fix_sign(cone_x, tangents[-1])
        _, tangents2, _ = variational_flow(sys, z, skew, u=u, t_span=(0.0, W), h=h, renormalize=True, guard=guard)
        w2 = _fix_sign(cone_x, tangents2[-1])
        try:
            mutual = hilbert_distance(cone_x, w, w2).value
        except OutsideCone:
            mutual = math.inf
        if w_prev is not None:
            try:
                gap = hilbert_distance(cone_x, w, w_prev).value
            except OutsideCone:
                gap = math.inf
            if gap < tol and mutual < tol:
                if not cone_contains(cone_x, w, strict=True):
                    raise NonContractive("converged direction is not strictly interior; system is not strictly positive here")
                return PFVector(x=x, w=w, residual_hilbert=gap, window=W)
        w_prev = w
        W *= 2.0
    raise NonContractive(f"window doubling plateaued (successive gap {gap:g}, probe separation {mutual:g}, tol {tol:g})")


@dataclass
class SampledPFField:
    """Direction field sampled on a rectangular grid, with per-cell failures."""

    points: np.ndarray  # (N, n) grid nodes in row-major cell order
    vectors: np.ndarray  # (N, n) unit directions, NaN rows for failed cells
    shape: Tuple[int, ...]
    spacing: np.ndarray  # per-axis grid step (0 for singleton axes)
    errors: Dict[int, str] = field(default_factory=dict)
    windows: np.ndarray = None
    residuals: np.ndarray = None

    @property
    def ok_mask(self) -> np.ndarray:
        return ~np.isnan(self.vectors[:, 0])

    def node_index(self, multi_index) -> int:
        return int(np.ravel_multi_index(multi_index, self.shape))

    def to_csv(self, path):
        n = self.points.shape[1]
        header = [f"x_{i + 1}" for i in range(n)] + [f"w_{i + 1}" for i in range(n)] + ["residual", "window"]
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(len(self.points)):
                if not self.ok_mask[i]:
                    continue
                row = [f"{v:.17g}" for v in self.points[i]]
                row += [f"{v:.17g}" for v in self.vectors[i]]
                row += [f"{self.residuals[i]:.17g}", f"{self.windows[i]:.17g}"]
                fh.write(",".join(row) + "\n")


def grid_axes(sys: SystemDef, box, shape) -> List[np.ndarray]:
    """Per-axis sample points: circle axes are half-open, others inclusive."""
    from .dynsys import CoordKind

    box = [(float(lo), float(hi)) for lo, hi in box]
    if len(box) != sys.dim or len(shape) != sys.dim:
        raise InvalidInput("box/shape must have one entry per state dimension")
    axes = []
    for i, ((lo, hi), count) in enumerate(zip(box, shape)):
        if count < 1:
            raise InvalidInput("grid resolution must be >= 1")
        if count == 1:
            axes.append(np.array([lo]))
        elif sys.topology.kinds[i] is CoordKind.CIRCLE:
            axes.append(np.linspace(lo, hi, count, endpoint=False))
        else:
            axes.append(np.linspace(lo, hi, count))
    return axes


def pf_field_on_grid(
    sys: SystemDef,
    u=None,
    box=None,
    shape=None,
    window: float = DEFAULT_WINDOW,
    tol: float = DEFAULT_TOL,
    h: float = DEFAULT_STEP,
    max_doublings: int = MAX_DOUBLINGS,
    guard: float = DIVERGENCE_GUARD,
) -> SampledPFField:
    """Elementwise pf_vector_at over a grid; per-cell failures are recorded, not fatal."""
    axes = grid_axes(sys, box, shape)
    spacing = np.array([ax[1] - ax[0] if len(ax) > 1 else 0.0 for ax in axes])
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    n = sys.dim
    vectors = np.full((len(points), n), np.nan)
    windows = np.full(len(points), np.nan)
    residuals = np.full(len(points), np.nan)
    errors: Dict[int, str] = {}
    for idx in range(len(points)):  # row-major cell order keeps output deterministic
        try:
            pf = pf_vector_at(
                sys, points[idx], u=u, window=window, tol=tol, h=h, max_doublings=max_doublings, guard=guard
            )
            vectors[idx] = pf.w
            windows[idx] = pf.window
            residuals[idx] = pf.residual_hilbert
        except Exception as exc:  # per-cell error tags
            errors[idx] = f"{type(exc).__name__}: {exc}"
    return SampledPFField(
        points=points,
        vectors=vectors,
        shape=tuple(shape),
        spacing=spacing,
        errors=errors,
        windows=windows,
        residuals=residuals,
    )


def _nearest_node(fld: SampledPFField, x):
    d = np.linalg.norm(fld.points - np.asarray(x, dtype=float), axis=1)
    return int(np.argmin(d))


def pf_residual(sys: SystemDef, u, fld: SampledPFField, x) -> PFResidual:
    """Transport-identity defect of the sampled field at a grid node.

    Continuous systems: residual = ||(dw/dx) f - A w + lam w|| with the
    multiplier lam that preserves unit norm. Discrete systems: least-squares
    defect of w(f(x)) = lam * A w using the nearest sampled node to f(x).
    """
    x = np.asarray(x, dtype=float)
    live_axes = [i for i, s in enumerate(fld.shape) if s > 1]
    if any(fld.spacing[i] > MAX_GRID_SPACING + 1e-12 for i in live_axes):
        raise NeedsDenserGrid(f"grid spacing {fld.spacing} exceeds {MAX_GRID_SPACING}")
    idx = _nearest_node(fld, x)
    if np.linalg.norm(fld.points[idx] - x) > float(np.max(fld.spacing)) + 1e-12:
        raise NeedsDenserGrid("x is not near a grid node")
    if not fld.ok_mask[idx]:
        raise NeedsDenserGrid("field value missing at the nearest node")
    multi = np.unravel_index(idx, fld.shape)
    w = fld.vectors[idx]
    A, _ = linearize(sys, fld.points[idx], u)

    if sys.time_kind is TimeKind.DISCRETE:
        x_next = np.asarray(sys.field(fld.points[idx], sys._coerce_input(u)), dtype=float)
        jdx = _nearest_node(fld, x_next)
        if np.linalg.norm(fld.points[jdx] - x_next) > float(np.max(fld.spacing)) / 2.0 + 1e-12 or not fld.ok_mask[jdx]:
            raise NeedsDenserGrid("image point f(x) is not covered by the grid")
        w_next = fld.vectors[jdx]
        Aw = A @ w
        lam = float(w_next @ Aw) / float(Aw @ Aw)
        res = float(np.linalg.norm(w_next - lam * Aw))
        return PFResidual(x=fld.points[idx], pde_residual=res, lam=lam)

    # central differences of w along each live axis
    dw = np.zeros((sys.dim, sys.dim))
    for axis in live_axes:
        lo = list(multi)
        hi = list(multi)
        lo[axis] -= 1
        hi[axis] += 1
        if lo[axis] < 0 or hi[axis] >= fld.shape[axis]:
            raise NeedsDenserGrid(f"node lacks both neighbors along axis {axis}")
        i_lo = fld.node_index(lo)
        i_hi = fld.node_index(hi)
        if not (fld.ok_mask[i_lo] and fld.ok_mask[i_hi]):
            raise NeedsDenserGrid(f"missing neighbor values along axis {axis}")
        dw[:, axis] = (fld.vectors[i_hi] - fld.vectors[i_lo]) / (2.0 * fld.spacing[axis])

    fx = sys.eval_field(fld.points[idx], u)
    transport = dw @ fx
    drift = A @ w
    lam = float(w @ drift) - float(w @ transport)
    res = float(np.linalg.norm(transport - drift + lam * w))
    return PFResidual(x=fld.points[idx], pde_residual=res, lam=lam)
