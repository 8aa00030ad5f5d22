"""System definitions, chart topology, linearization, and the prolonged dynamics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import EvaluationError, InvalidInput, LeftDomain
from .geometry import ConeField

TWO_PI = 2.0 * np.pi


class CoordKind(enum.Enum):
    LINE = "line"
    CIRCLE = "circle"  # period 2*pi, reported in [0, 2*pi)
    POSITIVE = "positive"  # strictly positive half line


class TimeKind(enum.Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class ChartTopology:
    """Per-coordinate chart kinds for the state space."""

    kinds: Tuple[CoordKind, ...]

    @classmethod
    def lines(cls, n: int) -> "ChartTopology":
        return cls(kinds=tuple([CoordKind.LINE] * n))

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "ChartTopology":
        try:
            return cls(kinds=tuple(CoordKind(name) for name in names))
        except ValueError as exc:
            raise InvalidInput(f"unknown coordinate kind in {names!r}") from exc

    @property
    def dim(self) -> int:
        return len(self.kinds)

    @property
    def circle_axes(self) -> Tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is CoordKind.CIRCLE)

    @property
    def positive_axes(self) -> Tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is CoordKind.POSITIVE)


@dataclass(frozen=True)
class SystemDef:
    """A continuous or discrete dynamical system with a cone field attached.

    field(x, u) is the vector field (continuous) or the next state (discrete).
    jacobian/input_jacobian are optional analytic maps; central finite
    differences fill in when they are missing.
    """

    time_kind: TimeKind
    dim: int
    field: Callable
    topology: ChartTopology
    cone_field: ConeField
    jacobian: Optional[Callable] = None
    input_jacobian: Optional[Callable] = None
    input_dim: int = 0
    name: str = "system"

    @property
    def closed(self) -> bool:
        return self.input_dim == 0

    def eval_field(self, x, u=None):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.field(x, self._coerce_input(u)), dtype=float)
        if out.shape != (self.dim,) or not np.all(np.isfinite(out)):
            raise EvaluationError(f"vector field returned {out!r} at x={x!r}")
        return out

    def _coerce_input(self, u):
        if self.input_dim == 0:
            return None
        if u is None:
            raise InvalidInput(f"system expects an input of dimension {self.input_dim}")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.input_dim,):
            raise InvalidInput(f"input has shape {u.shape}, expected ({self.input_dim},)")
        return u


@dataclass(frozen=True)
class ProlongedState:
    """A base point paired with a tangent vector, evolved jointly."""

    x: np.ndarray
    dx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "dx", np.asarray(self.dx, dtype=float))
        if self.dx.shape != self.x.shape:
            raise InvalidInput("dx dimension differs from x")


def _fd_jacobian(func, x, dim_out):
    """Central differences with per-coordinate step 1e-6 * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    J = np.empty((dim_out, x.size))
    for i in range(x.size):
        h = 1e-6 * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (func(xp) - func(xm)) / (2.0 * h)
    return J


def linearize(sys: SystemDef, x, u=None):
    """State and input Jacobians (A, B) at a point; B has zero columns for closed systems."""
    x = np.asarray(x, dtype=float)
    uu = sys._coerce_input(u)
    if sys.jacobian is not None:
        A = np.asarray(sys.jacobian(x, uu), dtype=float)
    else:
        A = _fd_jacobian(lambda xx: sys.eval_field(xx, uu), x, sys.dim)
    if not np.all(np.isfinite(A)):
        raise EvaluationError(f"Jacobian not finite at x={x!r}")
    if sys.input_dim == 0:
        B = np.zeros((sys.dim, 0))
    elif sys.input_jacobian is not None:
        B = np.asarray(sys.input_jacobian(x, uu), dtype=float)
    else:
        B = _fd_jacobian(lambda v: sys.eval_field(x, v), uu, sys.dim)
    return A, B


def prolonged_rhs(sys: SystemDef, ps: ProlongedState, u=None, du=None):
    """Joint right-hand side (xdot, dxdot) of the base + variational dynamics.

    For discrete systems this is the joint update map (next x, next dx).
    """
    xdot = sys.eval_field(ps.x, u)
    A, B = linearize(sys, ps.x, u)
    dxdot = A @ ps.dx
    if sys.input_dim > 0 and du is not None:
        du = np.atleast_1d(np.asarray(du, dtype=float))
        if du.shape != (sys.input_dim,):
            raise InvalidInput("du dimension mismatch")
        dxdot = dxdot + B @ du
    return xdot, dxdot


def chart_normalize(sys: SystemDef, x):
    """Wrap circle coordinates into [0, 2*pi); returns (state, wrap counts).

    Positive-half-line coordinates at or below zero raise LeftDomain.
    """
    x = np.array(x, dtype=float)
    wraps = np.zeros(x.shape, dtype=int)
    for i in sys.topology.circle_axes:
        wraps[i] = int(np.floor(x[i] / TWO_PI))
        x[i] -= TWO_PI * wraps[i]
    for i in sys.topology.positive_axes:
        if x[i] <= 0.0:
            raise LeftDomain(f"coordinate {i} left the positive half line (value {x[i]:g})")
    return x, wraps


def validate_jacobian(sys: SystemDef, points, u=None, rtol=1e-4, atol=1e-5):
    """Check the supplied analytic Jacobian against central differences.

    Returns the worst absolute defect over the sample points; raises
    EvaluationError when it exceeds max(atol, rtol * ||A||).
    """
    worst = 0.0
    for x in points:
        A, _ = linearize(sys, x, u)
        Afd = _fd_jacobian(lambda xx: sys.eval_field(xx, sys._coerce_input(u)), np.asarray(x, float), sys.dim)
        defect = float(np.max(np.abs(A - Afd)))
        bound = max(atol, rtol * float(np.max(np.abs(A))))
        if defect > bound:
            raise EvaluationError(f"Jacobian mismatch {defect:g} > {bound:g} at x={x!r}")
        worst = max(worst, defect)
    return worst
