"""Fixed-step flows for the base, prolonged, and matrix-variational dynamics.

Classical RK4 with a fixed step (default 1e-3): deterministic, reproducible
decay curves matter more than speed here. Base and variational states are
advanced jointly by the same steps so both see an identical time
discretization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dynsys import SystemDef, TimeKind
from .errors import Diverged, EvaluationError, InvalidInput, LeftDomain

DEFAULT_STEP = 1e-3
DIVERGENCE_GUARD = 1e8
VARIATIONAL_GUARD = 1e12
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution: strictly increasing times, one state row per sample,
    and cumulative winding numbers for circle coordinates."""

    times: np.ndarray
    states: np.ndarray
    wrap_counts: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.states, dtype=float)
        w = np.asarray(self.wrap_counts, dtype=int)
        if len(t) != len(x) or len(t) != len(w):
            raise InvalidInput("times/states/wrap_counts length mismatch")
        if np.any(np.diff(t) <= 0):
            raise InvalidInput("times must be strictly increasing")
        if not np.all(np.isfinite(x)):
            raise InvalidInput("trajectory contains non-finite states")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "wrap_counts", w)

    def to_csv(self, path):
        n = self.states.shape[1]
        header = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"wrap_{i + 1}" for i in range(n)]
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for t, x, w in zip(self.times, self.states, self.wrap_counts):
                row = [f"{t:.17g}"] + [f"{v:.17g}" for v in x] + [str(int(c)) for c in w]
                fh.write(",".join(row) + "\n")

    def to_json(self, path):
        payload = {
            "times": [float(f"{t:.17g}") for t in self.times],
            "states": [[float(f"{v:.17g}") for v in row] for row in self.states],
            "wrap_counts": self.wrap_counts.tolist(),
        }
        with open(path, "w", newline="\n") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class FundamentalMatrix:
    """Fundamental solution of the variational equation along a trajectory."""

    t0: float
    t: float
    Psi: np.ndarray


def _constant_input(sys: SystemDef, u):
    if sys.input_dim == 0:
        return None
    return sys._coerce_input(u)


def _input_at(u, uconst, t):
    if callable(u):
        return np.atleast_1d(np.asarray(u(t), dtype=float))
    return uconst


def _wrap_state(sys: SystemDef, x, wraps):
    for i in sys.topology.circle_axes:
        k = math.floor(x[i] / TWO_PI)
        if k != 0:
            x[i] -= TWO_PI * k
            wraps[i] += k
    for i in sys.topology.positive_axes:
        if x[i] <= 0.0:
            raise LeftDomain(f"coordinate {i} reached {x[i]:g}")
    return x


def _check_state(x, t, guard):
    if not np.all(np.isfinite(x)):
        raise EvaluationError(f"non-finite state at t={t:g}")
    if np.max(np.abs(x)) > guard:
        raise Diverged(f"|x| exceeded {guard:g} at t={t:g}")


def _grid(t_span, h):
    t0, t1 = float(t_span[0]), float(t_span[1])
    if h <= 0:
        raise InvalidInput("step must be positive")
    if not (np.isfinite(t0) and np.isfinite(t1)) or t1 <= t0:
        raise InvalidInput("t_span must be finite with t1 > t0")
    n_full = int(math.floor((t1 - t0) / h + 1e-12))
    rem = (t1 - t0) - n_full * h
    return t0, n_full, rem


def flow(sys: SystemDef, x0, u=None, t_span=(0.0, 1.0), h=DEFAULT_STEP, guard=DIVERGENCE_GUARD) -> Trajectory:
    """Integrate the base dynamics; discrete systems iterate the map.

    u may be a constant input or a callable t -> input (integrator only)."""
    x = np.array(x0, dtype=float)
    if x.shape != (sys.dim,):
        raise InvalidInput(f"x0 has shape {x.shape}, system dim is {sys.dim}")
    wraps = np.zeros(sys.dim, dtype=int)
    x = _wrap_state(sys, x, wraps)

    if sys.time_kind is TimeKind.DISCRETE:
        n_steps = int(round(float(t_span[1]) - float(t_span[0])))
        if n_steps < 0:
            raise InvalidInput("discrete t_span must be a nonnegative step count")
        t0 = float(t_span[0])
        times = [t0]
        states = [x.copy()]
        wrap_hist = [wraps.copy()]
        uconst = None if callable(u) else _constant_input(sys, u)
        for k in range(n_steps):
            uk = _input_at(u, uconst, t0 + k)
            x = np.asarray(sys.field(x, uk if sys.input_dim else None), dtype=float)
            x = _wrap_state(sys, x, wraps)
            _check_state(x, t0 + k + 1, guard)
            times.append(t0 + k + 1)
            states.append(x.copy())
            wrap_hist.append(wraps.copy())
        return Trajectory(np.array(times), np.array(states), np.array(wrap_hist))

    uconst = None if callable(u) else _constant_input(sys, u)
    t0, n_full, rem = _grid(t_span, h)
    f = sys.field
    times = [t0]
    states = [x.copy()]
    wrap_hist = [wraps.copy()]
    t = t0
    for k in range(n_full + (1 if rem > 1e-12 else 0)):
        hk = h if k < n_full else rem
        if callable(u):
            u1 = _input_at(u, uconst, t)
            u2 = _input_at(u, uconst, t + 0.5 * hk)
            u3 = _input_at(u, uconst, t + hk)
        else:
            u1 = u2 = u3 = uconst
        k1 = np.asarray(f(x, u1), dtype=float)
        k2 = np.asarray(f(x + (0.5 * hk) * k1, u2), dtype=float)
        k3 = np.asarray(f(x + (0.5 * hk) * k2, u2), dtype=float)
        k4 = np.asarray(f(x + hk * k3, u3), dtype=float)
        x = x + (hk / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + hk
        x = _wrap_state(sys, x, wraps)
        _check_state(x, t, guard)
        times.append(t)
        states.append(x.copy())
        wrap_hist.append(wraps.copy())
    return Trajectory(np.array(times), np.array(states), np.array(wrap_hist))


def variational_flow(
    sys: SystemDef,
    x0,
    dx0,
    u=None,
    t_span=(0.0, 1.0),
    h=DEFAULT_STEP,
    renormalize: bool = False,
    du=None,
    guard=DIVERGENCE_GUARD,
):
    """Co-integrate base and variational dynamics with shared RK4 steps.

    Returns (trajectory, tangents, log_growth). With renormalize the tangent
    is rescaled to unit norm each step and log_growth accumulates the
    discarded scale factors (total growth = exp(log_growth[-1]) relative to
    |dx0|); without it the tangent is propagated raw and guarded at 1e12.
    """
    x = np.array(x0, dtype=float)
    dx = np.array(dx0, dtype=float)
    if x.shape != (sys.dim,) or dx.shape != (sys.dim,):
        raise InvalidInput("x0/dx0 dimension mismatch")
    nrm0 = float(np.linalg.norm(dx))
    if renormalize:
        if nrm0 == 0.0:
            raise InvalidInput("dx0 must be nonzero when renormalizing")
        dx = dx / nrm0
    uconst = _constant_input(sys, u)
    duconst = None
    if sys.input_dim > 0 and du is not None:
        duconst = np.atleast_1d(np.asarray(du, dtype=float))
    wraps = np.zeros(sys.dim, dtype=int)
    x = _wrap_state(sys, x, wraps)

    from .dynsys import linearize  # local import to keep module load cheap

    def joint_rhs(xc, dxc):
        fx = np.asarray(sys.field(xc, uconst), dtype=float)
        A, B = linearize(sys, xc, uconst)
        ddx = A @ dxc
        if duconst is not None:
            ddx = ddx + B @ duconst
        return fx, ddx

    if sys.time_kind is TimeKind.DISCRETE:
        n_steps = int(round(float(t_span[1]) - float(t_span[0])))
        t0 = float(t_span[0])
        times, states, wrap_hist, tangents, logs = [t0], [x.copy()], [wraps.copy()], [dx.copy()], [0.0]
        acc = 0.0
        for k in range(n_steps):
            A, B = linearize(sys, x, uconst)
            dx = A @ dx
            if duconst is not None:
                dx = dx + B @ duconst
            x = np.asarray(sys.field(x, uconst), dtype=float)
            x = _wrap_state(sys, x, wraps)
            _check_state(x, t0 + k + 1, guard)
            if renormalize:
                s = float(np.linalg.norm(dx))
                if s == 0.0:
                    raise Diverged("variational state collapsed to zero")
                dx = dx / s
                acc += math.log(s)
            elif np.max(np.abs(dx)) > VARIATIONAL_GUARD:
                raise Diverged("variational norm exceeded 1e12")
            times.append(t0 + k + 1)
            states.append(x.copy())
            wrap_hist.append(wraps.copy())
            tangents.append(dx.copy())
            logs.append(acc)
        return Trajectory(np.array(times), np.array(states), np.array(wrap_hist)), np.array(tangents), np.array(logs)

    t0, n_full, rem = _grid(t_span, h)
    times, states, wrap_hist, tangents, logs = [t0], [x.copy()], [wraps.copy()], [dx.copy()], [0.0]
    t = t0
    acc = 0.0
    for k in range(n_full + (1 if rem > 1e-12 else 0)):
        hk = h if k < n_full else rem
        k1x, k1d = joint_rhs(x, dx)
        k2x, k2d = joint_rhs(x + (0.5 * hk) * k1x, dx + (0.5 * hk) * k1d)
        k3x, k3d = joint_rhs(x + (0.5 * hk) * k2x, dx + (0.5 * hk) * k2d)
        k4x, k4d = joint_rhs(x + hk * k3x, dx + hk * k3d)
        x = x + (hk / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        dx = dx + (hk / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        t = t + hk
        x = _wrap_state(sys, x, wraps)
        _check_state(x, t, guard)
        if renormalize:
            s = float(np.linalg.norm(dx))
            if s == 0.0:
                raise Diverged("variational state collapsed to zero")
            dx = dx / s
            acc += math.log(s)
        elif np.max(np.abs(dx)) > VARIATIONAL_GUARD:
            raise Diverged("variational norm exceeded 1e12")
        times.append(t)
        states.append(x.copy())
        wrap_hist.append(wraps.copy())
        tangents.append(dx.copy())
        logs.append(acc)
    return Trajectory(np.array(times), np.array(states), np.array(wrap_hist)), np.array(tangents), np.array(logs)


def matrix_variational_flow(
    sys: SystemDef,
    x0,
    u=None,
    t_span=(0.0, 1.0),
    h=DEFAULT_STEP,
    renormalize: bool = False,
    guard=DIVERGENCE_GUARD,
):
    """Propagate the full fundamental matrix along the flow.

    Returns (trajectory, matrices, log_growth). With renormalize each sampled
    matrix is rescaled by a common positive scalar (its max-abs entry), which
    leaves every column direction and all projective quantities intact while
    avoiding under/overflow on long horizons.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (sys.dim,):
        raise InvalidInput("x0 dimension mismatch")
    P = np.eye(sys.dim)
    uconst = _constant_input(sys, u)
    wraps = np.zeros(sys.dim, dtype=int)
    x = _wrap_state(sys, x, wraps)

    from .dynsys import linearize

    if sys.time_kind is TimeKind.DISCRETE:
        n_steps = int(round(float(t_span[1]) - float(t_span[0])))
        t0 = float(t_span[0])
        times, states, mats, logs = [t0], [x.copy()], [P.copy()], [0.0]
        acc = 0.0
        for k in range(n_steps):
            A, _ = linearize(sys, x, uconst)
            P = A @ P
            x = np.asarray(sys.field(x, uconst), dtype=float)
            x = _wrap_state(sys, x, wraps)
            _check_state(x, t0 + k + 1, guard)
            if renormalize:
                s = float(np.max(np.abs(P)))
                if s == 0.0:
                    raise Diverged("fundamental matrix collapsed")
                P = P / s
                acc += math.log(s)
            times.append(t0 + k + 1)
            states.append(x.copy())
            mats.append(P.copy())
            logs.append(acc)
        traj = Trajectory(np.array(times), np.array(states), np.zeros((len(times), sys.dim), dtype=int))
        return traj, np.array(mats), np.array(logs)

    def joint_rhs(xc, Pc):
        fx = np.asarray(sys.field(xc, uconst), dtype=float)
        A, _ = linearize(sys, xc, uconst)
        return fx, A @ Pc

    t0, n_full, rem = _grid(t_span, h)
    times, states, wrap_hist, mats, logs = [t0], [x.copy()], [wraps.copy()], [P.copy()], [0.0]
    t = t0
    acc = 0.0
    for k in range(n_full + (1 if rem > 1e-12 else 0)):
        hk = h if k < n_full else rem
        k1x, k1p = joint_rhs(x, P)
        k2x, k2p = joint_rhs(x + (0.5 * hk) * k1x, P + (0.5 * hk) * k1p)
        k3x, k3p = joint_rhs(x + (0.5 * hk) * k2x, P + (0.5 * hk) * k2p)
        k4x, k4p = joint_rhs(x + hk * k3x, P + hk * k3p)
        x = x + (hk / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        P = P + (hk / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        t = t + hk
        x = _wrap_state(sys, x, wraps)
        _check_state(x, t, guard)
        if renormalize:
            s = float(np.max(np.abs(P)))
            if s == 0.0:
                raise Diverged("fundamental matrix collapsed")
            P = P / s
            acc += math.log(s)
        elif np.max(np.abs(P)) > VARIATIONAL_GUARD:
            raise Diverged("fundamental matrix exceeded 1e12")
        times.append(t)
        states.append(x.copy())
        wrap_hist.append(wraps.copy())
        mats.append(P.copy())
        logs.append(acc)
    traj = Trajectory(np.array(times), np.array(states), np.array(wrap_hist))
    return traj, np.array(mats), np.array(logs)


def fundamental_matrix(sys: SystemDef, x0, u=None, t0=0.0, t=1.0, h=DEFAULT_STEP) -> FundamentalMatrix:
    """Fundamental solution over [t0, t]; columns are pushed canonical basis vectors."""
    if t == t0:
        return FundamentalMatrix(t0=t0, t=t, Psi=np.eye(sys.dim))
    _, mats, _ = matrix_variational_flow(sys, x0, u=u, t_span=(t0, t), h=h, renormalize=False)
    return FundamentalMatrix(t0=float(t0), t=float(t), Psi=mats[-1])


def reversed_system(sys: SystemDef) -> SystemDef:
    """Time-reversed copy (continuous systems only); used for backward windows."""
    if sys.time_kind is not TimeKind.CONTINUOUS:
        raise InvalidInput("only continuous systems can be time reversed")

    def back_field(x, u):
        return -np.asarray(sys.field(x, u), dtype=float)

    back_jac = None
    if sys.jacobian is not None:
        def back_jac(x, u):  # noqa: E731 - simple wrapper
            return -np.asarray(sys.jacobian(x, u), dtype=float)

    return SystemDef(
        time_kind=sys.time_kind,
        dim=sys.dim,
        field=back_field,
        topology=sys.topology,
        cone_field=sys.cone_field,
        jacobian=back_jac,
        input_jacobian=None,
        input_dim=sys.input_dim,
        name=f"{sys.name} (reversed)",
    )
