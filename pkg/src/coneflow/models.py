"""Built-in planar models with their cone fields and transport maps."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .dynsys import ChartTopology, CoordKind, SystemDef, TimeKind
from .errors import InvalidInput, InvalidSpec
from .geometry import Cone, ConeField


class ModelName(enum.Enum):
    POSITIVE_LINEAR = "positive_linear"
    MONOTONE_BISTABLE = "monotone_bistable"
    HARMONIC_OSCILLATOR_ROTATING_CONE = "harmonic_oscillator_rotating_cone"
    POLAR_DECOUPLED = "polar_decoupled"
    PENDULUM = "pendulum"


_ALIASES = {
    "linear": ModelName.POSITIVE_LINEAR,
    "bistable": ModelName.MONOTONE_BISTABLE,
    "oscillator": ModelName.HARMONIC_OSCILLATOR_ROTATING_CONE,
    "harmonic_oscillator": ModelName.HARMONIC_OSCILLATOR_ROTATING_CONE,
    "polar": ModelName.POLAR_DECOUPLED,
}


@dataclass(frozen=True)
class ModelSpec:
    """A built-in model name plus its parameter map."""

    name: ModelName
    params: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def parse(cls, name: str, params: Dict[str, object] | None = None) -> "ModelSpec":
        key = name.strip().lower().replace("-", "_")
        if key in _ALIASES:
            return cls(name=_ALIASES[key], params=dict(params or {}))
        try:
            return cls(name=ModelName(key), params=dict(params or {}))
        except ValueError as exc:
            known = sorted(m.value for m in ModelName)
            raise InvalidSpec(f"unknown model {name!r}; known: {known}") from exc


# -- pendulum: two-facet cone dtheta >= 0, dtheta + dv >= 0 -------------------

PENDULUM_CONE = Cone.from_halfspaces([[1.0, 0.0], [1.0, 1.0]])


def _pendulum(params) -> SystemDef:
    k = float(params.get("k", 3.0))
    u = float(params.get("u", 0.0))
    if not (k >= 0.0 and math.isfinite(k) and math.isfinite(u)):
        raise InvalidSpec(f"pendulum needs finite damping k >= 0 and finite torque u (got k={k}, u={u})")

    def f(x, _u):
        return np.array([x[1], -math.sin(x[0]) - k * x[1] + u])

    def jac(x, _u):
        return np.array([[0.0, 1.0], [-math.cos(x[0]), -k]])

    return SystemDef(
        time_kind=TimeKind.CONTINUOUS,
        dim=2,
        field=f,
        topology=ChartTopology(kinds=(CoordKind.CIRCLE, CoordKind.LINE)),
        cone_field=ConeField.constant(PENDULUM_CONE),
        jacobian=jac,
        name=f"pendulum(k={k:g}, u={u:g})",
    )


# -- positive linear system on the orthant ------------------------------------

def _positive_linear(params) -> SystemDef:
    A = np.asarray(params.get("A", [[2.0, 1.0], [1.0, 2.0]]), dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.all(np.isfinite(A)):
        raise InvalidSpec("positive_linear needs a finite square matrix A")
    n = A.shape[0]

    def f(x, _u, _A=A):
        return _A @ x

    def jac(x, _u, _A=A):
        return _A

    return SystemDef(
        time_kind=TimeKind.CONTINUOUS,
        dim=n,
        field=f,
        topology=ChartTopology.lines(n),
        cone_field=ConeField.constant(Cone.orthant(n)),
        jacobian=jac,
        name="positive_linear",
    )


# -- monotone bistable stand-in -----------------------------------------------
# x1' = -x1 + x2, x2' = -x2 + 2 tanh(x1): cooperative (Metzler Jacobian), two
# stable equilibria at +-(a, a) with a = 2 tanh(a), saddle at the origin.

def _bistable(params) -> SystemDef:
    if params:
        raise InvalidSpec("monotone_bistable takes no parameters")

    def f(x, _u):
        return np.array([-x[0] + x[1], -x[1] + 2.0 * math.tanh(x[0])])

    def jac(x, _u):
        sech2 = 1.0 / math.cosh(x[0]) ** 2
        return np.array([[-1.0, 1.0], [2.0 * sech2, -1.0]])

    return SystemDef(
        time_kind=TimeKind.CONTINUOUS,
        dim=2,
        field=f,
        topology=ChartTopology.lines(2),
        cone_field=ConeField.constant(Cone.orthant(2)),
        jacobian=jac,
        name="monotone_bistable",
    )


# -- harmonic oscillator with the rotating cone --------------------------------
# facets k1 = -(x1+x2) dx1 + (x1-x2) dx2, k2 = -(x2-x1) dx1 + (x1+x2) dx2 on
# the punctured plane; the cone rotates rigidly with the angular coordinate,
# so the transport is the rotation by the angle difference (validated, not
# derived).

def oscillator_cone_at(x) -> Cone:
    x1, x2 = float(x[0]), float(x[1])
    if x1 * x1 + x2 * x2 < 1e-16:
        raise InvalidInput("rotating cone field is undefined at the origin")
    return Cone.from_halfspaces([[-(x1 + x2), x1 - x2], [x1 - x2, x1 + x2]])


def rotation_transport(x1, x2) -> np.ndarray:
    a = math.atan2(x2[1], x2[0]) - math.atan2(x1[1], x1[0])
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def _oscillator(params) -> SystemDef:
    if params:
        raise InvalidSpec("harmonic_oscillator_rotating_cone takes no parameters")

    def f(x, _u):
        return np.array([x[1], -x[0]])

    def jac(x, _u):
        return np.array([[0.0, 1.0], [-1.0, 0.0]])

    return SystemDef(
        time_kind=TimeKind.CONTINUOUS,
        dim=2,
        field=f,
        topology=ChartTopology.lines(2),
        cone_field=ConeField(cone_at=oscillator_cone_at, transport=rotation_transport, smooth=True),
        jacobian=jac,
        name="harmonic_oscillator_rotating_cone",
    )


# -- decoupled polar dynamics ---------------------------------------------------
# theta' = 1, rho' = rho - rho^3/3 on the cylinder S x R+; positive w.r.t. the
# orthant in (dtheta, drho). The quadratic cone it strictly contracts is not
# polyhedral; that invariant lives in a model-specific test.

def _polar(params) -> SystemDef:
    if params:
        raise InvalidSpec("polar_decoupled takes no parameters")

    def f(x, _u):
        return np.array([1.0, x[1] - x[1] ** 3 / 3.0])

    def jac(x, _u):
        return np.array([[0.0, 0.0], [0.0, 1.0 - x[1] ** 2]])

    return SystemDef(
        time_kind=TimeKind.CONTINUOUS,
        dim=2,
        field=f,
        topology=ChartTopology(kinds=(CoordKind.CIRCLE, CoordKind.POSITIVE)),
        cone_field=ConeField.constant(Cone.orthant(2)),
        jacobian=jac,
        name="polar_decoupled",
    )


_BUILDERS = {
    ModelName.PENDULUM: _pendulum,
    ModelName.POSITIVE_LINEAR: _positive_linear,
    ModelName.MONOTONE_BISTABLE: _bistable,
    ModelName.HARMONIC_OSCILLATOR_ROTATING_CONE: _oscillator,
    ModelName.POLAR_DECOUPLED: _polar,
}


def make_model(spec: ModelSpec) -> SystemDef:
    """Instantiate a fully wired SystemDef from a model spec."""
    try:
        builder = _BUILDERS[spec.name]
    except KeyError as exc:
        raise InvalidSpec(f"unknown model {spec.name!r}") from exc
    return builder(spec.params)
