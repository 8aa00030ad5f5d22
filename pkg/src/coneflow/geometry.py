"""Polyhedral cones, cone fields with transport maps, and the Hilbert projective metric."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidCone, InvalidInput, OutsideCone

# membership slack for non-strict containment, relative to |v|
_MEMBER_RTOL = 1e-12
# strict-interiority threshold <h_i, v> >= _STRICT_RTOL * |v|
_STRICT_RTOL = 1e-7
# distances below this are floating-point noise on equal rays
_ZERO_DISTANCE = 1e-14


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Cone:
    """Solid pointed polyhedral cone {v : <h_i, v> >= 0 for all i}.

    halfspaces: (m, n) covector rows, kept exactly as supplied (margins and
        facet values are reported in the model's own scaling).
    generators: (k, n) unit extreme rays.
    """

    halfspaces: np.ndarray
    generators: np.ndarray
    dim: int

    def __post_init__(self):
        H = _freeze(self.halfspaces)
        G = _freeze(self.generators)
        if H.ndim != 2 or G.ndim != 2 or H.shape[1] != self.dim or G.shape[1] != self.dim:
            raise InvalidCone(f"halfspace/generator shapes {H.shape}/{G.shape} do not match dim {self.dim}")
        object.__setattr__(self, "halfspaces", H)
        object.__setattr__(self, "generators", G)
        n = self.dim
        if np.linalg.matrix_rank(G) < n:
            raise InvalidCone("cone is not solid: generators do not span the tangent space")
        if np.linalg.matrix_rank(H) < n:
            raise InvalidCone("cone is not pointed: halfspace normals are rank deficient")
        vals = H @ G.T  # (m, k)
        scale = np.linalg.norm(H, axis=1)[:, None] * np.linalg.norm(G, axis=1)[None, :]
        if np.any(vals < -1e-9 * scale):
            raise InvalidCone("a generator violates a halfspace")
        # every halfspace must be tight on at least n-1 independent generators
        for i in range(H.shape[0]):
            tight = G[np.abs(vals[i]) <= 1e-9 * scale[i]]
            tight_rank = np.linalg.matrix_rank(tight) if len(tight) else 0
            if tight_rank < n - 1:
                raise InvalidCone(f"halfspace {i} is not a facet (tight on < n-1 independent generators)")

    @classmethod
    def from_halfspaces(cls, halfspaces) -> "Cone":
        """Build a cone from covector rows, deriving generators.

        Auto-derivation covers the simplicial case (n halfspaces in n
        dimensions, which includes every 2-D cone with two facets); other
        polyhedral cones must be built with explicit generators.
        """
        H = np.asarray(halfspaces, dtype=float)
        if H.ndim != 2:
            raise InvalidInput("halfspaces must be a 2-D array of covector rows")
        m, n = H.shape
        if m != n:
            raise InvalidInput("generator auto-derivation needs a simplicial cone (m == n); pass generators explicitly")
        try:
            Hinv = np.linalg.inv(H)
        except np.linalg.LinAlgError as exc:
            raise InvalidCone("halfspace matrix is singular") from exc
        G = Hinv.T  # row j is tight on every h_i, i != j
        G = G / np.linalg.norm(G, axis=1)[:, None]
        return cls(halfspaces=H, generators=G, dim=n)

    @classmethod
    def from_generators(cls, generators) -> "Cone":
        """Build a simplicial cone from extreme rays, deriving halfspaces."""
        G = np.asarray(generators, dtype=float)
        if G.ndim != 2:
            raise InvalidInput("generators must be a 2-D array of ray rows")
        k, n = G.shape
        if k != n:
            raise InvalidInput("halfspace auto-derivation needs a simplicial cone (k == n)")
        try:
            H = np.linalg.inv(G.T)  # H @ G.T == I
        except np.linalg.LinAlgError as exc:
            raise InvalidCone("generator matrix is singular") from exc
        Gn = G / np.linalg.norm(G, axis=1)[:, None]
        return cls(halfspaces=H, generators=Gn, dim=n)

    @classmethod
    def orthant(cls, n: int) -> "Cone":
        eye = np.eye(n)
        return cls(halfspaces=eye, generators=eye, dim=n)

    def to_config(self) -> dict:
        return {
            "halfspaces": self.halfspaces.tolist(),
            "generators": self.generators.tolist(),
        }

    @classmethod
    def from_config(cls, block: dict) -> "Cone":
        if "halfspaces" not in block:
            raise InvalidInput("cone config block needs a 'halfspaces' entry")
        H = np.asarray(block["halfspaces"], dtype=float)
        if "generators" in block and block["generators"] is not None:
            G = np.asarray(block["generators"], dtype=float)
            G = G / np.linalg.norm(G, axis=1)[:, None]
            return cls(halfspaces=H, generators=G, dim=H.shape[1])
        return cls.from_halfspaces(H)


def cone_contains(cone: Cone, v, strict: bool = False, tol: Optional[float] = None) -> bool:
    """Halfspace membership test; strict=True certifies interior membership."""
    v = np.asarray(v, dtype=float)
    if v.shape != (cone.dim,):
        raise InvalidInput(f"vector has shape {v.shape}, cone dim is {cone.dim}")
    vals = cone.halfspaces @ v
    nv = float(np.linalg.norm(v))
    if strict:
        t = _STRICT_RTOL * nv if tol is None else tol
        return bool(np.all(vals >= t))
    t = -_MEMBER_RTOL * max(1.0, nv) if tol is None else -abs(tol)
    return bool(np.all(vals >= t))


def hilbert_bounds(cone: Cone, dx, dy) -> tuple:
    """Extremal ray multipliers (M, m) of dx against dy inside the cone.

    M = inf{lam >= 0 : lam*dy - dx in cone}, m = sup{lam >= 0 : dx - lam*dy in cone}.
    Closed form over the facets: ratios <h_i,dx>/<h_i,dy>; 0/0 facets impose no
    constraint, a/0 with a > 0 makes M infinite.
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    if dx.shape != (cone.dim,) or dy.shape != (cone.dim,):
        raise InvalidInput("dx/dy dimension mismatch with cone")
    if not np.any(dy):
        raise InvalidInput("dy must be nonzero")
    # membership tolerance loose enough to accept vectors produced by integration
    if not cone_contains(cone, dx, tol=1e-9 * max(1.0, float(np.linalg.norm(dx)))):
        raise OutsideCone("dx is not in the cone")
    if not cone_contains(cone, dy, tol=1e-9 * max(1.0, float(np.linalg.norm(dy)))):
        raise OutsideCone("dy is not in the cone")
    a = cone.halfspaces @ dx
    b = cone.halfspaces @ dy
    hn = np.linalg.norm(cone.halfspaces, axis=1)
    zb = 1e-13 * float(np.linalg.norm(dy)) * hn
    za = 1e-13 * float(np.linalg.norm(dx)) * hn
    pos = b > zb
    if not np.any(pos):
        raise InvalidInput("dy has no strictly positive facet value; cone data degenerate")
    ratios = a[pos] / b[pos]
    M = float(np.max(ratios))
    m = max(float(np.min(ratios)), 0.0)
    if np.any(~pos & (a > za)):
        M = math.inf
    return M, m


@dataclass(frozen=True)
class HilbertDistance:
    """log(M/m) with extended-real conventions (inf when M=inf or m=0)."""

    value: float
    M: float
    m: float


def hilbert_distance(cone: Cone, dx, dy) -> HilbertDistance:
    """Hilbert projective distance between two rays of the cone."""
    M, m = hilbert_bounds(cone, dx, dy)
    if math.isinf(M) or m <= 0.0:
        return HilbertDistance(value=math.inf, M=M, m=m)
    value = math.log(M / m)
    if value < _ZERO_DISTANCE:
        value = 0.0
    return HilbertDistance(value=value, M=M, m=m)


def projective_diameter(cone: Cone, inner_samples: Sequence) -> float:
    """Max pairwise Hilbert distance over a sample set (lower estimate of the
    image-cone diameter); inf as soon as one pair is infinitely far."""
    samples = [np.asarray(s, dtype=float) for s in inner_samples]
    if len(samples) == 0:
        raise InvalidInput("empty sample set")
    best = 0.0
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            d = hilbert_distance(cone, samples[i], samples[j]).value
            if math.isinf(d):
                return math.inf
            best = max(best, d)
    return best


def contraction_ratio(diameter: float) -> float:
    """tanh(diameter/4); 1.0 for an infinite diameter."""
    if diameter < 0:
        raise InvalidInput("diameter must be nonnegative")
    if math.isinf(diameter):
        return 1.0
    return math.tanh(diameter / 4.0)


@dataclass(frozen=True)
class ConeField:
    """State-indexed cone with an optional transport map.

    cone_at: state -> Cone.
    transport: (x1, x2) -> invertible matrix carrying cone_at(x1) onto
        cone_at(x2); None means identity, which is only sound for constant
        fields. Transport maps are supplied by the model and validated here,
        never synthesized.
    smooth: whether cone_at actually varies with the state.
    """

    cone_at: Callable[[np.ndarray], Cone]
    transport: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    smooth: bool = False

    @classmethod
    def constant(cls, cone: Cone) -> "ConeField":
        return cls(cone_at=lambda x, _c=cone: _c, transport=None, smooth=False)

    def transport_matrix(self, x1, x2) -> np.ndarray:
        if self.transport is not None:
            return np.asarray(self.transport(np.asarray(x1, float), np.asarray(x2, float)), dtype=float)
        if self.smooth:
            raise InvalidInput("state-dependent cone field has no transport map; supply one on the model")
        return np.eye(self.cone_at(np.asarray(x1, float)).dim)


def validate_transport(field: ConeField, x1, x2, tol: float = 1e-10) -> float:
    """Check Gamma(x1,x2) maps cone(x1) into cone(x2) and inverts Gamma(x2,x1).

    Returns the round-trip defect ||G12 @ G21 - I||; raises InvalidCone if a
    transported generator leaves the target cone beyond tol.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    G12 = field.transport_matrix(x1, x2)
    G21 = field.transport_matrix(x2, x1)
    c2 = field.cone_at(x2)
    for g in field.cone_at(x1).generators:
        img = G12 @ g
        if not cone_contains(c2, img, tol=tol * max(1.0, float(np.linalg.norm(img)))):
            raise InvalidCone("transported generator leaves the target cone")
    defect = float(np.max(np.abs(G12 @ G21 - np.eye(c2.dim))))
    if defect > tol:
        raise InvalidCone(f"transport round trip defect {defect:g} exceeds {tol:g}")
    return defect
