"""Exact geometry of Minkowski spacetime.

Metric of signature (+, ..., +, -), the conformal inversion with its factor
and Jacobian, causality classification, and composable Möbius maps built from
translations, scalings, axis-aligned boosts, and inversions.

Spacetime vectors are ordered space-first: ``(x_1, ..., x_n, t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import LightConeSingular

#: Default relative tolerance for light-cone classification.  A point is
#: treated as lightlike when ``| |x|^2 - t^2 | <= delta * (|x|^2 + t^2)``.
DELTA_CONE_DEFAULT = 1e-9


class IntervalClass(Enum):
    """Causal character of a spacetime point relative to the origin cone."""

    TIMELIKE = "timelike"
    SPACELIKE = "spacelike"
    LIGHTLIKE = "lightlike"


@dataclass(frozen=True)
class SpacetimePoint:
    """An event in (n+1)-dimensional Minkowski spacetime, c normalized to 1.

    Parameters
    ----------
    x : array_like
        Spatial coordinates, length n with n in {1, 2, 3}.
    t : float
        Time coordinate, same length units as ``x``.
    """

    x: np.ndarray
    t: float

    def __init__(self, x, t):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = float(t)
        if x.ndim != 1 or x.size not in (1, 2, 3):
            raise ValueError(f"spatial dimension must be 1, 2 or 3, got shape {x.shape}")
        if not (np.all(np.isfinite(x)) and np.isfinite(t)):
            raise ValueError("spacetime coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def coords(self) -> np.ndarray:
        """Coordinates as a flat (n+1,) vector, time last."""
        return np.append(self.x, self.t)

    def interval(self) -> float:
        """Minkowski interval |x|^2 - t^2 of the point relative to the origin."""
        return float(np.dot(self.x, self.x) - self.t * self.t)

    def classify(self, delta_cone: float = DELTA_CONE_DEFAULT) -> IntervalClass:
        s = self.interval()
        scale = float(np.dot(self.x, self.x) + self.t * self.t)
        if abs(s) <= delta_cone * scale:
            return IntervalClass.LIGHTLIKE
        return IntervalClass.TIMELIKE if s < 0 else IntervalClass.SPACELIKE


@dataclass(frozen=True)
class Translation:
    dx: np.ndarray
    dt: float

    def __init__(self, dx, dt):
        object.__setattr__(self, "dx", np.atleast_1d(np.asarray(dx, dtype=float)))
        object.__setattr__(self, "dt", float(dt))


@dataclass(frozen=True)
class Scaling:
    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("scaling factor must be strictly positive")


@dataclass(frozen=True)
class Boost:
    """Lorentz boost along a coordinate axis, parameterized by rapidity."""

    axis: int
    rapidity: float


@dataclass(frozen=True)
class Inversion:
    pass


Primitive = Translation | Scaling | Boost | Inversion


@dataclass(frozen=True)
class MobiusMap:
    """Ordered composition of conformal primitives; first element applied first."""

    primitives: tuple = field(default_factory=tuple)

    def __init__(self, primitives=()):
        object.__setattr__(self, "primitives", tuple(primitives))

    def then(self, primitive: Primitive) -> "MobiusMap":
        return MobiusMap(self.primitives + (primitive,))


@dataclass(frozen=True)
class CausalityCone:
    """Forward solid cone from an apex: |x - p0|^2 < (t - a0)^2 and t > a0."""

    apex: SpacetimePoint


def minkowski_inner(u, v) -> float:
    """Minkowski inner product <u_space, v_space> - u_time * v_time."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"vector shapes differ: {u.shape} vs {v.shape}")
    return float(np.dot(u[:-1], v[:-1]) - u[-1] * v[-1])


def _interval_or_raise(p: SpacetimePoint, delta_cone: float) -> float:
    s = p.interval()
    scale = float(np.dot(p.x, p.x) + p.t * p.t)
    if abs(s) <= delta_cone * scale:
        raise LightConeSingular(
            f"point (x={p.x}, t={p.t}) lies within tolerance {delta_cone} of the light cone"
        )
    return s


def invert(p: SpacetimePoint, delta_cone: float = DELTA_CONE_DEFAULT) -> SpacetimePoint:
    """Conformal inversion (x, t) -> (x, t) / (|x|^2 - t^2).

    Involutive away from the light cone; raises LightConeSingular on it.
    """
    s = _interval_or_raise(p, delta_cone)
    return SpacetimePoint(p.x / s, p.t / s)


def inversion_conformal_factor(p: SpacetimePoint, delta_cone: float = DELTA_CONE_DEFAULT) -> float:
    """Conformal factor |1 / (|x|^2 - t^2)| of the inversion at ``p``."""
    s = _interval_or_raise(p, delta_cone)
    return abs(1.0 / s)


def inversion_jacobian(p: SpacetimePoint, delta_cone: float = DELTA_CONE_DEFAULT) -> np.ndarray:
    """Jacobian matrix of the inversion at ``p``.

    Obtained by direct differentiation: J = (1/s) (I - (2/s) w w^T eta) with
    w the coordinate vector and s its interval.  Satisfies the pullback
    identity eta(Ju, Jv) = phi^2 eta(u, v) with phi = |1/s|.
    """
    s = _interval_or_raise(p, delta_cone)
    w = p.coords
    eta_w = np.append(p.x, -p.t)
    dim = w.size
    return (np.eye(dim) - (2.0 / s) * np.outer(w, eta_w)) / s


def apply_map(m: MobiusMap, p: SpacetimePoint, delta_cone: float = DELTA_CONE_DEFAULT) -> SpacetimePoint:
    """Apply the primitives of ``m`` to ``p`` in order."""
    for prim in m.primitives:
        p = _apply_primitive(prim, p, delta_cone)
    return p


def map_conformal_factor(m: MobiusMap, p: SpacetimePoint, delta_cone: float = DELTA_CONE_DEFAULT) -> float:
    """Conformal factor of the composed map at ``p``.

    Evaluated along the chain: each primitive contributes its own factor at
    the point it receives (translations and boosts 1, Scaling(s) its s, an
    inversion |1/(|x|^2 - t^2)| at its input point).
    """
    factor = 1.0
    for prim in m.primitives:
        if isinstance(prim, Scaling):
            factor *= prim.s
        elif isinstance(prim, Inversion):
            factor *= inversion_conformal_factor(p, delta_cone)
        p = _apply_primitive(prim, p, delta_cone)
    return factor


def _apply_primitive(prim: Primitive, p: SpacetimePoint, delta_cone: float) -> SpacetimePoint:
    if isinstance(prim, Translation):
        if prim.dx.size != p.n:
            raise ValueError("translation dimension does not match point")
        return SpacetimePoint(p.x + prim.dx, p.t + prim.dt)
    if isinstance(prim, Scaling):
        return SpacetimePoint(prim.s * p.x, prim.s * p.t)
    if isinstance(prim, Boost):
        if not 0 <= prim.axis < p.n:
            raise ValueError(f"boost axis {prim.axis} out of range for n={p.n}")
        ch, sh = np.cosh(prim.rapidity), np.sinh(prim.rapidity)
        x = p.x.copy()
        xi = x[prim.axis]
        x[prim.axis] = ch * xi + sh * p.t
        return SpacetimePoint(x, sh * xi + ch * p.t)
    if isinstance(prim, Inversion):
        return invert(p, delta_cone)
    raise TypeError(f"unknown Möbius primitive: {prim!r}")


def cone_contains(c: CausalityCone, p: SpacetimePoint) -> bool:
    """Strict membership test |x - p0|^2 < (t - a0)^2 and t > a0."""
    if p.n != c.apex.n:
        raise ValueError("point and cone apex have different spatial dimensions")
    dx = p.x - c.apex.x
    dt = p.t - c.apex.t
    return bool(dt > 0 and np.dot(dx, dx) < dt * dt)


# Vectorized helpers used by the transform/solver layers.  Shapes: ``x`` is
# (..., n), ``t`` is (...); the light cone maps to inf/nan which callers mask.

def interval_batch(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.sum(np.square(x), axis=-1) - np.square(t)


def invert_batch(x: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = interval_batch(x, t)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return x / s[..., None], t / s
