"""Reconstruction of the physical solution from the bounded-domain history.

A physical query (x, t) is classified against the causal geometry, inverted
into bounded coordinates, and evaluated as u = G(xi, tau) * V(xi, tau) with V
multilinearly interpolated from the recorded frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import OutOfGrid
from .kelvin import ProblemSpec, g_factor_batch
from .minkowski import DELTA_CONE_DEFAULT, invert_batch
from .solver import FrameSet


class Region(Enum):
    INSIDE_SUPPORT_CONE = "inside_support_cone"
    OUTSIDE_SUPPORT_CONE = "outside_support_cone"
    PRE_INITIAL = "pre_initial"
    NEAR_LIGHT_CONE = "near_light_cone"


@dataclass(frozen=True)
class QueryResult:
    value: float
    region: Region


def interpolate(frames: FrameSet, p) -> float:
    """Multilinear interpolation of V at a bounded-domain point.

    ``p`` is a SpacetimePoint or an (n+1,) coordinate vector (tau last);
    exact at grid nodes.  Raises OutOfGrid outside the grid's bounding box.
    """
    coords = p.coords if hasattr(p, "coords") else np.asarray(p, dtype=float)
    vals = interpolate_batch(frames, coords[None, :-1], coords[-1:])
    return float(vals[0])


def interpolate_batch(frames: FrameSet, xi: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Vectorized multilinear interpolation; ``xi`` is (..., n), ``tau`` (...)."""
    gs = frames.grid
    xi = np.asarray(xi, dtype=float)
    tau = np.asarray(tau, dtype=float)
    fuzz = 1e-12 * max(1.0, gs.xi_extent, abs(gs.tau_start))

    if np.any(np.abs(xi) > gs.xi_extent + fuzz):
        raise OutOfGrid("spatial coordinate outside the grid box")
    lo, hi = frames.taus[0], frames.taus[-1]
    if np.any(tau < lo - frames.clamp_below - fuzz) or np.any(tau > hi + fuzz):
        raise OutOfGrid("tau outside the recorded range")
    tau = np.clip(tau, lo, hi)

    # Temporal bracket: recorded levels are uniform except possibly the last.
    if len(frames.taus) == 1:
        kt = np.zeros(tau.shape, dtype=np.int64)
        wt = np.zeros(tau.shape)
    else:
        kt = np.searchsorted(frames.taus, tau, side="right") - 1
        kt = np.clip(kt, 0, len(frames.taus) - 2)
        span = frames.taus[kt + 1] - frames.taus[kt]
        wt = np.clip((tau - frames.taus[kt]) / span, 0.0, 1.0)

    # Spatial brackets per axis.
    pos = (xi + gs.xi_extent) / gs.dxi
    idx = np.clip(np.floor(pos).astype(np.int64), 0, gs.points_per_axis - 2)
    frac = np.clip(pos - idx, 0.0, 1.0)

    flat = frames.frames.reshape(frames.frames.shape[0], -1)
    strides = np.array([gs.points_per_axis**k for k in range(gs.n - 1, -1, -1)])
    base = idx @ strides

    out = np.zeros(tau.shape)
    kt_hi = kt if len(frames.taus) == 1 else kt + 1
    for corner in range(2**gs.n):
        offs = np.array([(corner >> (gs.n - 1 - a)) & 1 for a in range(gs.n)])
        w = np.ones(tau.shape)
        for a in range(gs.n):
            w = w * (frac[..., a] if offs[a] else 1.0 - frac[..., a])
        cell = base + offs @ strides
        lo_vals = flat[kt, cell]
        hi_vals = flat[kt_hi, cell]
        out += w * ((1.0 - wt) * lo_vals + wt * hi_vals)
    return out


def query_points(frames: FrameSet, spec: ProblemSpec, x: np.ndarray, t: np.ndarray,
                 delta_cone: float = DELTA_CONE_DEFAULT) -> tuple[np.ndarray, np.ndarray]:
    """Batch reconstruction of u at physical points; returns (values, regions).

    Regions are int8 codes indexing ``REGION_CODES``.  All of spacetime is a
    legal query; every branch returns a classified value.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x, t = spec.shift_into_frame(x, t)
    norm = spec.normalized()

    values = np.zeros(t.shape)
    regions = np.full(t.shape, _CODE[Region.INSIDE_SUPPORT_CONE], dtype=np.int8)

    r2 = np.sum(np.square(x), axis=-1)
    pre = t < norm.t0
    regions[pre] = _CODE[Region.PRE_INITIAL]

    gap = norm.support_gap
    outside = ~pre & (r2 >= np.square(np.maximum(t - gap, 0.0)))
    regions[outside] = _CODE[Region.OUTSIDE_SUPPORT_CONE]

    s = r2 - t * t
    near = ~pre & ~outside & (np.abs(s) <= delta_cone * (r2 + t * t))
    regions[near] = _CODE[Region.NEAR_LIGHT_CONE]

    live = ~(pre | outside | near)
    if norm.obstacle.bounding_radius > 0.0 and np.any(live):
        in_obstacle = live & norm.obstacle.contains(x) & (t >= norm.t0)
        live &= ~in_obstacle  # value stays exactly 0 on the reflective obstacle
    if np.any(live):
        xi, tau = invert_batch(x[live], t[live])
        g = g_factor_batch(xi, tau, norm.n)
        values[live] = g * interpolate_batch(frames, xi, tau)
    return values, regions


def query_point(frames: FrameSet, spec: ProblemSpec, q,
                delta_cone: float = DELTA_CONE_DEFAULT) -> QueryResult:
    """Reconstruct u at a single physical spacetime point."""
    values, regions = query_points(frames, spec, q.x[None, :], np.array([q.t]), delta_cone)
    return QueryResult(float(values[0]), _REGION_FROM_CODE[int(regions[0])])


def query_frame(frames: FrameSet, spec: ProblemSpec, t: float, window, resolution) -> np.ndarray:
    """Reconstruct u on a regular physical-space lattice at time ``t``.

    ``window`` is a pair (min, max) per spatial axis and ``resolution`` the
    point count per axis; returns an array of shape ``resolution``.
    """
    window = np.asarray(window, dtype=float).reshape(spec.n, 2)
    resolution = np.broadcast_to(np.asarray(resolution, dtype=int), (spec.n,))
    axes = [np.linspace(window[a, 0], window[a, 1], resolution[a]) for a in range(spec.n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1).reshape(-1, spec.n)
    values, _ = query_points(frames, spec, pts, np.full(pts.shape[0], float(t)))
    return values.reshape(tuple(resolution))


_CODE = {
    Region.INSIDE_SUPPORT_CONE: 0,
    Region.OUTSIDE_SUPPORT_CONE: 1,
    Region.PRE_INITIAL: 2,
    Region.NEAR_LIGHT_CONE: 3,
}
_REGION_FROM_CODE = {v: k for k, v in _CODE.items()}

#: Region meaning of the int8 codes returned by :func:`query_points`.
REGION_CODES = tuple(_REGION_FROM_CODE[i] for i in range(len(_REGION_FROM_CODE)))
