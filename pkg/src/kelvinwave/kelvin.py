"""Conformal-weight machinery linking the unbounded and bounded problems.

Provides the weight G relating the physical field u and the bounded-domain
field V (u = G * V), the hyperboloid image of the initial-time slice, the
transformed initial data on it, and the grid sizing that turns a problem
description into a bounded rectilinear grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec, LightConeSingular
from .minkowski import (
    DELTA_CONE_DEFAULT,
    IntervalClass,
    SpacetimePoint,
    interval_batch,
    invert,
)

#: Gaussian fields are truncated to exactly zero where the exponent drops
#: below -40, giving a true compact support radius of sigma * sqrt(80).
GAUSSIAN_CUTOFF_EXPONENT = 40.0


@dataclass(frozen=True)
class GaussianPulse:
    """Isotropic Gaussian A * exp(-|x - mu|^2 / (2 sigma^2)), compactly truncated.

    Values and gradients are exactly zero outside ``support_radius`` so the
    causality containment argument holds with a genuine compact support.
    """

    amplitude: float
    sigma: float
    center: np.ndarray

    def __init__(self, amplitude, sigma, center):
        if not sigma > 0:
            raise InvalidSpec("Gaussian width sigma must be positive")
        object.__setattr__(self, "amplitude", float(amplitude))
        object.__setattr__(self, "sigma", float(sigma))
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(center, dtype=float)))

    @property
    def n(self) -> int:
        return self.center.size

    @property
    def support_radius(self) -> float:
        return self.sigma * math.sqrt(2.0 * GAUSSIAN_CUTOFF_EXPONENT)

    def support_bound(self) -> float:
        """Radius of the origin-centered ball containing {|x - mu| <= 9 sigma}."""
        return float(np.linalg.norm(self.center)) + 9.0 * self.sigma

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        expo = -np.sum(np.square(x - self.center), axis=-1) / (2.0 * self.sigma**2)
        out = np.where(expo < -GAUSSIAN_CUTOFF_EXPONENT, 0.0, self.amplitude * np.exp(expo))
        return out

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.value(x)[..., None] * (-(x - self.center) / self.sigma**2)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(x)


@dataclass(frozen=True)
class CallableField:
    """Wraps a user-supplied scalar field of compact support.

    The gradient, when not supplied, is estimated by centered finite
    differences with step ``fd_step`` (default support_radius / 900, i.e.
    sigma/100 for a Gaussian whose truncated support fills the ball).
    """

    fn: object
    support_radius: float
    grad: object = None
    fd_step: float | None = None

    def __post_init__(self):
        if not self.support_radius > 0:
            raise InvalidSpec("support_radius must be positive")
        if self.fd_step is None:
            object.__setattr__(self, "fd_step", self.support_radius / 900.0)

    def support_bound(self) -> float:
        return self.support_radius

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.fn(x), dtype=float)
        r2 = np.sum(np.square(x), axis=-1)
        return np.where(r2 >= self.support_radius**2, 0.0, out)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            g = np.asarray(self.grad(x), dtype=float)
        else:
            h = self.fd_step
            cols = []
            for i in range(x.shape[-1]):
                e = np.zeros(x.shape[-1])
                e[i] = h
                cols.append((self.value(x + e) - self.value(x - e)) / (2.0 * h))
            g = np.stack(cols, axis=-1)
        r2 = np.sum(np.square(x), axis=-1)
        return np.where(r2[..., None] >= self.support_radius**2, 0.0, g)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(x)


class NoObstacle:
    """Empty obstacle."""

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1], dtype=bool)

    @property
    def bounding_radius(self) -> float:
        return 0.0

    def validate(self, n: int, x0: float) -> None:
        pass


@dataclass(frozen=True)
class DiskObstacle:
    """Solid ball {|x - center| < radius} in spatial coordinates."""

    center: np.ndarray
    radius: float

    def __init__(self, center, radius):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(center, dtype=float)))
        object.__setattr__(self, "radius", float(radius))

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sum(np.square(x - self.center), axis=-1) < self.radius**2

    @property
    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.center)) + self.radius

    def validate(self, n: int, x0: float) -> None:
        if self.center.size != n:
            raise InvalidSpec("obstacle center dimension does not match n")
        if not self.radius > 0:
            raise InvalidSpec("obstacle radius must be positive")
        if not self.bounding_radius < x0:
            raise InvalidSpec("obstacle must lie strictly inside {|x| < x0}")


@dataclass(frozen=True)
class PolygonObstacle:
    """Simple (non-self-intersecting) polygon obstacle, n = 2 only."""

    vertices: np.ndarray

    def __init__(self, vertices):
        object.__setattr__(self, "vertices", np.asarray(vertices, dtype=float))

    def contains(self, x: np.ndarray) -> np.ndarray:
        import shapely

        x = np.asarray(x, dtype=float)
        poly = shapely.Polygon(self.vertices)
        flat = x.reshape(-1, 2)
        inside = shapely.contains_xy(poly, flat[:, 0], flat[:, 1])
        return inside.reshape(x.shape[:-1])

    @property
    def bounding_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def validate(self, n: int, x0: float) -> None:
        import shapely

        if n != 2:
            raise InvalidSpec("polygon obstacles are only defined for n = 2")
        if self.vertices.ndim != 2 or self.vertices.shape[0] < 3 or self.vertices.shape[1] != 2:
            raise InvalidSpec("polygon needs at least 3 two-dimensional vertices")
        if not shapely.Polygon(self.vertices).is_valid:
            raise InvalidSpec("polygon must be simple (non-self-intersecting)")
        if not self.bounding_radius < x0:
            raise InvalidSpec("obstacle must lie strictly inside {|x| < x0}")


@dataclass(frozen=True)
class ProblemSpec:
    """Full description of the unbounded initial value problem.

    ``f`` is the initial displacement, ``h`` the initial velocity (None means
    identically zero), both supported in {|x| < x0} at time t0 with t0 > x0.
    ``apex_shift`` is an optional translation (dx, dt) applied to physical
    coordinates before inversion; the default is the identity.
    """

    n: int
    t0: float
    x0: float
    f: object
    h: object = None
    obstacle: object = field(default_factory=NoObstacle)
    apex_shift: tuple | None = None

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise InvalidSpec(f"n must be 1, 2 or 3, got {self.n}")
        if self.apex_shift is not None:
            dx, dt = self.apex_shift
            dx = np.atleast_1d(np.asarray(dx, dtype=float))
            if dx.size != self.n:
                raise InvalidSpec("apex_shift spatial dimension does not match n")
            object.__setattr__(self, "apex_shift", (dx, float(dt)))
            # Invariants are statements about the frame with the apex at the
            # origin; constructing the normalized spec validates them there.
            self.normalized()
            return
        if not self.x0 > 0:
            raise InvalidSpec("x0 must be positive")
        if not self.t0 > self.x0:
            raise InvalidSpec(f"initial time must satisfy t0 > x0, got t0={self.t0}, x0={self.x0}")
        for name, fld in (("f", self.f), ("h", self.h)):
            if fld is not None and fld.support_bound() > self.x0:
                raise InvalidSpec(f"support of {name} must lie inside {{|x| < x0}}")
        self.obstacle.validate(self.n, self.x0)

    @property
    def support_gap(self) -> float:
        """t0 - x0, the causal gap between the support cone and the light cone."""
        return self.t0 - self.x0

    def f_value(self, x):
        return self.f.value(x)

    def f_gradient(self, x):
        return self.f.gradient(x)

    def h_value(self, x):
        if self.h is None:
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1])
        return self.h.value(x)

    def shift_into_frame(self, x, t):
        """Map physical coordinates into the normalized (apex at origin) frame."""
        if self.apex_shift is None:
            return x, t
        dx, dt = self.apex_shift
        return np.asarray(x, dtype=float) - dx, np.asarray(t, dtype=float) - dt

    def normalized(self) -> "ProblemSpec":
        """Equivalent spec in the frame where the cone apex sits at the origin."""
        if self.apex_shift is None:
            return self
        return ProblemSpec(self.n, self.t0 - self.apex_shift[1], self.x0,
                           _shift_field(self.f, self.apex_shift[0]),
                           None if self.h is None else _shift_field(self.h, self.apex_shift[0]),
                           _shift_obstacle(self.obstacle, self.apex_shift[0]),
                           None)


def _shift_field(fld, dx):
    if isinstance(fld, GaussianPulse):
        return GaussianPulse(fld.amplitude, fld.sigma, fld.center - dx)
    return CallableField(lambda x: fld.value(x + dx), fld.support_radius,
                         grad=lambda x: fld.gradient(x + dx))


def _shift_obstacle(obs, dx):
    if isinstance(obs, DiskObstacle):
        return DiskObstacle(obs.center - dx, obs.radius)
    if isinstance(obs, PolygonObstacle):
        return PolygonObstacle(obs.vertices - dx)
    return obs


@dataclass(frozen=True)
class GridSpec:
    """Rectilinear discretization of the bounded domain.

    ``M`` and ``N`` follow the sizing formulas ceil((xi0 + tau0)/dxi)^n and
    ceil(tau0/dtau) applied to the requested steps; the actual spacings
    ``dxi``/``dtau`` are snapped so the grid spans exactly
    [-(xi0+tau0)/2, +(xi0+tau0)/2] per axis and [-tau0, 0] in tau.
    """

    n: int
    requested_dxi: float
    requested_dtau: float
    dxi: float
    dtau: float
    xi_extent: float
    tau_start: float
    tau_end: float
    points_per_axis: int
    M: int
    N: int

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.n

    def xi_axis(self) -> np.ndarray:
        return np.linspace(-self.xi_extent, self.xi_extent, self.points_per_axis)

    def tau_levels(self) -> np.ndarray:
        return self.tau_start + self.dtau * np.arange(self.N + 1)


def size_grid(x0: float, t0: float, dxi: float, dtau: float, n: int) -> GridSpec:
    """Size the bounded grid from the horizon radius x0 and initial time t0.

    xi0 = |x0 / (x0^2 - t0^2)| and tau0 = |t0 / (x0^2 - t0^2)| fix the grid
    extents; the spatial box is symmetric about the tau-axis.
    """
    if not (t0 > x0 > 0):
        raise InvalidSpec(f"grid sizing requires t0 > x0 > 0, got t0={t0}, x0={x0}")
    if not (dxi > 0 and dtau > 0):
        raise InvalidSpec("grid steps must be positive")
    denom = x0 * x0 - t0 * t0
    xi0 = abs(x0 / denom)
    tau0 = abs(t0 / denom)
    width = xi0 + tau0
    # Fuzzed ceiling so ratios that are integers up to roundoff do not bump
    # the count by one.
    m = math.ceil(width / dxi * (1.0 - 1e-12))
    if m < 3:
        raise InvalidSpec("requested dxi is too coarse for the domain width")
    n_steps = math.ceil(tau0 / dtau * (1.0 - 1e-12))
    return GridSpec(
        n=n,
        requested_dxi=dxi,
        requested_dtau=dtau,
        dxi=width / (m - 1),
        dtau=tau0 / n_steps,
        xi_extent=width / 2.0,
        tau_start=-tau0,
        tau_end=0.0,
        points_per_axis=m,
        M=m**n,
        N=n_steps,
    )


def _g_exponent(n: int) -> float:
    return (n - 1) / 2.0


def g_factor(p, n: int, delta_cone: float = DELTA_CONE_DEFAULT) -> float:
    """Weight G = | |xi|^2 - tau^2 |^((n-1)/2) relating u = G * V."""
    if isinstance(p, SpacetimePoint):
        s = p.interval()
        scale = float(np.dot(p.x, p.x) + p.t**2)
        if abs(s) <= delta_cone * scale:
            raise LightConeSingular(f"G undefined on the light cone at (x={p.x}, t={p.t})")
        return abs(s) ** _g_exponent(n)
    raise TypeError("g_factor expects a SpacetimePoint; use g_factor_batch for arrays")


def g_factor_batch(xi: np.ndarray, tau: np.ndarray, n: int) -> np.ndarray:
    s = interval_batch(np.asarray(xi, dtype=float), np.asarray(tau, dtype=float))
    return np.abs(s) ** _g_exponent(n)


def g_factor_dtau(p: SpacetimePoint, n: int, delta_cone: float = DELTA_CONE_DEFAULT) -> float:
    """Analytic dG/dtau; equals tau / sqrt(tau^2 - |xi|^2) for n = 2 inside the cone."""
    s = p.interval()
    scale = float(np.dot(p.x, p.x) + p.t**2)
    if abs(s) <= delta_cone * scale:
        raise LightConeSingular(f"dG/dtau undefined on the light cone at (x={p.x}, t={p.t})")
    if n == 1:
        return 0.0
    return -(n - 1) * p.t * math.copysign(1.0, s) * abs(s) ** (_g_exponent(n) - 1.0)


def _g_dtau_batch(xi: np.ndarray, tau: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(np.broadcast_shapes(np.shape(tau)))
    s = interval_batch(xi, tau)
    return -(n - 1) * tau * np.sign(s) * np.abs(s) ** (_g_exponent(n) - 1.0)


def init_surface_tau(xi, t0: float):
    """tau-coordinate of the initial-slice image below a bounded-domain point.

    The image of {t = t0} is the hyperboloid tau / (|xi|^2 - tau^2) = t0;
    this returns its (negative) branch tau = (-1 - sqrt(1 + 4 t0^2 |xi|^2)) / (2 t0).
    """
    if not t0 > 0:
        raise InvalidSpec("t0 must be positive")
    xi = np.asarray(xi, dtype=float)
    r2 = np.sum(np.square(xi), axis=-1) if xi.ndim else np.square(xi)
    out = (-1.0 - np.sqrt(1.0 + 4.0 * t0 * t0 * r2)) / (2.0 * t0)
    return float(out) if np.ndim(out) == 0 else out


def transform_initial_data(spec: ProblemSpec, p: SpacetimePoint,
                           surface_tol: float | None = None) -> tuple[float, float]:
    """Initial values (V, dV/dtau) for the bounded problem at a point of the
    hyperboloid image of the initial slice.

    V = (f o Inv) / G and dV/dtau = (dU/dtau)/G - (f o Inv)/G^2 * dG/dtau,
    with dU/dtau = h * dt/dtau + sum_i df/dx_i * dx_i/dtau read off the
    inversion Jacobian.  Points mapping outside the support return (0, 0).
    """
    norm = spec.normalized()
    if p.classify() is IntervalClass.LIGHTLIKE:
        raise LightConeSingular(f"initial data undefined on the light cone at (x={p.x}, t={p.t})")
    if surface_tol is not None:
        expected = init_surface_tau(p.x, norm.t0)
        if abs(p.t - expected) > surface_tol * max(1.0, abs(expected)):
            raise InvalidSpec(
                f"point tau={p.t} is not on the initial surface (expected {expected})")
    v, dv = transform_initial_data_batch(norm, p.x[None, :], np.array([p.t]))
    return float(v[0]), float(dv[0])


def transform_initial_data_batch(spec: ProblemSpec, xi: np.ndarray,
                                 tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized initial data on the hyperboloid; ``xi`` is (..., n)."""
    xi = np.asarray(xi, dtype=float)
    tau = np.asarray(tau, dtype=float)
    n = spec.n
    s = interval_batch(xi, tau)  # strictly negative on the hyperboloid
    x = xi / s[..., None]
    v = np.zeros(tau.shape)
    dv = np.zeros(tau.shape)
    inside = np.sum(np.square(x), axis=-1) < spec.x0**2
    if not np.any(inside):
        return v, dv
    xi_i, tau_i, s_i, x_i = xi[inside], tau[inside], s[inside], x[inside]
    f_val = spec.f_value(x_i)
    h_val = spec.h_value(x_i)
    grad_f = spec.f_gradient(x_i)
    g = np.abs(s_i) ** _g_exponent(n)
    dg = _g_dtau_batch(xi_i, tau_i, n)
    # Last column of the inversion Jacobian: derivatives of (x, t) w.r.t. tau.
    dx_dtau = 2.0 * xi_i * (tau_i / (s_i * s_i))[..., None]
    dt_dtau = 1.0 / s_i + 2.0 * tau_i * tau_i / (s_i * s_i)
    du_dtau = h_val * dt_dtau + np.sum(grad_f * dx_dtau, axis=-1)
    v[inside] = f_val / g
    dv[inside] = du_dtau / g - f_val / (g * g) * dg
    return v, dv


def kelvin_transform_field(u, p: SpacetimePoint, n: int,
                           delta_cone: float = DELTA_CONE_DEFAULT) -> float:
    """Weighted pullback phi^((n-1)/2) * u(Inv(p)) of a spacetime field ``u``.

    Maps wave solutions to wave solutions; used to check that property
    numerically.  ``u`` is a callable of (x, t).
    """
    q = invert(p, delta_cone)
    s = p.interval()
    phi = abs(1.0 / s)
    return phi ** _g_exponent(n) * float(u(q.x, q.t))
