"""Leapfrog FDTD march on the bounded (xi, tau) grid.

The marching domain at a given level tau is the image of the physical support
cone: the ball |xi| < min(-tau, 1/(t0-x0) + tau).  Nodes enter the evolution
when tau crosses the hyperboloid image of the initial slice (activation), are
held at zero inside the obstacle image and outside the support image, and
carry a short Taylor extension of the initial data just below the hyperboloid
so that stencils and interpolation cells straddling it stay second order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import CFLViolation, InvalidSpec, NumericBlowUp
from .kelvin import (
    GridSpec,
    ProblemSpec,
    init_surface_tau,
    transform_initial_data_batch,
)
from .stencil import leapfrog_interior

#: CFL safety bound: dtau <= CFL_SAFETY * dxi / sqrt(n).
CFL_SAFETY = 0.9

#: Field magnitude treated as a numerical blow-up.
BLOWUP_LIMIT = 1e12


class NodeState(IntEnum):
    INACTIVE_PRE_INIT = 0
    ACTIVE = 1
    OBSTACLE = 2
    OUTER_ZERO = 3


class BoundedGrid:
    """State of the bounded-domain march; build with :func:`build_grid`."""

    def __init__(self, spec: ProblemSpec, grid_spec: GridSpec,
                 backend: str = "auto", workers: int | None = None,
                 init_mode: str = "activation"):
        spec = spec.normalized()
        if grid_spec.n != spec.n:
            raise InvalidSpec("grid and problem dimensions differ")
        if init_mode not in ("activation", "flat"):
            raise InvalidSpec(f"unknown init_mode {init_mode!r}")
        cfl_limit = CFL_SAFETY * grid_spec.dxi / math.sqrt(spec.n)
        if grid_spec.dtau > cfl_limit * (1.0 + 1e-12):
            raise CFLViolation(
                f"dtau={grid_spec.dtau:.6g} exceeds stability bound "
                f"{CFL_SAFETY}*dxi/sqrt(n)={cfl_limit:.6g}")
        self.spec = spec
        self.gs = grid_spec
        self.backend = backend
        self.workers = workers
        self.init_mode = init_mode
        self.lam2 = (grid_spec.dtau / grid_spec.dxi) ** 2
        self.gap = spec.support_gap
        self.taus = grid_spec.tau_levels()

        axis = grid_spec.xi_axis()
        mesh = np.meshgrid(*([axis] * spec.n), indexing="ij")
        self.xi = np.stack(mesh, axis=-1)          # (*shape, n)
        self.r2 = np.sum(np.square(self.xi), axis=-1)
        self.r = np.sqrt(self.r2)

        self.tau_init = init_surface_tau(self.xi, spec.t0)
        v0, dv0 = transform_initial_data_batch(spec, self.xi, self.tau_init)
        # The physical field is undefined inside the obstacle; its image on
        # the initial slice seeds zero.
        if self._has_obstacle():
            s = self.tau_init / spec.t0
            x_surface = self.xi / s[..., None]
            inside_obs = spec.obstacle.contains(x_surface)
            v0 = np.where(inside_obs, 0.0, v0)
            dv0 = np.where(inside_obs, 0.0, dv0)
        self.v0 = v0
        self.dv0 = dv0
        self.vtt0 = self._surface_curvature()

        # Nodes whose stencil or interpolation cell can straddle the
        # hyperboloid get a Taylor extension of the initial data.
        self.collar = grid_spec.dtau + grid_spec.dxi

        # Below the waist level the outer boundary of the marching region is
        # the support-cone surface, where V vanishes identically; above it
        # the boundary is the light cone itself, which outgoing waves cross
        # freely (light-like, no boundary condition), so the march continues
        # across it and zeroing would reflect them back.
        self.tau_waist = -0.5 / self.gap

        if init_mode == "flat":
            deviation = spec.x0**2 / (spec.t0 * (spec.t0**2 - spec.x0**2))
            if not deviation < grid_spec.dtau:
                raise InvalidSpec(
                    f"flat init requires the hyperboloid deviation {deviation:.3g} "
                    f"across the support image to be below dtau={grid_spec.dtau:.3g}")
            plane = -1.0 / spec.t0
            self.k_start = int(np.searchsorted(self.taus, plane - 1e-15))
            self.tau_act = np.full_like(self.tau_init, self.taus[self.k_start])
        else:
            self.k_start = 0
            self.tau_act = self.tau_init

        self.k = self.k_start
        shape = grid_spec.shape
        self.V_prev = np.zeros(shape)
        self.V_curr = np.zeros(shape)
        self.V_next = np.zeros(shape)
        self.act_curr = np.zeros(shape, dtype=bool)
        self.seeded = False

    def _has_obstacle(self) -> bool:
        return self.spec.obstacle.bounding_radius > 0.0

    def _surface_curvature(self) -> np.ndarray:
        """d^2 V / d tau^2 on the initial surface, from the seeded data.

        With W(xi) = V on the surface, D(xi) = dV/dtau there and T(xi) the
        surface height, the wave equation gives
        V_tautau = (lap W - 2 grad D . grad T - D lap T) / (1 - |grad T|^2),
        well posed because the surface is spacelike (|grad T| < 1).
        Quadratic seeding keeps the activation band second-order clean.
        """
        t0 = self.spec.t0
        dxi = self.gs.dxi
        q = np.sqrt(1.0 + 4.0 * t0 * t0 * self.r2)
        grad_t = -2.0 * t0 * self.xi / q[..., None]
        lap_t = -2.0 * t0 * (self.spec.n / q - 4.0 * t0 * t0 * self.r2 / q**3)

        lap_w = np.zeros(self.gs.shape)
        dot_gd_gt = np.zeros(self.gs.shape)
        inner = (slice(1, -1),) * self.spec.n
        for axis in range(self.spec.n):
            hi = tuple(slice(2, None) if a == axis else slice(1, -1)
                       for a in range(self.spec.n))
            lo = tuple(slice(None, -2) if a == axis else slice(1, -1)
                       for a in range(self.spec.n))
            lap_w[inner] += (self.v0[hi] - 2.0 * self.v0[inner] + self.v0[lo]) / dxi**2
            grad_d = (self.dv0[hi] - self.dv0[lo]) / (2.0 * dxi)
            dot_gd_gt[inner] += grad_d * grad_t[inner + (axis,)]
        denom = 1.0 - np.sum(np.square(grad_t), axis=-1)
        return (lap_w - 2.0 * dot_gd_gt - self.dv0 * lap_t) / denom

    def _support_mask(self, tau: float) -> np.ndarray:
        rad = min(-tau, 1.0 / self.gap + tau)
        if rad <= 0.0:
            return np.zeros(self.gs.shape, dtype=bool)
        return self.r < rad

    def _obstacle_mask(self, tau: float, support: np.ndarray) -> np.ndarray:
        if not self._has_obstacle():
            return np.zeros(self.gs.shape, dtype=bool)
        out = np.zeros(self.gs.shape, dtype=bool)
        idx = np.nonzero(support)
        if idx[0].size == 0:
            return out
        sigma = self.r2[idx] - tau * tau  # strictly negative on support nodes
        t_phys = tau / sigma
        cand = t_phys > self.spec.t0
        if np.any(cand):
            sub = tuple(ix[cand] for ix in idx)
            x_phys = self.xi[sub] / sigma[cand, None]
            out[sub] = self.spec.obstacle.contains(x_phys)
        return out

    def masks(self, tau: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(marching, obstacle, support) boolean masks at level tau.

        ``support`` is the support-cone image (for classification); the
        marching set is gated by it only below the waist level.
        """
        support = self._support_mask(tau)
        obstacle = self._obstacle_mask(tau, support)
        marching = ~obstacle & (tau >= self.tau_act)
        if tau <= self.tau_waist:
            marching &= self.r < 1.0 / self.gap + tau
        return marching, obstacle, support

    def node_states(self, tau: float) -> np.ndarray:
        """Per-node :class:`NodeState` classification at level tau."""
        active, obstacle, support = self.masks(tau)
        out = np.full(self.gs.shape, NodeState.OUTER_ZERO, dtype=np.int8)
        out[support] = NodeState.INACTIVE_PRE_INIT
        out[obstacle] = NodeState.OBSTACLE
        out[active] = NodeState.ACTIVE
        return out

    def _taylor(self, tau: float, mask: np.ndarray, out: np.ndarray) -> None:
        off = tau - self.tau_init[mask]
        out[mask] = self.v0[mask] + off * (self.dv0[mask] + 0.5 * off * self.vtt0[mask])

    def _assemble_initial(self, tau: float) -> tuple[np.ndarray, np.ndarray]:
        active, obstacle, support = self.masks(tau)
        v = np.zeros(self.gs.shape)
        self._taylor(tau, active, v)
        ext = support & ~active & ~obstacle & (self.tau_act - tau <= self.collar)
        self._taylor(tau, ext, v)
        return v, active


def build_grid(spec: ProblemSpec, grid_spec: GridSpec, backend: str = "auto",
               workers: int | None = None, init_mode: str = "activation") -> BoundedGrid:
    """Classify the bounded grid against the problem geometry; checks CFL."""
    return BoundedGrid(spec, grid_spec, backend, workers, init_mode)


def seed_initial(grid: BoundedGrid) -> BoundedGrid:
    """Seed the starting level and its leapfrog ghost from the initial surface."""
    tau0 = grid.taus[grid.k_start]
    grid.V_curr, grid.act_curr = grid._assemble_initial(tau0)
    grid.V_prev, _ = grid._assemble_initial(tau0 - grid.gs.dtau)
    grid.k = grid.k_start
    grid.seeded = True
    return grid


def step(grid: BoundedGrid) -> BoundedGrid:
    """Advance one leapfrog level.

    Continuing nodes take the stencil value, nodes crossing the initial
    surface are seeded by Taylor expansion, obstacle and outer nodes are
    re-zeroed, and a Taylor collar is maintained just below the surface.
    """
    if not grid.seeded:
        raise InvalidSpec("grid must be seeded before stepping")
    if grid.k >= grid.gs.N:
        raise InvalidSpec("grid already marched to the final level")
    tau_k = grid.taus[grid.k]
    tau_next = grid.taus[grid.k + 1]

    leapfrog_interior(grid.V_prev, grid.V_curr, grid.V_next, grid.lam2,
                      grid.backend, grid.workers)

    act_next, obstacle, support = grid.masks(tau_next)
    cont = act_next & grid.act_curr
    new = act_next & ~grid.act_curr
    crossing = new & (grid.tau_act > tau_k)

    out = np.zeros(grid.gs.shape)
    out[cont] = grid.V_next[cont]
    grid._taylor(tau_next, crossing, out)
    ext = support & ~act_next & ~obstacle & (grid.tau_act - tau_next <= grid.collar)
    grid._taylor(tau_next, ext, out)

    peak = float(np.max(np.abs(out))) if out.size else 0.0
    if not np.isfinite(peak) or peak > BLOWUP_LIMIT:
        raise NumericBlowUp(
            f"|V| reached {peak:.3g} at level {grid.k + 1}; check CFL and seeding")

    grid.V_prev, grid.V_curr, grid.V_next = grid.V_curr, out, grid.V_prev
    grid.act_curr = act_next
    grid.k += 1
    return grid


@dataclass(frozen=True)
class FrameSet:
    """Recorded history of the bounded-domain field V.

    ``frames[k]`` holds V at time ``taus[k]``; tau values are strictly
    increasing with uniform spacing stride * dtau (the final interval may be
    shorter when the step count is not a stride multiple).
    """

    grid: GridSpec
    taus: np.ndarray
    frames: np.ndarray
    stride: int = 1
    init_mode: str = "activation"
    clamp_below: float = 0.0

    def __post_init__(self):
        if self.frames.shape[0] != self.taus.shape[0]:
            raise InvalidSpec("frame count does not match tau count")
        if self.taus.size > 1 and not np.all(np.diff(self.taus) > 0):
            raise InvalidSpec("frame tau values must be strictly increasing")

    @property
    def n(self) -> int:
        return self.grid.n


def run(spec: ProblemSpec, grid_spec: GridSpec, *, stride: int = 1,
        init_mode: str = "activation", backend: str = "auto",
        workers: int | None = None) -> FrameSet:
    """March the bounded problem to tau = 0 and record the history.

    Deterministic: identical inputs produce bit-identical frames regardless
    of the worker count.
    """
    if stride < 1:
        raise InvalidSpec("stride must be >= 1")
    grid = build_grid(spec, grid_spec, backend, workers, init_mode)
    seed_initial(grid)
    recorded = [grid.V_curr.copy()]
    taus = [grid.taus[grid.k]]
    total = grid.gs.N - grid.k_start
    for i in range(total):
        step(grid)
        if (i + 1) % stride == 0 or (i + 1) == total:
            recorded.append(grid.V_curr.copy())
            taus.append(grid.taus[grid.k])
    clamp = 0.0
    if init_mode == "flat":
        clamp = grid.taus[grid.k_start] - grid_spec.tau_start
    return FrameSet(grid_spec, np.asarray(taus), np.stack(recorded, axis=0),
                    stride=stride, init_mode=init_mode, clamp_below=clamp)


def discrete_energy(grid: BoundedGrid) -> float:
    """Leapfrog energy functional of the two live levels; non-negative.

    Sum of squared time differences plus squared spatial differences of the
    level average, scaled by the cell volume.
    """
    gs = grid.gs
    cell = gs.dxi**gs.n
    vt = (grid.V_curr - grid.V_prev) / gs.dtau
    total = float(np.sum(vt * vt))
    mid = 0.5 * (grid.V_curr + grid.V_prev)
    for axis in range(gs.n):
        d = np.diff(mid, axis=axis) / gs.dxi
        total += float(np.sum(d * d))
    return 0.5 * cell * total
