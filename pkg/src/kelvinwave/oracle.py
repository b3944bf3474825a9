"""Independent verification tools.

An exact d'Alembert solution for n = 1, a plain truncated-domain leapfrog
reference for any n (sized so boundary reflections cannot reach the
comparison window), and comparison / convergence harnesses.  Nothing here
touches the conformal transform chain; only the raw stencil kernel is shared
with the main solver, and that kernel is itself checked against the exact
1-D solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import InvalidSpec
from .kelvin import GaussianPulse, ProblemSpec, size_grid
from .query import query_points
from .solver import CFL_SAFETY, FrameSet, run
from .stencil import leapfrog_interior


def dalembert_exact(f, h, x: float, t: float, t0: float) -> float:
    """Classical 1-D closed form: averaged traveling data plus velocity integral.

    The velocity term is integrated by adaptive quadrature to 1e-10 absolute.
    ``f`` and ``h`` are callables on scalar x (``h`` may be None for zero).
    """
    dt = t - t0
    f_lo = float(np.asarray(f(np.array([x - dt]))))
    f_hi = float(np.asarray(f(np.array([x + dt]))))
    value = 0.5 * (f_lo + f_hi)
    if h is not None:
        integral, _ = quad(lambda s: float(np.asarray(h(np.array([s])))),
                           x - dt, x + dt, epsabs=1e-10, limit=200)
        value += 0.5 * integral
    return value


def dalembert_exact_batch(f, h, xs: np.ndarray, ts: np.ndarray, t0: float) -> np.ndarray:
    """Vectorized closed form; quadrature falls back to per-point evaluation."""
    xs = np.asarray(xs, dtype=float).reshape(-1)
    ts = np.asarray(ts, dtype=float).reshape(-1)
    dt = ts - t0
    lo = (xs - dt)[:, None]
    hi = (xs + dt)[:, None]
    out = 0.5 * (np.asarray(f(lo)).reshape(-1) + np.asarray(f(hi)).reshape(-1))
    if h is not None:
        out += np.array([0.5 * quad(lambda s: float(np.asarray(h(np.array([s])))),
                                    float(a), float(b), epsabs=1e-10, limit=200)[0]
                         for a, b in zip(lo[:, 0], hi[:, 0])])
    return out


@dataclass(frozen=True)
class ReferenceFrames:
    """Physical-domain history from the truncated-box reference run."""

    axes: tuple                    # recorded axis coordinates per spatial dim
    times: np.ndarray              # recorded physical times
    frames: np.ndarray             # (T, *recorded spatial shape)
    dx: float
    dt: float
    box_half: float


def run_reference(spec: ProblemSpec, dx: float, dt: float, t_max: float, *,
                  box_half: float | None = None, crop_radius: float | None = None,
                  record_every: int = 1, backend: str = "auto",
                  workers: int | None = None,
                  _allow_small_box: bool = False) -> ReferenceFrames:
    """Leapfrog solution of the physical problem on a truncated box.

    The box half-width must be at least x0 + 2 (t_max - t0) so that
    truncation-boundary effects cannot reach |x| <= x0 + (t_max - t0) before
    t_max (speed-1 causality buffer).
    """
    spec = spec.normalized()
    required = spec.x0 + 2.0 * (t_max - spec.t0)
    if box_half is None:
        box_half = required
    if box_half < required - 1e-12 and not _allow_small_box:
        raise InvalidSpec(
            f"reference box half-width {box_half} violates the reflection "
            f"buffer (needs >= x0 + 2*(t_max - t0) = {required})")
    if not t_max > spec.t0:
        raise InvalidSpec("t_max must exceed t0")

    m = math.ceil(2.0 * box_half / dx) + 1
    dx_act = 2.0 * box_half / (m - 1)
    cfl = CFL_SAFETY * dx_act / math.sqrt(spec.n)
    steps = max(1, math.ceil((t_max - spec.t0) / min(dt, cfl)))
    dt_act = (t_max - spec.t0) / steps
    lam2 = (dt_act / dx_act) ** 2

    axis = np.linspace(-box_half, box_half, m)
    mesh = np.meshgrid(*([axis] * spec.n), indexing="ij")
    pts = np.stack(mesh, axis=-1)

    free = ~spec.obstacle.contains(pts) if spec.obstacle.bounding_radius > 0 else None

    def clamp(u):
        if free is not None:
            u *= free
        return u

    u_prev = clamp(spec.f_value(pts))
    lap = np.zeros_like(u_prev)
    leapfrog_interior(u_prev, u_prev, lap, 1.0, backend, workers)  # 2u - u + lap = u + lap
    lap -= u_prev
    u_curr = clamp(u_prev + dt_act * spec.h_value(pts) + 0.5 * lam2 * lap)

    if crop_radius is None:
        sel = slice(None)
    else:
        keep = np.abs(axis) <= crop_radius + dx_act
        start, stop = int(np.argmax(keep)), m - int(np.argmax(keep[::-1]))
        sel = slice(start, stop)
    window = (sel,) * spec.n
    rec_axes = tuple(axis[sel] for _ in range(spec.n))

    times = [spec.t0, spec.t0 + dt_act]
    recorded = [u_prev[window].copy(), u_curr[window].copy()]
    u_next = np.zeros_like(u_prev)
    for k in range(2, steps + 1):
        leapfrog_interior(u_prev, u_curr, u_next, lam2, backend, workers)
        clamp(u_next)
        u_prev, u_curr, u_next = u_curr, u_next, u_prev
        if k % record_every == 0 or k == steps:
            times.append(spec.t0 + k * dt_act)
            recorded.append(u_curr[window].copy())
    return ReferenceFrames(rec_axes, np.asarray(times), np.stack(recorded, axis=0),
                           dx_act, dt_act, box_half)


def reference_value_grid(reference: ReferenceFrames, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Lattice points (P, n) and times of one recorded reference frame."""
    mesh = np.meshgrid(*reference.axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, n), reference.times


@dataclass(frozen=True)
class ComparisonReport:
    """Relative error of the reconstructed solution against a reference."""

    description: str
    l2_rel: float
    linf_rel: float
    points: np.ndarray             # (P, n+1) compared spacetime points (t last)
    residuals: np.ndarray          # (P,) signed got - ref
    resolutions: dict = field(default_factory=dict)

    def summary(self) -> str:
        return (f"{self.description}: L2_rel={self.l2_rel:.4e} "
                f"Linf_rel={self.linf_rel:.4e} over {self.residuals.size} points")


#: Residual tables larger than this are evenly subsampled.
MAX_RESIDUAL_ROWS = 100_000


def compare(frames: FrameSet, spec: ProblemSpec, reference: ReferenceFrames,
            window: tuple[float, float, float], description: str = "kelvin vs reference",
            resolutions: dict | None = None) -> ComparisonReport:
    """Evaluate the reconstruction on the reference lattice inside a window.

    ``window`` is (t_min, t_max, radius): times are reference frame times in
    [t_min, t_max], points the reference lattice nodes with |x| <= radius.
    """
    t_min, t_max, radius = window
    pts, times = reference_value_grid(reference, spec.n)
    in_ball = np.sum(np.square(pts), axis=-1) <= radius * radius
    pts = pts[in_ball]
    sq_diff = 0.0
    sq_ref = 0.0
    max_diff = 0.0
    max_ref = 0.0
    rows = []
    for k, t in enumerate(times):
        if not (t_min - 1e-12 <= t <= t_max + 1e-12):
            continue
        ref_vals = reference.frames[k].reshape(-1)[in_ball]
        got, _ = query_points(frames, spec, pts, np.full(pts.shape[0], float(t)))
        diff = got - ref_vals
        sq_diff += float(np.sum(diff * diff))
        sq_ref += float(np.sum(ref_vals * ref_vals))
        max_diff = max(max_diff, float(np.max(np.abs(diff), initial=0.0)))
        max_ref = max(max_ref, float(np.max(np.abs(ref_vals), initial=0.0)))
        rows.append((np.column_stack([pts, np.full(pts.shape[0], t)]), diff))
    if not rows:
        raise InvalidSpec("comparison window contains no reference frames")
    all_pts = np.concatenate([r[0] for r in rows])
    all_res = np.concatenate([r[1] for r in rows])
    if all_res.size > MAX_RESIDUAL_ROWS:
        stride = all_res.size // MAX_RESIDUAL_ROWS + 1
        all_pts, all_res = all_pts[::stride], all_res[::stride]
    l2_rel = math.sqrt(sq_diff / sq_ref) if sq_ref > 0 else math.inf
    linf_rel = max_diff / max_ref if max_ref > 0 else math.inf
    return ComparisonReport(description, l2_rel, linf_rel, all_pts, all_res,
                            resolutions or {})


@dataclass(frozen=True)
class ConvergenceReport:
    """(resolution, error) pairs with the least-squares fitted order."""

    scenario: str
    deltas: np.ndarray
    errors: np.ndarray
    order: float | None
    fit_residual: float | None

    def summary(self) -> str:
        pairs = ", ".join(f"({d:.3g}, {e:.3e})" for d, e in zip(self.deltas, self.errors))
        order = "undefined" if self.order is None else f"{self.order:.3f}"
        return f"{self.scenario}: order={order} from [{pairs}]"


def fit_order(deltas: np.ndarray, errors: np.ndarray) -> tuple[float | None, float | None]:
    """Least-squares slope of log error vs log resolution; None if degenerate."""
    deltas = np.asarray(deltas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(~np.isfinite(errors)) or np.any(errors <= 0):
        return None, None
    coeffs, res, *_ = np.polyfit(np.log2(deltas), np.log2(errors), 1, full=True)
    residual = float(res[0]) if res.size else 0.0
    return float(coeffs[0]), residual


def _standing_wave_error(cells: int, lam: float = 0.5, t_final: float = 0.75) -> float:
    """Raw-stencil oracle: 1-D standing wave on a Dirichlet box."""
    dx = 1.0 / cells
    dt = lam * dx
    steps = round(t_final / dt)
    x = np.linspace(0.0, 1.0, cells + 1)
    u_prev = np.sin(np.pi * x)
    lap = np.zeros_like(u_prev)
    leapfrog_interior(u_prev, u_prev, lap, 1.0, "auto", 1)
    lap -= u_prev
    u_curr = u_prev + 0.5 * lam * lam * lap
    u_next = np.zeros_like(u_prev)
    for _ in range(1, steps):
        leapfrog_interior(u_prev, u_curr, u_next, lam * lam, "auto", 1)
        u_prev, u_curr, u_next = u_curr, u_next, u_prev
    exact = np.sin(np.pi * x) * np.cos(np.pi * steps * dt)
    return float(np.max(np.abs(u_curr - exact)))


def _default_1d_spec() -> ProblemSpec:
    return ProblemSpec(1, 2.0, 1.0, GaussianPulse(1.0, 0.1, [0.0]))


def _dalembert_query_set(spec: ProblemSpec, count: int = 1000,
                         t_factor: float = 100.0, seed: int = 20240) -> tuple[np.ndarray, np.ndarray]:
    """Scattered queries inside the support cone, half targeted at the pulses."""
    rng = np.random.default_rng(seed)
    t = spec.t0 * np.exp(rng.uniform(0.0, math.log(t_factor), count))
    reach = t - spec.support_gap
    x = np.empty(count)
    on_pulse = rng.random(count) < 0.5
    width = spec.f.support_radius
    pulse_pos = (t - spec.t0) + rng.uniform(-width, width, count)
    pulse_pos *= np.where(rng.random(count) < 0.5, 1.0, -1.0)
    x[on_pulse] = np.clip(pulse_pos[on_pulse], -reach[on_pulse] * 0.999,
                          reach[on_pulse] * 0.999)
    x[~on_pulse] = rng.uniform(-1.0, 1.0, count)[~on_pulse] * reach[~on_pulse] * 0.999
    return x[:, None], t


def pipeline_dalembert_error(spec: ProblemSpec, dxi: float, dtau: float,
                             queries: tuple[np.ndarray, np.ndarray] | None = None) -> float:
    """Relative L2 error of the full pipeline against the exact 1-D solution."""
    if spec.n != 1:
        raise InvalidSpec("the d'Alembert oracle is one-dimensional")
    if queries is None:
        queries = _dalembert_query_set(spec)
    x, t = queries
    gs = size_grid(spec.x0, spec.t0, dxi, dtau, spec.n)
    frames = run(spec, gs)
    got, _ = query_points(frames, spec, x, t)
    exact = dalembert_exact_batch(spec.f_value, None if spec.h is None else spec.h_value,
                                  x[:, 0], t, spec.t0)
    denom = float(np.linalg.norm(exact))
    if denom == 0.0:
        return 0.0 if float(np.linalg.norm(got)) == 0.0 else math.inf
    return float(np.linalg.norm(got - exact) / denom)


def convergence_study(scenario: str, levels: int = 3, **params) -> ConvergenceReport:
    """Run a scenario at resolutions delta, delta/2, delta/4, ... and fit the order.

    Scenarios: ``standing_wave_1d`` (raw stencil vs separable solution) and
    ``dalembert_1d`` (full pipeline vs exact closed form).
    """
    if levels < 3:
        raise InvalidSpec("a convergence study needs at least 3 levels")
    if scenario == "standing_wave_1d":
        base = int(params.pop("base_cells", 32))
        deltas = np.array([1.0 / (base * 2**i) for i in range(levels)])
        errors = np.array([_standing_wave_error(base * 2**i, **params) for i in range(levels)])
    elif scenario == "dalembert_1d":
        spec = params.pop("spec", None) or _default_1d_spec()
        base = float(params.pop("base_dxi", (1.0 / 400)))
        queries = params.pop("queries", None) or _dalembert_query_set(spec)
        deltas = np.array([base / 2**i for i in range(levels)])
        errors = []
        for d in deltas:
            dtau = CFL_SAFETY * d / math.sqrt(spec.n)
            errors.append(pipeline_dalembert_error(spec, d, dtau, queries))
        errors = np.array(errors)
    else:
        raise InvalidSpec(f"unknown convergence scenario {scenario!r}")
    if np.all(errors == 0):
        return ConvergenceReport(scenario, deltas, errors, None, None)
    order, residual = fit_order(deltas, errors)
    return ConvergenceReport(scenario, deltas, errors, order, residual)
