import math

import numpy as np
import pytest

from kelvinwave import (
    DiskObstacle,
    GaussianPulse,
    OutOfGrid,
    ProblemSpec,
    Region,
    SpacetimePoint,
    interpolate,
    invert,
    query_frame,
    query_point,
    query_points,
    run,
    size_grid,
)
from kelvinwave.kelvin import GridSpec, g_factor_batch
from kelvinwave.oracle import fit_order
from kelvinwave.query import interpolate_batch
from kelvinwave.solver import CFL_SAFETY, FrameSet


def make_frames(n, m, taus, fn):
    """FrameSet with V sampled from an analytic field fn(xi, tau)."""
    gs = GridSpec(n=n, requested_dxi=1.0 / m, requested_dtau=1.0, dxi=1.0 / (m - 1),
                  dtau=taus[1] - taus[0] if len(taus) > 1 else 1.0, xi_extent=0.5,
                  tau_start=float(taus[0]), tau_end=float(taus[-1]),
                  points_per_axis=m, M=m**n, N=max(1, len(taus) - 1))
    axis = gs.xi_axis()
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    xi = np.stack(mesh, axis=-1)
    frames = np.stack([fn(xi, tau) for tau in taus], axis=0)
    return gs, FrameSet(gs, np.asarray(taus, dtype=float), frames)


def spec_1d():
    return ProblemSpec(1, 2.0, 1.0, GaussianPulse(1.0, 0.1, [0.0]))


@pytest.fixture(scope="module")
def pipeline():
    spec = spec_1d()
    gs = size_grid(spec.x0, spec.t0, 1 / 300, CFL_SAFETY / 300, 1)
    return spec, run(spec, gs)


@pytest.fixture(scope="module")
def pipeline2d():
    spec = ProblemSpec(2, 2.0, 1.0, GaussianPulse(1.0, 0.1, [0.0, 0.0]))
    width = (spec.x0 + spec.t0) / (spec.t0**2 - spec.x0**2)
    dxi = width / 160
    gs = size_grid(spec.x0, spec.t0, dxi, CFL_SAFETY * dxi / math.sqrt(2), 2)
    return spec, run(spec, gs)


class TestInterpolate:
    def test_exact_at_nodes(self):
        fn = lambda xi, tau: np.sin(3 * xi[..., 0]) + tau
        gs, frames = make_frames(1, 51, [-0.6, -0.5, -0.4], fn)
        axis = gs.xi_axis()
        for i in (0, 10, 25, 50):
            got = interpolate(frames, np.array([axis[i], -0.5]))
            assert got == pytest.approx(frames.frames[1, i], abs=1e-14)
        # SpacetimePoint form of the same query
        got = interpolate(frames, SpacetimePoint([axis[25]], -0.5))
        assert got == pytest.approx(frames.frames[1, 25], abs=1e-14)

    def test_midpoint_average(self):
        taus = [-0.6, -0.5]
        gs, frames = make_frames(1, 11, taus, lambda xi, tau: np.zeros(xi.shape[:-1]))
        frames.frames[0, 4] = 2.0
        frames.frames[0, 5] = 6.0
        axis = gs.xi_axis()
        mid = 0.5 * (axis[4] + axis[5])
        assert interpolate(frames, np.array([mid, -0.6])) == pytest.approx(4.0)

    def test_out_of_grid(self):
        _, frames = make_frames(1, 11, [-0.6, -0.5], lambda xi, tau: np.zeros(xi.shape[:-1]))
        with pytest.raises(OutOfGrid):
            interpolate(frames, np.array([0.7, -0.55]))
        with pytest.raises(OutOfGrid):
            interpolate(frames, np.array([0.0, -0.7]))

    def test_second_order_refinement(self):
        fn = lambda xi, tau: np.sin(4 * xi[..., 0]) * np.cos(3 * tau)
        errs = []
        for m in (21, 41, 81):
            taus = np.linspace(-0.6, -0.4, m)
            _, frames = make_frames(1, m, taus, fn)
            rng = np.random.default_rng(0)
            xi = rng.uniform(-0.45, 0.45, (200, 1))
            tau = rng.uniform(-0.58, -0.42, 200)
            got = interpolate_batch(frames, xi, tau)
            errs.append(np.max(np.abs(got - fn(xi, tau))))
        order, _ = fit_order(np.array([1 / 20, 1 / 40, 1 / 80]), np.array(errs))
        assert 1.8 <= order <= 2.2


class TestQueryClassification:
    def test_pre_initial(self, pipeline):
        spec, frames = pipeline
        res = query_point(frames, spec, SpacetimePoint([0.0], 1.0))
        assert res.region is Region.PRE_INITIAL
        assert res.value == 0.0

    def test_outside_support_cone(self, pipeline):
        spec, frames = pipeline
        res = query_point(frames, spec, SpacetimePoint([1e6], 10.0))
        assert res.region is Region.OUTSIDE_SUPPORT_CONE
        assert res.value == 0.0

    def test_near_light_cone_guard(self, pipeline):
        spec, frames = pipeline
        t = 1e10
        res = query_point(frames, spec, SpacetimePoint([t - 1.1], t))
        assert res.region is Region.NEAR_LIGHT_CONE
        assert res.value == 0.0

    def test_causality_random_zeros(self, pipeline):
        spec, frames = pipeline
        rng = np.random.default_rng(1)
        t = rng.uniform(2.0, 50.0, 1000)
        x = (t - 1.0 + rng.uniform(0.0, 5.0, 1000)) * np.where(rng.random(1000) < 0.5, 1, -1)
        vals, regions = query_points(frames, spec, x[:, None], t)
        assert np.all(vals == 0.0)

    def test_late_time_reach(self, pipeline):
        spec, frames = pipeline
        t = 100 * spec.t0
        res = query_point(frames, spec, SpacetimePoint([t - spec.t0], t))
        assert math.isfinite(res.value)
        assert res.region is Region.INSIDE_SUPPORT_CONE

    def test_error_bounded_at_arbitrary_times(self, pipeline):
        # the same stored history answers queries at any time with the same
        # accuracy: track the outgoing pulse across six orders of magnitude
        from kelvinwave.oracle import dalembert_exact_batch

        spec, frames = pipeline
        for t in (20.0, 2e3, 2e8):
            xs = (t - spec.t0) + np.linspace(-0.5, 0.5, 21)
            vals, _ = query_points(frames, spec, xs[:, None], np.full(21, t))
            exact = dalembert_exact_batch(spec.f_value, None, xs, np.full(21, t), spec.t0)
            assert np.max(np.abs(vals - exact)) < 5e-3
            assert np.max(np.abs(vals)) > 0.45  # the pulse is really there

    def test_mixed_batch_regions(self, pipeline):
        from kelvinwave.query import REGION_CODES

        spec, frames = pipeline
        x = np.array([[0.0], [0.2], [100.0], [1e10 - 1.1]])
        t = np.array([1.0, 2.5, 3.0, 1e10])
        vals, regions = query_points(frames, spec, x, t)
        got = [REGION_CODES[int(code)] for code in regions]
        assert got == [Region.PRE_INITIAL, Region.INSIDE_SUPPORT_CONE,
                       Region.OUTSIDE_SUPPORT_CONE, Region.NEAR_LIGHT_CONE]
        assert vals[0] == 0.0 and vals[2] == 0.0 and vals[3] == 0.0

    def test_stored_node_roundtrip(self, pipeline):
        # a query whose image lands exactly on a stored node returns G * V
        spec, frames = pipeline
        gs = frames.grid
        k = len(frames.taus) // 2
        i = int(gs.points_per_axis * 0.62)
        xi = gs.xi_axis()[i]
        tau = float(frames.taus[k])
        q = invert(SpacetimePoint([xi], tau))  # involution: maps back to the node
        res = query_point(frames, spec, q)
        g = g_factor_batch(np.array([[xi]]), np.array([tau]), 1)[0]
        assert res.value == pytest.approx(g * frames.frames[k, i], rel=1e-9, abs=1e-12)


class TestNoDistortion:
    def test_reconstruction_adds_only_interpolation_error(self):
        # inject analytic V; query must equal G * V(Inv(q)) up to O(delta^2)
        def v_field(xi, tau):
            return np.sin(3 * xi[..., 0]) * np.cos(2 * tau)

        spec = spec_1d()
        errs = []
        deltas = []
        for m in (101, 201, 401):
            taus = np.linspace(-2 / 3, -1e-3, m)
            gs, frames = make_frames(1, m, taus, v_field)
            rng = np.random.default_rng(2)
            xi = rng.uniform(-0.4, 0.4, (300, 1))
            tau = rng.uniform(-0.6, -0.1, 300)
            # physical query points whose images are these bounded points
            x = xi[:, 0] / (xi[:, 0] ** 2 - tau**2)
            t = tau / (xi[:, 0] ** 2 - tau**2)
            keep = (t >= spec.t0) & (np.abs(x) < t - spec.support_gap)
            got, _ = query_points(frames, spec, x[keep, None], t[keep])
            exact = g_factor_batch(xi[keep], tau[keep], 1) * v_field(xi[keep], tau[keep])
            errs.append(np.max(np.abs(got - exact)))
            deltas.append(1.0 / (m - 1))
        order, _ = fit_order(np.array(deltas), np.array(errs))
        assert order >= 1.8


class TestQueryFrame:
    def test_window_outside_support_all_zero(self, pipeline2d):
        spec, frames = pipeline2d
        vals = query_frame(frames, spec, 2.5, [(5.0, 6.0), (5.0, 6.0)], [20, 20])
        assert np.all(vals == 0.0)

    def test_early_peak_near_center(self, pipeline2d):
        spec, frames = pipeline2d
        t = 2.05
        vals = query_frame(frames, spec, t, [(-0.5, 0.5), (-0.5, 0.5)], [101, 101])
        peak = np.unravel_index(np.argmax(np.abs(vals)), vals.shape)
        axis = np.linspace(-0.5, 0.5, 101)
        assert abs(axis[peak[0]]) <= 0.12
        assert abs(axis[peak[1]]) <= 0.12

    def test_obstacle_interior_exactly_zero(self):
        spec = ProblemSpec(2, 2.0, 1.0, GaussianPulse(1.0, 0.05, [-0.45, 0.0]),
                           obstacle=DiskObstacle([0.45, 0.0], 0.15))
        width = (spec.x0 + spec.t0) / (spec.t0**2 - spec.x0**2)
        dxi = width / 140
        gs = size_grid(spec.x0, spec.t0, dxi, CFL_SAFETY * dxi / math.sqrt(2), 2)
        frames = run(spec, gs)
        rng = np.random.default_rng(3)
        angles = rng.uniform(0, 2 * np.pi, 50)
        radii = rng.uniform(0, 0.145, 50)
        pts = np.column_stack([0.45 + radii * np.cos(angles), radii * np.sin(angles)])
        vals, _ = query_points(frames, spec, pts, rng.uniform(2.5, 4.0, 50))
        assert np.all(vals == 0.0)


class TestApexShift:
    def test_shifted_spec_matches_unshifted(self):
        base = spec_1d()
        gs = size_grid(base.x0, base.t0, 1 / 200, CFL_SAFETY / 200, 1)
        frames_base = run(base, gs)

        shift = (np.array([0.75]), -0.5)
        shifted = ProblemSpec(1, base.t0 + shift[1], base.x0,
                              GaussianPulse(1.0, 0.1, [0.75]), apex_shift=shift)
        frames_shifted = run(shifted, gs)
        np.testing.assert_allclose(frames_shifted.frames, frames_base.frames,
                                   rtol=1e-12, atol=1e-13)

        rng = np.random.default_rng(4)
        x = rng.uniform(-1.0, 1.0, (50, 1))
        t = rng.uniform(2.1, 6.0, 50)
        va, _ = query_points(frames_base, base, x, t)
        vb, _ = query_points(frames_shifted, shifted, x + shift[0], t + shift[1])
        np.testing.assert_allclose(vb, va, rtol=1e-10, atol=1e-13)
