import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from tipcouple.constants import omega_of
from tipcouple.fdtd.engine import FdtdSolver, FieldState, StopRule, make_grid
from tipcouple.monitors import (BoxMonitor, ConfigurationError, DipoleSource, PlaneMonitor,
                                box_around, poynting_power, total_emitted_power,
                                vacuum_dipole_power)
from tipcouple.simulate import run_scene

LAM = 0.620
W = omega_of(LAM)


def tiny_state(n=6):
    grid = make_grid((n, n, n), 0.03, LAM)
    return grid, FieldState.zeros(grid)


def drive(monitor, state, dt, periods, fill, samples_per_period=None):
    """Feed ``monitor`` with fields set by ``fill(state, t_e, t_h)`` each step."""
    n = int(round(periods * 2 * math.pi / W / dt))
    for _ in range(n):
        state.t += dt
        fill(state, state.t, state.t - 0.5 * dt)
        monitor.accumulate(state)


class TestDft:
    @pytest.mark.parametrize("per_period", [None, 37.3])
    def test_sinusoid_amplitude(self, per_period):
        grid, state = tiny_state()
        dt = grid.dt if per_period is None else 2 * math.pi / W / per_period
        mon = PlaneMonitor("z", 3, (1, 4), (1, 4), W, dt)
        amp = 0.7

        def fill(s, te, th):
            s.ex[...] = amp * math.sin(W * te)

        drive(mon, state, dt, 50, fill)
        ev = mon.fields()[0]
        # A sin(wt) = Re(-i A exp(iwt))
        np.testing.assert_allclose(ev, -1j * amp, atol=1e-3 * amp)

    def test_harmonic_is_rejected(self):
        grid, state = tiny_state()
        mon = PlaneMonitor("z", 3, (1, 4), (1, 4), W, grid.dt)

        def fill(s, te, th):
            s.ex[...] = math.sin(2 * W * te)

        drive(mon, state, grid.dt, 20, fill)
        assert np.max(np.abs(mon.fields()[0])) < 1e-3

    def test_zero_fields(self):
        grid, state = tiny_state()
        mon = PlaneMonitor("z", 3, (1, 4), (1, 4), W, grid.dt)
        drive(mon, state, grid.dt, 2, lambda s, te, th: None)
        assert all(not np.any(f) for f in mon.fields())
        assert poynting_power(mon.bind(grid.dx)) == 0.0

    def test_empty_monitor_errors(self):
        mon = PlaneMonitor("z", 3, (1, 4), (1, 4), W, 0.05).bind(0.03)
        with pytest.raises(ValueError):
            mon.power()

    def test_uniform_plane_wave_power(self):
        """Uniform E0 along x with matched H along y gives E0^2 A / 2.

        H is stored multiplied by the vacuum impedance, so the textbook
        E0^2 A / (2 eta0) reads E0^2 A / 2 in solver units.
        """
        grid, state = tiny_state(8)
        e0 = 1.3
        mon = PlaneMonitor("z", 4, (1, 7), (1, 7), W, grid.dt).bind(grid.dx)

        def fill(s, te, th):
            s.ex[...] = e0 * math.cos(W * te)
            s.hy[...] = e0 * math.cos(W * th)

        drive(mon, state, grid.dt, 10, fill)
        area = (6 * grid.dx) ** 2
        assert mon.power() == pytest.approx(e0**2 * area / 2, rel=1e-2)

    def test_accumulation_is_linear(self):
        grid, state = tiny_state()
        mons = [PlaneMonitor("x", 3, (0, 5), (0, 5), W, grid.dt) for _ in range(3)]
        rng = np.random.default_rng(1)
        # integer samples keep 2f and 3f exact in single precision
        hist = [rng.integers(-50, 50, size=state.ey.shape).astype(np.float32) for _ in range(15)]
        for k, f in enumerate(hist):
            state.t = k * grid.dt
            state.ey[...] = f
            mons[0].accumulate(state)
            state.ey[...] = 2 * f
            mons[1].accumulate(state)
            state.ey[...] = 3 * f
            mons[2].accumulate(state)
        a, b, c = (m.phasors[0] for m in mons)
        np.testing.assert_allclose(a + b, c, rtol=1e-12)


class TestSource:
    def test_zero_at_start(self):
        src = DipoleSource((0.5, 0.5, 0.5), "x")
        assert src.current(0.0) == 0.0

    def test_amplitude_doubles_injection(self):
        grid, _ = tiny_state(24)
        solver = FdtdSolver(grid, tuple(np.ones(grid.shape) for _ in range(3)), W)
        out = []
        for amp in (1.0, 2.0):
            state = FieldState.zeros(grid)
            src = DipoleSource((0.37, 0.36, 0.35), "z", LAM, amp, ramp_cycles=1)
            src.inject(state, 0.7, solver)
            out.append(state.ez.copy())
        np.testing.assert_array_equal(out[1], 2 * out[0])

    def test_edge_midpoint_is_one_edge(self):
        grid, _ = tiny_state(24)
        src = DipoleSource(((10 + 0.5) * grid.dx, 11 * grid.dx, 12 * grid.dx), "x")
        assert src.edge_weights(grid) == [((10, 11, 12), 1.0)]

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.35, 0.35 + 0.2), st.floats(0.35, 0.55), st.floats(0.35, 0.55),
           st.sampled_from("xyz"))
    def test_weights_sum_to_one(self, x, y, z, axis):
        grid, _ = tiny_state(24)
        weights = DipoleSource((x, y, z), axis).edge_weights(grid)
        assert sum(w for _, w in weights) == pytest.approx(1.0, abs=1e-12)
        assert 1 <= len(weights) <= 8

    def test_source_in_pml_rejected(self):
        grid, state = tiny_state(40)
        solver = FdtdSolver(grid, tuple(np.ones(grid.shape) for _ in range(3)), W)
        src = DipoleSource((0.1, 0.6, 0.6), "z")
        with pytest.raises(ConfigurationError):
            src.inject(state, 1.0, solver)


def vacuum_run(amplitude=1.0, n=60, half=8, stop=None):
    dx = LAM / 20
    grid = make_grid((n, n, n), dx, LAM)
    solver = FdtdSolver(grid, tuple(np.ones(grid.shape) for _ in range(3)), W)
    src = DipoleSource(((n // 2 + 0.5) * dx, n // 2 * dx, n // 2 * dx), "x", LAM, amplitude)
    lo, hi = box_around(np.asarray(src.position), half, grid)
    box = BoxMonitor(lo, hi, W, grid.dt, dx)
    plane = PlaneMonitor("z", n // 2 + half + 4, grid.interior(0), grid.interior(1), W,
                         grid.dt).bind(dx)
    stop = stop or StopRule("auto", tol=1e-3, dft_start=src.ramp_time)
    out = solver.run_until(FieldState.zeros(grid), [src], [box, plane], stop)
    return box, plane, out, vacuum_dipole_power(amplitude, dx, LAM)


class TestPower:
    def test_vacuum_dipole_matches_analytic(self):
        box, plane, out, p_vac = vacuum_run()
        assert out.converged
        assert total_emitted_power(box) == pytest.approx(p_vac, rel=0.02)
        # a plane catching part of the emission never exceeds the total
        assert 0 < plane.power() <= box.power()

    def test_flux_additivity(self):
        box, _, _, _ = vacuum_run(n=40, half=6, stop=StopRule("fixed", steps=300, dft_start=5.0))
        assert box.power() == sum(box.face_powers())

    def test_power_quadratic_in_amplitude(self):
        stop = StopRule("fixed", steps=300, dft_start=5.0)
        p1 = vacuum_run(1.0, n=40, half=6, stop=stop)[0].power()
        p2 = vacuum_run(2.0, n=40, half=6, stop=stop)[0].power()
        assert p2 == pytest.approx(4 * p1, rel=1e-5)

    def test_longer_window_is_stable(self):
        # after steady state, doubling the accumulation window barely moves the power
        dx = LAM / 20
        n = 40
        grid = make_grid((n, n, n), dx, LAM)
        solver = FdtdSolver(grid, tuple(np.ones(grid.shape) for _ in range(3)), W)
        src = DipoleSource((n // 2 * dx,) * 3, "z", LAM, ramp_cycles=5)
        lo, hi = box_around(np.asarray(src.position), 6, grid)
        period = int(round(2 * math.pi / W / grid.dt))
        powers = []
        for cycles in (10, 20):
            box = BoxMonitor(lo, hi, W, grid.dt, dx)
            start = 25 * period * grid.dt
            solver.run_until(FieldState.zeros(grid), [src], [box],
                             StopRule("fixed", steps=25 * period + cycles * period,
                                      dft_start=start))
            powers.append(box.power())
        assert powers[1] == pytest.approx(powers[0], rel=5e-3)

    def test_box_must_avoid_pml(self):
        grid, _ = tiny_state(30)
        with pytest.raises(ConfigurationError):
            box_around(np.array([0.4, 0.45, 0.45]), 4, grid)

    def test_total_needs_box(self):
        with pytest.raises(TypeError):
            total_emitted_power(PlaneMonitor("z", 3, (0, 2), (0, 2), W, 0.05))


def test_orientation_labels_are_reciprocal(tip_scene):
    """x and y dipoles on the axis of a cylinder see identical environments."""
    reports = [run_scene(tip_scene(radius=0.3, orientation=o, mode_decomposition=False))
               for o in ("radial", "azimuthal")]
    rx, ry = reports
    assert rx.P_total == pytest.approx(ry.P_total, rel=1e-2)
    assert rx.P_flux == pytest.approx(ry.P_flux, rel=1e-2)
    # a dipole 10 nm from a diamond facet is Purcell-modified, but moderately
    assert 0.5 < rx.purcell_ratio < 3.0
    assert rx.P_flux <= rx.P_total
