"""One complete coupling-efficiency simulation for a scene."""

import hashlib
import json
import logging
import os
import time

import numba
import numpy as np

from tipcouple.coupling import PlaneFields, build_report
from tipcouple.fdtd.engine import FdtdSolver, FieldState, StopRule, make_grid
from tipcouple.modes import solve_modes
from tipcouple.monitors import (BoxMonitor, DipoleSource, PlaneMonitor, box_around,
                                total_emitted_power, vacuum_dipole_power)
from tipcouple.scene import ConfigError, rasterize, scene_to_dict, validate_scene

log = logging.getLogger(__name__)

THREADS_ENV = "TIPCOUPLE_THREADS"


def default_threads():
    value = os.environ.get(THREADS_ENV)
    return int(value) if value else numba.config.NUMBA_NUM_THREADS


def scene_key(scene, ignore_orientation=False):
    tree = scene_to_dict(scene)
    if ignore_orientation:
        tree["source"].pop("orientation")
    blob = json.dumps(tree, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def setup(scene):
    """Solver, initial state, source and monitors for ``scene``."""
    problems = validate_scene(scene)
    if problems:
        raise ConfigError("; ".join(problems))
    dom = scene.domain
    src_spec = scene.source
    eps = rasterize(scene)
    grid = make_grid(dom.shape, dom.grid_step, src_spec.wavelength, safety=scene.run.courant)
    source = DipoleSource(src_spec.position, src_spec.axis, src_spec.wavelength,
                          src_spec.amplitude, src_spec.ramp_cycles)
    solver = FdtdSolver(grid, eps.as_tuple(), source.omega)
    state = FieldState.zeros(grid)
    lo, hi = box_around(np.asarray(src_spec.position), scene.monitors.box_half_cells, grid)
    box = BoxMonitor(lo, hi, source.omega, grid.dt, grid.dx)
    monitors = [box]
    plane = None
    if scene.monitors.plane_z is not None:
        kz = int(round(scene.monitors.plane_z / grid.dx))
        (x0, x1), (y0, y1) = grid.interior(0), grid.interior(1)
        plane = PlaneMonitor("z", kz, (x0, x1), (y0, y1), source.omega, grid.dt).bind(grid.dx)
        monitors.append(plane)
    return solver, state, source, box, plane, eps


def run_scene(scene, threads=None, snapshot_dir=None):
    """Simulate ``scene`` to steady state and return a CouplingReport."""
    if threads is not None:
        if threads < 1:
            raise ValueError("threads must be at least 1")
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    started = time.time()
    solver, state, source, box, plane, eps = setup(scene)
    grid = solver.grid
    run = scene.run
    stop = StopRule("auto", tol=run.shutoff, window_cycles=run.window_cycles,
                    max_cycles=run.max_cycles, dft_start=source.ramp_time)
    outcome = solver.run_until(state, [source], [m for m in (box, plane) if m is not None], stop)

    p_total = total_emitted_power(box)
    p_flux = plane.power() if plane is not None else 0.0
    p_vac = vacuum_dipole_power(source.amplitude, grid.dx, source.wavelength)

    modes, fields = (), None
    collector = scene.primitive(scene.pair.primary) if scene.pair else (
        scene.primitives[0] if scene.primitives else None)
    if run.mode_decomposition and collector is not None and plane is not None:
        n_core = scene.material_of(collector).refractive_index
        modes = solve_modes(collector.radius, n_core, scene.background.refractive_index,
                            source.wavelength)
        fields = PlaneFields.from_monitor(plane, grid.dx, collector.center[:2])

    if snapshot_dir is not None:
        os.makedirs(snapshot_dir, exist_ok=True)
        comp = "e" + source.orientation
        state.dump(os.path.join(snapshot_dir, f"{comp}.bin"), comp, grid.dx)

    meta = {
        "scene_key": scene_key(scene),
        "geometry_key": scene_key(scene, ignore_orientation=True),
        "grid": list(grid.shape),
        "dx": grid.dx,
        "dt": grid.dt,
        "wall_seconds": round(time.time() - started, 2),
        "orientation": scene.source.orientation,
    }
    return build_report(p_total, p_flux, p_vac, fields, modes, converged=outcome.converged,
                        steps=outcome.steps, shutoff_ratio=outcome.last_change,
                        preset=run.preset, meta=meta)


def estimate_memory(scene):
    """Rough bytes needed by a run: six padded fields, three coefficients, CPML memory."""
    nx, ny, nz = scene.domain.shape
    cells = (nx + 1) * (ny + 1) * (nz + 1)
    pml = scene.domain.pml_cells
    psi = 4 * 2 * pml * (ny * nz + nx * nz + nx * ny)
    return 4 * (9 * cells + 3 * nx * ny * nz + psi)
