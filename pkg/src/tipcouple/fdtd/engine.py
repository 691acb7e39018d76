"""Yee-grid time stepping with CPML boundaries."""

from dataclasses import dataclass, field
import json
import logging
import math

import numpy as np

from tipcouple.constants import C_UM_PER_FS
from tipcouple.fdtd import kernels
from tipcouple.fdtd.grid import GridSpec, cpml_profile

log = logging.getLogger(__name__)

COMPONENTS = ("ex", "ey", "ez", "hx", "hy", "hz")


class DivergenceError(RuntimeError):
    def __init__(self, step_index):
        super().__init__(f"non-finite field values detected at step {step_index}")
        self.step_index = step_index


@dataclass
class FieldState:
    """Staggered fields plus CPML memory at one instant.

    Arrays are padded by one zero plane at the high end of each axis.  After
    ``step_index`` steps, E is sampled at ``t`` and H at ``t - dt/2``.
    """

    ex: np.ndarray
    ey: np.ndarray
    ez: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray
    psi: dict
    t: float = 0.0
    step_index: int = 0

    @classmethod
    def zeros(cls, grid: GridSpec):
        padded = (grid.nx + 1, grid.ny + 1, grid.nz + 1)
        arrays = {name: np.zeros(padded, dtype=np.float32) for name in COMPONENTS}
        nx, ny, nz = grid.shape
        psi = {}
        for axis, (a, b) in enumerate((("y", "z"), ("x", "z"), ("x", "y"))):
            n = grid.pml_cells(axis)
            if n == 0:
                continue
            shape = [nx, ny, nz]
            shape[axis] = 2 * n
            u = "xyz"[axis]
            for kind in ("e", "h"):
                for comp in (a, b):
                    psi[f"{kind}{comp}{u}"] = np.zeros(shape, dtype=np.float32)
        return cls(psi=psi, **arrays)

    def field(self, name):
        """Unpadded view of one component."""
        return getattr(self, name)[:-1, :-1, :-1]

    def is_finite(self):
        return all(np.isfinite(getattr(self, n)).all() for n in COMPONENTS)

    def energy(self, eps, dx, region=None):
        """Discrete electromagnetic energy, 0.5*(eps E^2 + H^2) * dx^3.

        ``eps`` is the (ex, ey, ez) permittivity triple; ``region`` an optional
        tuple of slices.  Units follow the scaled-H convention.
        """
        sl = region or (slice(None),) * 3
        total = 0.0
        for name, e in zip(("ex", "ey", "ez"), eps):
            total += float(np.sum(e[sl] * self.field(name)[sl].astype(np.float64) ** 2))
        for name in ("hx", "hy", "hz"):
            total += float(np.sum(self.field(name)[sl].astype(np.float64) ** 2))
        return 0.5 * total * dx**3

    def dump(self, path, component, dx):
        """Write one component as little-endian float32 with a JSON header line."""
        arr = np.ascontiguousarray(self.field(component), dtype="<f4")
        header = {"dims": list(arr.shape), "dx": dx, "component": component,
                  "time": self.t, "dtype": "<f4"}
        with open(path, "wb") as fh:
            fh.write((json.dumps(header) + "\n").encode())
            fh.write(arr.tobytes())


def load_snapshot(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype=header["dtype"]).reshape(header["dims"])
    return header, data


@dataclass
class StopRule:
    """Termination policy for :meth:`FdtdSolver.run_until`.

    ``kind="fixed"`` runs exactly ``steps`` steps and accumulates monitors
    from ``dft_start`` (fs) onwards.  ``kind="auto"`` accumulates monitors
    in windows of ``window_cycles`` periods after ``dft_start`` and stops
    once every monitor power changes by less than ``tol`` between windows,
    or at ``max_cycles``.
    """

    kind: str = "auto"
    steps: int = 0
    tol: float = 1e-3
    window_cycles: int = 5
    max_cycles: float = 400.0
    dft_start: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "auto"):
            raise ValueError(f"unknown stop rule {self.kind!r}")


@dataclass
class RunOutcome:
    state: FieldState
    monitors: list
    converged: bool
    steps: int
    history: list = field(default_factory=list)
    last_change: float = math.nan


class FdtdSolver:
    """Leapfrog update on a fixed grid and permittivity map.

    ``eps`` is the (eps_x, eps_y, eps_z) triple of per-edge relative
    permittivities, each shaped like the cell grid.
    """

    def __init__(self, grid: GridSpec, eps, omega, check_every=25):
        self.grid = grid
        self.omega = omega
        self.check_every = check_every
        nx, ny, nz = grid.shape
        self.eps = tuple(np.asarray(e, dtype=np.float32) for e in eps)
        for e in self.eps:
            if e.shape != grid.shape:
                raise ValueError(f"permittivity shape {e.shape} != grid {grid.shape}")
        cdt = np.float32(grid.cdt)
        padded = (nx + 1, ny + 1, nz + 1)
        self.coef = []
        for e in self.eps:
            c = np.zeros(padded, dtype=np.float32)
            c[:-1, :-1, :-1] = cdt / e
            self.coef.append(c)
        self.profiles = [
            cpml_profile(n, grid.pml_cells(a), grid.dx, grid.dt, grid.pml, omega)
            for a, n in enumerate(grid.shape)
        ]
        self.ip, self.im = [], []
        for axis in range(2):
            n = grid.shape[axis]
            idx = np.arange(n, dtype=np.int64)
            if grid.periodic[axis]:
                self.ip.append((idx + 1) % n)
                self.im.append((idx - 1) % n)
            else:
                self.ip.append(idx + 1)
                self.im.append(np.where(idx == 0, -1, idx - 1))

    def step(self, state: FieldState, sources=()):
        g = self.grid
        nx, ny, nz = g.shape
        px, py, pz = self.profiles
        cdt = np.float32(g.cdt)
        inv_d = np.float32(1.0 / g.dx)
        ex, ey, ez, hx, hy, hz = (getattr(state, n) for n in COMPONENTS)
        psi = state.psi

        kernels.update_h(ex, ey, ez, hx, hy, hz, self.ip[0], self.ip[1],
                         px.rk_h, py.rk_h, pz.rk_h, cdt, nx, ny, nz)
        if g.pml_cells(0):
            kernels.cpml_h_x(ey, ez, hy, hz, psi["hyx"], psi["hzx"], self.ip[0],
                             px.b_h, px.c_h, cdt, g.pml_cells(0), nx, ny, nz, inv_d)
        if g.pml_cells(1):
            kernels.cpml_h_y(ex, ez, hx, hz, psi["hxy"], psi["hzy"], self.ip[1],
                             py.b_h, py.c_h, cdt, g.pml_cells(1), nx, ny, nz, inv_d)
        if g.pml_cells(2):
            kernels.cpml_h_z(ex, ey, hx, hy, psi["hxz"], psi["hyz"],
                             pz.b_h, pz.c_h, cdt, g.pml_cells(2), nx, ny, nz, inv_d)

        cex, cey, cez = self.coef
        kernels.update_e(ex, ey, ez, hx, hy, hz, cex, cey, cez, self.im[0], self.im[1],
                         px.rk_e, py.rk_e, pz.rk_e, nx, ny, nz)
        if g.pml_cells(0):
            kernels.cpml_e_x(ey, ez, hy, hz, cey, cez, psi["eyx"], psi["ezx"], self.im[0],
                             self.im[1], px.b_e, px.c_e, g.pml_cells(0), nx, ny, nz, inv_d)
        if g.pml_cells(1):
            kernels.cpml_e_y(ex, ez, hx, hz, cex, cez, psi["exy"], psi["ezy"], self.im[0],
                             self.im[1], py.b_e, py.c_e, g.pml_cells(1), nx, ny, nz, inv_d)
        if g.pml_cells(2):
            kernels.cpml_e_z(ex, ey, hx, hy, cex, cey, psi["exz"], psi["eyz"], self.im[0],
                             self.im[1], pz.b_e, pz.c_e, g.pml_cells(2), nx, ny, nz, inv_d)

        # Currents act at the half step between the old and new E.
        t_half = state.t + 0.5 * g.dt
        for src in sources:
            src.inject(state, t_half, self)

        state.t += g.dt
        state.step_index += 1
        if self.check_every and state.step_index % self.check_every == 0:
            if not state.is_finite():
                raise DivergenceError(state.step_index)
        return state

    def run_until(self, state, sources, monitors, stop: StopRule):
        """Advance ``state`` until ``stop`` fires, feeding every monitor each step."""
        g = self.grid
        for m in monitors:
            m.reset()
        if stop.kind == "fixed":
            for _ in range(stop.steps):
                self.step(state, sources)
                if state.t - 0.5 * g.dt >= stop.dft_start - 1e-12:
                    for m in monitors:
                        m.accumulate(state)
            if not state.is_finite():
                raise DivergenceError(state.step_index)
            return RunOutcome(state, list(monitors), True, stop.steps)

        period = 2 * math.pi / self.omega
        window = int(round(stop.window_cycles * period / g.dt))
        max_steps = int(math.ceil(stop.max_cycles * period / g.dt))
        history = []
        previous = None
        in_window = 0
        converged = False
        change = math.nan
        while state.step_index < max_steps:
            self.step(state, sources)
            if state.t - 0.5 * g.dt < stop.dft_start - 1e-12:
                continue
            for m in monitors:
                m.accumulate(state)
            in_window += 1
            if in_window < window:
                continue
            powers = np.array([m.power() for m in monitors], dtype=float)
            history.append((state.step_index, powers.tolist()))
            if previous is not None:
                scale = np.maximum(np.abs(previous), 1e-300)
                change = float(np.max(np.abs(powers - previous) / scale))
                log.debug("step %d window change %.3e", state.step_index, change)
                if change < stop.tol:
                    converged = True
                    break
            previous = powers
            in_window = 0
            for m in monitors:
                m.reset()
        if not state.is_finite():
            raise DivergenceError(state.step_index)
        if not converged:
            log.warning("no convergence after %d steps (last change %.2e)",
                        state.step_index, change)
        return RunOutcome(state, list(monitors), converged, state.step_index, history, change)


def make_grid(shape, dx, wavelength, safety=0.99, pml=None, periodic=(False, False)):
    """GridSpec with a period-commensurate time step."""
    from tipcouple.fdtd.grid import PmlParams, commensurate_dt

    dt, _ = commensurate_dt(dx, wavelength, safety)
    return GridSpec(*shape, dx=dx, dt=dt, pml=pml or PmlParams(), periodic=tuple(periodic))


__all__ = ["FdtdSolver", "FieldState", "StopRule", "RunOutcome", "DivergenceError",
           "make_grid", "load_snapshot", "C_UM_PER_FS"]
