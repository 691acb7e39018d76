"""Dipole current sources and single-frequency flux monitors.

Phasor convention: a real field ``f(t) = Re(F exp(i w t))`` is recovered
from a window of length ``T`` as ``F = (2/T) * sum f(t_n) exp(-i w t_n) dt``.
Powers are ``0.5 * Re(E x H*)`` integrated over the surface, in the solver's
scaled-H units (vacuum impedance absorbed into H); every reported quantity
is a ratio of such powers.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from tipcouple.constants import C_UM_PER_FS, omega_of

AXES = {"x": 0, "y": 1, "z": 2}
E_NAMES = ("ex", "ey", "ez")
H_NAMES = ("hx", "hy", "hz")


class ConfigurationError(ValueError):
    pass


def raised_cosine(t, ramp_time):
    if ramp_time <= 0 or t >= ramp_time:
        return 1.0
    if t <= 0:
        return 0.0
    return 0.5 * (1.0 - math.cos(math.pi * t / ramp_time))


def vacuum_dipole_power(amplitude, dx, wavelength):
    """Time-averaged power of a point current ``amplitude`` on one Yee edge.

    The edge carries current moment ``amplitude * dx**3`` (scaled units), so
    the classic ``eta0 k^2 |I l|^2 / (12 pi)`` becomes
    ``k^2 (A dx^3)^2 / (12 pi c^2)``.
    """
    k = 2 * math.pi / wavelength
    return k**2 * (amplitude * dx**3) ** 2 / (12 * math.pi * C_UM_PER_FS**2)


@dataclass
class DipoleSource:
    """Soft current source ``J(t) = A env(t) sin(w t)`` along one grid axis.

    ``position`` is in um measured from the grid origin (node 0).
    """

    position: tuple
    orientation: str
    wavelength: float = 0.620
    amplitude: float = 1.0
    ramp_cycles: float = 20.0
    _edges: list = field(default=None, repr=False)

    def __post_init__(self):
        if self.orientation not in AXES:
            raise ConfigurationError(f"orientation must be one of x/y/z, got {self.orientation!r}")

    @property
    def omega(self):
        return omega_of(self.wavelength)

    @property
    def ramp_time(self):
        return self.ramp_cycles * 2 * math.pi / self.omega

    def current(self, t):
        return self.amplitude * raised_cosine(t, self.ramp_time) * math.sin(self.omega * t)

    def edge_weights(self, grid):
        """Trilinear allocation of the dipole over the nearest parallel edges.

        Returns a list of ``((i, j, k), weight)``.  Weights sum to one.
        """
        axis = AXES[self.orientation]
        # Edge of this component sits at half-integer along ``axis``.
        coords = np.asarray(self.position, dtype=float) / grid.dx
        coords[axis] -= 0.5
        # snap coordinates that sit on grid lines up to roundoff
        snapped = np.round(coords)
        coords = np.where(np.abs(coords - snapped) < 1e-9, snapped, coords)
        base = np.floor(coords).astype(int)
        frac = coords - base
        out = []
        for corner in np.ndindex(2, 2, 2):
            w = 1.0
            idx = []
            for a in range(3):
                off = corner[a]
                fa = frac[a]
                if fa < 1e-9 and off == 1:
                    w = 0.0
                w *= fa if off else (1.0 - fa)
                idx.append(int(base[a] + off))
            if w > 1e-12:
                out.append((tuple(idx), w))
        return out

    def check_placement(self, grid):
        for a, n in enumerate(grid.shape):
            lo, hi = grid.interior(a)
            x = self.position[a] / grid.dx
            if not lo + 1 <= x <= hi - 1:
                raise ConfigurationError(
                    f"source coordinate {self.position[a]} um on axis {'xyz'[a]} is inside the PML")

    def inject(self, state, t, solver):
        if self._edges is None:
            self.check_placement(solver.grid)
            comp = E_NAMES[AXES[self.orientation]]
            coef = solver.coef[AXES[self.orientation]]
            # E -= dt * J / eps  ==  coef * J / c  with coef = c dt / eps
            self._edges = [(comp, idx, w * float(coef[idx]) / C_UM_PER_FS)
                           for idx, w in self.edge_weights(solver.grid)]
        j = self.current(t)
        if j == 0.0:
            return
        for comp, idx, scale in self._edges:
            getattr(state, comp)[idx] -= scale * j


# --- monitors --------------------------------------------------------------


def _cyclic(normal):
    u = AXES[normal]
    return u, (u + 1) % 3, (u + 2) % 3


def _plane(arr, u, q, v_rng, w_rng):
    """Slice ``arr`` at index ``q`` along ``u``, ordered (v, w)."""
    v = (u + 1) % 3
    w = (u + 2) % 3
    idx = [slice(None)] * 3
    idx[u] = q
    idx[v] = slice(*v_rng)
    idx[w] = slice(*w_rng)
    out = arr[tuple(idx)]
    # remaining axes appear in increasing order; put v first.
    return out if v < w else out.T


class PlaneMonitor:
    """Running DFT of tangential fields on an axis-aligned rectangle.

    The plane sits on E node ``index`` along ``normal`` and spans cells
    ``v_range`` x ``w_range`` in the two cyclic transverse axes.  ``sign``
    orients the reported flux (+1 along the positive normal).
    """

    def __init__(self, normal, index, v_range, w_range, omega, dt, sign=1):
        self.normal = normal
        self.u, self.v, self.w = _cyclic(normal)
        self.index = int(index)
        self.v_range = (int(v_range[0]), int(v_range[1]))
        self.w_range = (int(w_range[0]), int(w_range[1]))
        self.omega = omega
        self.dt = dt
        self.sign = sign
        self.reset()

    def reset(self):
        self.phasors = None
        self.elapsed = 0.0
        self.samples = 0

    def _raw(self, state):
        u, v, w = self.u, self.v, self.w
        q = self.index
        # one extra node on each transverse axis for cell-centre averaging
        vr = (self.v_range[0], self.v_range[1] + 1)
        wr = (self.w_range[0], self.w_range[1] + 1)
        ev = _plane(getattr(state, E_NAMES[v]), u, q, vr, wr)
        ew = _plane(getattr(state, E_NAMES[w]), u, q, vr, wr)
        hv = [_plane(getattr(state, H_NAMES[v]), u, q + o, vr, wr) for o in (-1, 0)]
        hw = [_plane(getattr(state, H_NAMES[w]), u, q + o, vr, wr) for o in (-1, 0)]
        return ev, ew, hv[0], hv[1], hw[0], hw[1]

    def accumulate(self, state):
        """Add one time sample; E is at ``state.t``, H half a step earlier."""
        te = state.t
        th = state.t - 0.5 * self.dt
        pe = np.exp(-1j * self.omega * te) * self.dt
        ph = np.exp(-1j * self.omega * th) * self.dt
        raw = self._raw(state)
        if self.phasors is None:
            self.phasors = [np.zeros(r.shape, dtype=np.complex128) for r in raw]
        for acc, r, p in zip(self.phasors, raw, (pe, pe, ph, ph, ph, ph)):
            # promote before multiplying: float32 * complex scalar stays single precision
            acc += r.astype(np.float64) * p
        self.elapsed += self.dt
        self.samples += 1

    def fields(self):
        """Complex amplitudes colocated at cell centres on the plane.

        Returns ``(E_v, E_w, H_v, H_w)``, each shaped ``(n_v, n_w)``.
        """
        if self.phasors is None or self.elapsed == 0:
            raise ValueError("monitor has no accumulated samples")
        scale = 2.0 / self.elapsed
        ev, ew, hv0, hv1, hw0, hw1 = (p * scale for p in self.phasors)
        # E_v lives at (v+1/2, w); E_w at (v, w+1/2); H_v at (v, w+1/2, u+-1/2);
        # H_w at (v+1/2, w, u+-1/2).
        Ev = 0.5 * (ev[:-1, :-1] + ev[:-1, 1:])
        Ew = 0.5 * (ew[:-1, :-1] + ew[1:, :-1])
        hv = 0.5 * (hv0 + hv1)
        hw = 0.5 * (hw0 + hw1)
        Hv = 0.5 * (hv[:-1, :-1] + hv[1:, :-1])
        Hw = 0.5 * (hw[:-1, :-1] + hw[:-1, 1:])
        return Ev, Ew, Hv, Hw

    def flux_density(self):
        Ev, Ew, Hv, Hw = self.fields()
        return 0.5 * np.real(Ev * np.conj(Hw) - Ew * np.conj(Hv)) * self.sign

    def power(self, dx=None):
        dx = self._dx if dx is None else dx
        return float(np.sum(self.flux_density()) * dx * dx)

    def bind(self, dx):
        self._dx = dx
        return self

    def centres(self, dx):
        """Physical (v, w) coordinates of the cell centres, in um."""
        v = (np.arange(*self.v_range) + 0.5) * dx
        w = (np.arange(*self.w_range) + 0.5) * dx
        return v, w


class BoxMonitor:
    """Closed box of six plane monitors; net outward flux.

    ``lo`` and ``hi`` are node indices of opposite corners.
    """

    def __init__(self, lo, hi, omega, dt, dx):
        self.lo = tuple(int(a) for a in lo)
        self.hi = tuple(int(a) for a in hi)
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ConfigurationError("box corners must satisfy lo < hi on every axis")
        self.dx = dx
        self.faces = []
        for name, u in AXES.items():
            v, w = (u + 1) % 3, (u + 2) % 3
            vr = (self.lo[v], self.hi[v])
            wr = (self.lo[w], self.hi[w])
            self.faces.append(PlaneMonitor(name, self.lo[u], vr, wr, omega, dt, sign=-1).bind(dx))
            self.faces.append(PlaneMonitor(name, self.hi[u], vr, wr, omega, dt, sign=+1).bind(dx))

    def reset(self):
        for f in self.faces:
            f.reset()

    def accumulate(self, state):
        for f in self.faces:
            f.accumulate(state)

    def face_powers(self):
        return [f.power() for f in self.faces]

    def power(self):
        return float(sum(self.face_powers()))


def poynting_power(monitor):
    """Time-averaged power through a plane or box monitor."""
    return monitor.power()


def total_emitted_power(box):
    """In-situ emitted power: net outward flux through the closed box."""
    if not isinstance(box, BoxMonitor):
        raise TypeError("total_emitted_power needs a closed BoxMonitor")
    return box.power()


def box_around(position, half_cells, grid):
    """Node corners of a cube of ``2 * half_cells`` cells centred on ``position``."""
    c = np.floor(np.asarray(position) / grid.dx + 0.5).astype(int)
    lo = c - half_cells
    hi = c + half_cells
    for a in range(3):
        p_lo, p_hi = grid.interior(a)
        if lo[a] < p_lo or hi[a] > p_hi:
            raise ConfigurationError("flux box overlaps the PML")
    return lo, hi
