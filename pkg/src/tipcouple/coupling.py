"""Coupling efficiency from monitor phasors and guided-mode overlaps."""

from dataclasses import asdict, dataclass, field
import math

import numpy as np
from scipy.interpolate import RegularGridInterpolator

ETA_SLACK = 0.02  # discretization allowance on efficiency bounds


@dataclass
class PlaneFields:
    """Tangential phasors on a z-normal plane, sampled at cell centres.

    ``x`` and ``y`` are 1D coordinates (um) relative to the waveguide axis.
    """

    x: np.ndarray
    y: np.ndarray
    ex: np.ndarray
    ey: np.ndarray
    hx: np.ndarray
    hy: np.ndarray

    @classmethod
    def from_monitor(cls, monitor, dx, axis_xy):
        if monitor.normal != "z":
            raise ValueError("mode decomposition needs a z-normal monitor")
        ex, ey, hx, hy = monitor.fields()
        xc, yc = monitor.centres(dx)
        return cls(xc - axis_xy[0], yc - axis_xy[1], ex, ey, hx, hy)

    def scaled(self, factor):
        return PlaneFields(self.x, self.y, self.ex * factor, self.ey * factor,
                           self.hx * factor, self.hy * factor)

    def power(self):
        dx = self.x[1] - self.x[0]
        dy = self.y[1] - self.y[0]
        s = 0.5 * np.real(self.ex * np.conj(self.hy) - self.ey * np.conj(self.hx))
        return float(s.sum() * dx * dy)


def sample_mode(mode, x, y):
    """Mode fields on the cell-centre grid, as PlaneFields."""
    X, Y = np.meshgrid(x, y, indexing="ij")
    E, H = mode.fields(X, Y)
    return PlaneFields(np.asarray(x), np.asarray(y), E[0], E[1], H[0], H[1])


class OverlapQuadrature:
    """Gauss-Legendre points (``order`` per cell and axis) over a plane grid."""

    def __init__(self, x, y, order=4):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        dx = self.x[1] - self.x[0]
        dy = self.y[1] - self.y[0]
        g, w = np.polynomial.legendre.leggauss(order)
        # cells are centred on the sample points
        qx = (self.x[:, None] + 0.5 * dx * g[None, :]).ravel()
        qy = (self.y[:, None] + 0.5 * dy * g[None, :]).ravel()
        wx = np.tile(0.5 * dx * w, self.x.size)
        wy = np.tile(0.5 * dy * w, self.y.size)
        self.qx, self.qy = qx, qy
        self.weights = wx[:, None] * wy[None, :]
        self._mode_cache = {}

    def interpolate(self, values):
        """Bilinear interpolation of cell-centre data; constant beyond the edge."""
        qx = np.clip(self.qx, self.x[0], self.x[-1])
        qy = np.clip(self.qy, self.y[0], self.y[-1])
        interp = RegularGridInterpolator((self.x, self.y), values, method="linear")
        X, Y = np.meshgrid(qx, qy, indexing="ij")
        return interp(np.stack([X, Y], axis=-1))

    def mode_fields(self, mode):
        key = id(mode)
        if key not in self._mode_cache:
            X, Y = np.meshgrid(self.qx, self.qy, indexing="ij")
            E, H = mode.fields(X, Y)
            self._mode_cache[key] = (mode, E[0], E[1], H[0], H[1])
        return self._mode_cache[key][1:]


def mode_amplitude(fields: PlaneFields, mode, quadrature=None):
    """Forward amplitude of ``mode`` in the monitor fields.

    ``a = 0.25 * integral (E_mon x H_m* + E_m* x H_mon) . z dA / P_m``, so a
    field equal to the mode itself returns 1.
    """
    q = quadrature or OverlapQuadrature(fields.x, fields.y)
    if q.x.shape != fields.x.shape or q.y.shape != fields.y.shape:
        raise ValueError("monitor grid does not match the quadrature grid")
    ex, ey, hx, hy = (q.interpolate(v) for v in (fields.ex, fields.ey, fields.hx, fields.hy))
    mex, mey, mhx, mhy = q.mode_fields(mode)
    integrand = (ex * np.conj(mhy) - ey * np.conj(mhx)
                 + np.conj(mex) * hy - np.conj(mey) * hx)
    return complex(0.25 * np.sum(integrand * q.weights) / mode.normalization_power)


@dataclass
class CouplingReport:
    P_total: float
    P_flux: float
    P_vacuum: float
    per_mode: list = field(default_factory=list)
    eta_flux: float = 0.0
    eta_modal: float = 0.0
    residual: float = 0.0
    purcell_ratio: float = 1.0
    eta_vacuum_norm: float = 0.0
    converged: bool = True
    steps: int = 0
    shutoff_ratio: float = math.nan
    preset: str = ""
    meta: dict = field(default_factory=dict)

    def to_record(self):
        rec = asdict(self)
        rec["per_mode"] = [{"mode": str(lbl), "power": p} for lbl, p in self.per_mode]
        return rec

    def check(self, slack=ETA_SLACK):
        """Bound violations, as text (empty when consistent)."""
        out = []
        if self.eta_modal < -slack:
            out.append(f"eta_modal {self.eta_modal:.4f} is negative")
        if self.eta_modal > self.eta_flux + slack:
            out.append(f"eta_modal {self.eta_modal:.4f} exceeds eta_flux {self.eta_flux:.4f}")
        if self.eta_flux > 1 + slack:
            out.append(f"eta_flux {self.eta_flux:.4f} exceeds 1")
        return out


def build_report(P_total, P_flux, P_vacuum, plane=None, modes=(), converged=True, steps=0,
                 shutoff_ratio=math.nan, preset="", meta=None):
    """Assemble efficiencies; modal terms only when a plane and modes are given."""
    per_mode = []
    if plane is not None and modes:
        q = OverlapQuadrature(plane.x, plane.y)
        for m in modes:
            a = mode_amplitude(plane, m, q)
            per_mode.append((m.label, abs(a) ** 2 * m.normalization_power))
    eta_flux = P_flux / P_total
    eta_modal = sum(p for _, p in per_mode) / P_total
    return CouplingReport(
        P_total=P_total, P_flux=P_flux, P_vacuum=P_vacuum, per_mode=per_mode,
        eta_flux=eta_flux, eta_modal=eta_modal, residual=eta_flux - eta_modal,
        purcell_ratio=P_total / P_vacuum, eta_vacuum_norm=P_flux / P_vacuum,
        converged=converged, steps=steps, shutoff_ratio=shutoff_ratio, preset=preset,
        meta=dict(meta or {}),
    )


def orientation_average(reports, key="eta_flux"):
    """Mean efficiency over the x, y, z dipole orientations of one scene.

    ``reports`` maps orientation -> CouplingReport (or plain float).  Returns
    ``(mean, per_orientation)``.
    """
    if len(reports) != 3:
        raise ValueError("orientation_average needs exactly three orientations")
    scenes = {r.meta.get("geometry_key") for r in reports.values()
              if isinstance(r, CouplingReport)}
    if len(scenes) > 1:
        raise ValueError("reports come from different scenes")
    values = {o: (getattr(r, key) if isinstance(r, CouplingReport) else float(r))
              for o, r in reports.items()}
    return sum(values.values()) / 3.0, values
