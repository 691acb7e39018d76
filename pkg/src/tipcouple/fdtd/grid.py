"""Grid geometry, time step and CPML grading profiles."""

from dataclasses import dataclass, field
import math

import numpy as np

from tipcouple.constants import C_UM_PER_FS


@dataclass(frozen=True)
class PmlParams:
    """Convolutional PML grading.

    ``sigma_scale`` multiplies the polynomial-grading optimum
    ``(order + 1) / (150 pi dx)``; ``alpha_max`` is a fraction of the
    angular source frequency.
    """

    cells: int = 10
    order: float = 3.0
    sigma_scale: float = 0.8
    kappa_max: float = 5.0
    alpha_max: float = 0.05


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    nz: int
    dx: float
    dt: float
    pml: PmlParams = field(default_factory=PmlParams)
    periodic: tuple = (False, False)

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def cdt(self):
        return C_UM_PER_FS * self.dt

    def pml_cells(self, axis):
        if axis < 2 and self.periodic[axis]:
            return 0
        return self.pml.cells

    def interior(self, axis):
        """Index range ``[lo, hi)`` of cells outside the absorbing layers."""
        n = self.shape[axis]
        p = self.pml_cells(axis)
        return p, n - p


def courant_dt(grid_step, safety=0.99):
    """Largest stable 3D time step (fs) scaled by ``safety``."""
    if grid_step <= 0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    if not 0 < safety <= 1:
        raise ValueError(f"Courant safety must lie in (0, 1], got {safety}")
    return safety * grid_step / (C_UM_PER_FS * math.sqrt(3.0))


def commensurate_dt(grid_step, wavelength, safety=0.99):
    """Stable time step that divides the optical period into whole steps.

    Returns ``(dt, steps_per_period)``.  Whole-period sampling makes the
    single-frequency DFT exactly orthogonal to the conjugate component.
    """
    period = wavelength / C_UM_PER_FS
    n = math.ceil(period / courant_dt(grid_step, safety))
    return period / n, n


@dataclass
class CpmlProfile:
    """Per-axis CPML coefficients on the E (integer) and H (half) nodes.

    ``rk_e``/``rk_h`` span the whole axis; ``b_*``/``c_*`` span only the
    ``2 * cells`` slab entries (low layer then high layer).
    """

    rk_e: np.ndarray
    rk_h: np.ndarray
    b_e: np.ndarray
    c_e: np.ndarray
    b_h: np.ndarray
    c_h: np.ndarray


def _grading(depth, p, omega, dt, dx):
    sigma_max = p.sigma_scale * (p.order + 1) / (150.0 * math.pi * dx)
    # sigma above is in S/m per metre of dx; convert to the normalized
    # sigma/eps0 rate in 1/fs with dx expressed in um.
    sigma_max = sigma_max * 376.730313668 * C_UM_PER_FS
    g = depth**p.order
    sigma = sigma_max * g
    kappa = 1.0 + (p.kappa_max - 1.0) * g
    alpha = p.alpha_max * omega * (1.0 - depth)
    alpha = np.where(depth > 0, alpha, 0.0)
    b = np.exp(-(sigma / kappa + alpha) * dt)
    denom = sigma * kappa + kappa**2 * alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(sigma > 0, sigma / np.where(denom > 0, denom, 1.0) * (b - 1.0), 0.0)
    return kappa, b, c


def cpml_profile(n, cells, dx, dt, params, omega):
    """Build the coefficients for one axis of ``n`` cells."""
    nodes_e = np.arange(n, dtype=float)
    nodes_h = nodes_e + 0.5
    depth_e = np.zeros(n)
    depth_h = np.zeros(n)
    if cells > 0:
        lo_e = (cells - nodes_e) / cells
        hi_e = (nodes_e - (n - cells)) / cells
        depth_e = np.clip(np.maximum(lo_e, hi_e), 0.0, 1.0)
        lo_h = (cells - nodes_h) / cells
        hi_h = (nodes_h - (n - cells)) / cells
        depth_h = np.clip(np.maximum(lo_h, hi_h), 0.0, 1.0)
    kap_e, b_e, c_e = _grading(depth_e, params, omega, dt, dx)
    kap_h, b_h, c_h = _grading(depth_h, params, omega, dt, dx)
    slab = np.r_[0:cells, n - cells:n] if cells > 0 else np.zeros(0, dtype=int)
    f32 = np.float32
    return CpmlProfile(
        rk_e=(1.0 / (kap_e * dx)).astype(f32),
        rk_h=(1.0 / (kap_h * dx)).astype(f32),
        b_e=b_e[slab].astype(f32),
        c_e=c_e[slab].astype(f32),
        b_h=b_h[slab].astype(f32),
        c_h=c_h[slab].astype(f32),
    )
