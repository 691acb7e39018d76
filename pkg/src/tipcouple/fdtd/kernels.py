"""Numba kernels for the Yee leapfrog update and CPML corrections.

Field arrays carry one zero padding plane at the high end of every axis
(shape ``(nx+1, ny+1, nz+1)``), so forward differences at the last cell read
a perfect-conductor zero instead of branching.  Neighbour tables resolve the
transverse wrap for periodic axes; z is never periodic.

All arrays are float32.  ``cdt`` is ``c * dt`` in micrometres; the magnetic
field is stored pre-multiplied by the vacuum impedance so both fields share
units.
"""

import numba as nb
import numpy as np
from numba import prange


@nb.njit(parallel=True, cache=True)
def update_h(ex, ey, ez, hx, hy, hz, ipx, ipy, rkx, rky, rkz, cdt, nx, ny, nz):
    # rk* hold 1 / (kappa * d) sampled on the half-integer nodes.
    for i in prange(nx):
        i1 = ipx[i]
        rx = rkx[i]
        for j in range(ny):
            j1 = ipy[j]
            ry = rky[j]
            for k in range(nz):
                rz = rkz[k]
                ez0 = ez[i, j, k]
                ey0 = ey[i, j, k]
                ex0 = ex[i, j, k]
                hx[i, j, k] -= cdt * ((ez[i, j1, k] - ez0) * ry - (ey[i, j, k + 1] - ey0) * rz)
                hy[i, j, k] -= cdt * ((ex[i, j, k + 1] - ex0) * rz - (ez[i1, j, k] - ez0) * rx)
                hz[i, j, k] -= cdt * ((ey[i1, j, k] - ey0) * rx - (ex[i, j1, k] - ex0) * ry)


@nb.njit(parallel=True, cache=True)
def update_e(ex, ey, ez, hx, hy, hz, cex, cey, cez, imx, imy, rkx, rky, rkz, nx, ny, nz):
    # c* = c*dt/eps per edge; im* = -1 marks a conducting wall at node 0.
    # rk* hold 1 / (kappa * d) sampled on the integer nodes.
    for i in prange(nx):
        i0 = imx[i]
        rx = rkx[i]
        for j in range(ny):
            j0 = imy[j]
            ry = rky[j]
            if j0 >= 0:
                for k in range(1, nz):
                    ex[i, j, k] += cex[i, j, k] * (
                        (hz[i, j, k] - hz[i, j0, k]) * ry - (hy[i, j, k] - hy[i, j, k - 1]) * rkz[k]
                    )
            if i0 >= 0:
                for k in range(1, nz):
                    ey[i, j, k] += cey[i, j, k] * (
                        (hx[i, j, k] - hx[i, j, k - 1]) * rkz[k] - (hz[i, j, k] - hz[i0, j, k]) * rx
                    )
            if i0 >= 0 and j0 >= 0:
                for k in range(nz):
                    ez[i, j, k] += cez[i, j, k] * (
                        (hy[i, j, k] - hy[i0, j, k]) * rx - (hx[i, j, k] - hx[i, j0, k]) * ry
                    )


# --- CPML corrections -----------------------------------------------------
# Each slab array holds the low-side layer followed by the high-side layer
# along its own axis: local index s maps to global s (s < n) or N - 2n + s.


@nb.njit(cache=True)
def _slab_index(s, npml, n):
    # prange yields unsigned indices; mixing with signed ints promotes to float.
    s = np.int64(s)
    if s < npml:
        return s
    return n - 2 * npml + s


@nb.njit(parallel=True, cache=True)
def cpml_h_x(ey, ez, hy, hz, psi_hyx, psi_hzx, ipx, b, c, cdt, npml, nx, ny, nz, inv_d):
    for s in prange(2 * npml):
        i = _slab_index(s, npml, nx)
        i1 = ipx[i]
        bs = b[s]
        cs = c[s] * inv_d
        for j in range(ny):
            for k in range(nz):
                psi_hyx[s, j, k] = bs * psi_hyx[s, j, k] + cs * (ez[i1, j, k] - ez[i, j, k])
                psi_hzx[s, j, k] = bs * psi_hzx[s, j, k] + cs * (ey[i1, j, k] - ey[i, j, k])
                hy[i, j, k] += cdt * psi_hyx[s, j, k]
                hz[i, j, k] -= cdt * psi_hzx[s, j, k]


@nb.njit(parallel=True, cache=True)
def cpml_h_y(ex, ez, hx, hz, psi_hxy, psi_hzy, ipy, b, c, cdt, npml, nx, ny, nz, inv_d):
    for i in prange(nx):
        for s in range(2 * npml):
            j = _slab_index(s, npml, ny)
            j1 = ipy[j]
            bs = b[s]
            cs = c[s] * inv_d
            for k in range(nz):
                psi_hxy[i, s, k] = bs * psi_hxy[i, s, k] + cs * (ez[i, j1, k] - ez[i, j, k])
                psi_hzy[i, s, k] = bs * psi_hzy[i, s, k] + cs * (ex[i, j1, k] - ex[i, j, k])
                hx[i, j, k] -= cdt * psi_hxy[i, s, k]
                hz[i, j, k] += cdt * psi_hzy[i, s, k]


@nb.njit(parallel=True, cache=True)
def cpml_h_z(ex, ey, hx, hy, psi_hxz, psi_hyz, b, c, cdt, npml, nx, ny, nz, inv_d):
    for i in prange(nx):
        for j in range(ny):
            for s in range(2 * npml):
                k = _slab_index(s, npml, nz)
                cs = c[s] * inv_d
                psi_hxz[i, j, s] = b[s] * psi_hxz[i, j, s] + cs * (ey[i, j, k + 1] - ey[i, j, k])
                psi_hyz[i, j, s] = b[s] * psi_hyz[i, j, s] + cs * (ex[i, j, k + 1] - ex[i, j, k])
                hx[i, j, k] += cdt * psi_hxz[i, j, s]
                hy[i, j, k] -= cdt * psi_hyz[i, j, s]


@nb.njit(parallel=True, cache=True)
def cpml_e_x(ey, ez, hy, hz, cey, cez, psi_eyx, psi_ezx, imx, imy, b, c, npml, nx, ny, nz, inv_d):
    for s in prange(2 * npml):
        i = _slab_index(s, npml, nx)
        i0 = imx[i]
        if i0 < 0:
            continue
        bs = b[s]
        cs = c[s] * inv_d
        for j in range(ny):
            j0 = imy[j]
            for k in range(nz):
                dhz = hz[i, j, k] - hz[i0, j, k]
                dhy = hy[i, j, k] - hy[i0, j, k]
                psi_eyx[s, j, k] = bs * psi_eyx[s, j, k] + cs * dhz
                psi_ezx[s, j, k] = bs * psi_ezx[s, j, k] + cs * dhy
                if k > 0:
                    ey[i, j, k] -= cey[i, j, k] * psi_eyx[s, j, k]
                if j0 >= 0:
                    ez[i, j, k] += cez[i, j, k] * psi_ezx[s, j, k]


@nb.njit(parallel=True, cache=True)
def cpml_e_y(ex, ez, hx, hz, cex, cez, psi_exy, psi_ezy, imx, imy, b, c, npml, nx, ny, nz, inv_d):
    for i in prange(nx):
        i0 = imx[i]
        for s in range(2 * npml):
            j = _slab_index(s, npml, ny)
            j0 = imy[j]
            if j0 < 0:
                continue
            bs = b[s]
            cs = c[s] * inv_d
            for k in range(nz):
                psi_exy[i, s, k] = bs * psi_exy[i, s, k] + cs * (hz[i, j, k] - hz[i, j0, k])
                psi_ezy[i, s, k] = bs * psi_ezy[i, s, k] + cs * (hx[i, j, k] - hx[i, j0, k])
                if k > 0:
                    ex[i, j, k] += cex[i, j, k] * psi_exy[i, s, k]
                if i0 >= 0:
                    ez[i, j, k] -= cez[i, j, k] * psi_ezy[i, s, k]


@nb.njit(parallel=True, cache=True)
def cpml_e_z(ex, ey, hx, hy, cex, cey, psi_exz, psi_eyz, imx, imy, b, c, npml, nx, ny, nz, inv_d):
    for i in prange(nx):
        i0 = imx[i]
        for j in range(ny):
            j0 = imy[j]
            for s in range(2 * npml):
                k = _slab_index(s, npml, nz)
                if k == 0:
                    continue
                psi_exz[i, j, s] = b[s] * psi_exz[i, j, s] + c[s] * inv_d * (hy[i, j, k] - hy[i, j, k - 1])
                psi_eyz[i, j, s] = b[s] * psi_eyz[i, j, s] + c[s] * inv_d * (hx[i, j, k] - hx[i, j, k - 1])
                if j0 >= 0:
                    ex[i, j, k] -= cex[i, j, k] * psi_exz[i, j, s]
                if i0 >= 0:
                    ey[i, j, k] += cey[i, j, k] * psi_eyz[i, j, s]
