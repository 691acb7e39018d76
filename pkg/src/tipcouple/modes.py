"""Exact vector modes of a step-index circular waveguide.

Fields follow the ``exp(i (w t - beta z))`` convention, with H scaled by the
vacuum impedance to match the FDTD solver.  Longitudinal components are

    Ez = A J_nu(u r / a) cos(nu theta + phi)
    Hz = B J_nu(u r / a) sin(nu theta + phi)

inside the core and the matching K_nu form outside; ``phi`` selects the
polarization (0 or pi/2, which also turns nu = 0 into TM or TE).
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate, optimize
from scipy.special import jn_zeros, jv, jvp, kv, kvp

SCAN_POINTS = 2000


@dataclass(frozen=True, order=True)
class ModeLabel:
    family: str
    nu: int
    m: int
    polarization: int = 0

    def __post_init__(self):
        if self.family not in ("TE", "TM", "HE", "EH"):
            raise ValueError(f"unknown mode family {self.family!r}")
        if self.family in ("TE", "TM") and self.nu != 0:
            raise ValueError("TE/TM modes have nu = 0")
        if self.m < 1:
            raise ValueError("radial order starts at 1")

    def __str__(self):
        tag = f"{self.family}{self.nu}{self.m}"
        if self.family in ("HE", "EH"):
            tag += "ab"[self.polarization]
        return tag


def v_number(radius, n_core, n_clad, wavelength):
    if n_core <= n_clad:
        raise ValueError(f"core index {n_core} must exceed cladding index {n_clad}")
    if n_clad < 1.0:
        raise ValueError("cladding index below 1")
    if not (radius > 0 and wavelength > 0):
        raise ValueError(f"radius and wavelength must be positive, got {radius}, {wavelength}")
    return 2 * math.pi * radius / wavelength * math.sqrt(n_core**2 - n_clad**2)


def cutoff_v(family, nu, m, n_core, n_clad):
    """Normalized frequency below which a mode stops being guided."""
    if family in ("TE", "TM"):
        return float(jn_zeros(0, m)[-1])
    if family == "EH":
        return float(jn_zeros(nu, m)[-1])
    if nu == 1:
        return 0.0 if m == 1 else float(jn_zeros(1, m - 1)[-1])
    # HE_nu,m (nu >= 2): (n1^2/n2^2 + 1) J_{nu-1}(V) = V/(nu-1) J_nu(V), V > 0
    ratio = n_core**2 / n_clad**2 + 1.0

    def g(v):
        return ratio * jv(nu - 1, v) - v / (nu - 1) * jv(nu, v)

    grid = np.linspace(1e-6, 10 + 4 * nu + 4 * m, 20000)
    vals = g(grid)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        roots.append(optimize.brentq(g, grid[i], grid[i + 1]))
    return float(roots[m - 1])


@dataclass(frozen=True)
class Waveguide:
    radius: float
    n_core: float
    n_clad: float
    wavelength: float

    @property
    def k0(self):
        return 2 * math.pi / self.wavelength

    @property
    def V(self):
        return v_number(self.radius, self.n_core, self.n_clad, self.wavelength)

    def uw(self, n_eff):
        k0a = self.k0 * self.radius
        u = k0a * np.sqrt(np.maximum(self.n_core**2 - n_eff**2, 0.0))
        w = k0a * np.sqrt(np.maximum(n_eff**2 - self.n_clad**2, 0.0))
        return u, w


def _branch(guide, nu, sign, n_eff):
    """Pole-free characteristic function for one branch.

    sign=+1 gives EH (nu >= 1) or TE (nu = 0); sign=-1 gives HE or TM.
    """
    n1, n2 = guide.n_core, guide.n_clad
    u, w = guide.uw(n_eff)
    beta_k = n_eff
    kr = kvp(nu, w) / (w * kv(nu, w))
    q = (nu * beta_k) ** 2 * (1 / u**2 + 1 / w**2) ** 2
    rhs = -(n1**2 + n2**2) / (2 * n1**2) * kr + sign * np.sqrt(
        ((n1**2 - n2**2) / (2 * n1**2) * kr) ** 2 + q / n1**2)
    return jvp(nu, u) - u * jv(nu, u) * rhs


def _bisect_roots(f, lo, hi, points=SCAN_POINTS, xtol=1e-12):
    # open interval: endpoints are singular (u = 0 or w = 0)
    span = hi - lo
    grid = lo + span * (np.arange(points) + 0.5) / points
    vals = f(grid)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(optimize.bisect(f, grid[i], grid[i + 1], xtol=xtol))
    return roots


@dataclass(frozen=True)
class GuidedMode:
    label: ModeLabel
    guide: Waveguide
    n_eff: float
    u: float
    w: float
    a_coef: float
    b_coef: float
    normalization_power: float = field(default=float("nan"), compare=False)
    core_fraction: float = field(default=float("nan"), compare=False)

    @property
    def beta(self):
        return self.guide.k0 * self.n_eff

    @property
    def phase(self):
        if self.label.family == "TE":
            return 0.5 * math.pi
        if self.label.family == "TM":
            return 0.0
        return 0.5 * math.pi * self.label.polarization

    def radial(self, r):
        """Transverse field amplitudes in polar form.

        Returns (Er, Etheta, Hr, Htheta, Ez, Hz) amplitudes such that the
        fields are those values times cos/sin of ``nu theta + phi``:
        Er, Htheta, Ez carry cos; Etheta, Hr, Hz carry sin.
        """
        r = np.asarray(r, dtype=float)
        g = self.guide
        a, nu, k0, beta = g.radius, self.label.nu, g.k0, self.beta
        A, B = self.a_coef, self.b_coef
        inside = r <= a
        rs = np.where(r > 0, r, 1e-300)
        kc = self.u / a
        gc = self.w / a
        # core
        x = kc * r
        J = jv(nu, x)
        Jp = jvp(nu, x)
        # nu J(x)/r is finite at r = 0 (J_nu ~ x^nu); use the limit for nu = 1.
        j_over_r = np.where(r > 0, J / rs, kc * 0.5 if nu == 1 else 0.0)
        core = (
            -1j / kc**2 * (beta * A * kc * Jp + k0 * nu * B * j_over_r),
            1j / kc**2 * (beta * nu * A * j_over_r + k0 * B * kc * Jp),
            -1j / kc**2 * (beta * B * kc * Jp + k0 * g.n_core**2 * nu * A * j_over_r),
            -1j / kc**2 * (beta * nu * B * j_over_r + k0 * g.n_core**2 * A * kc * Jp),
            A * J + 0j,
            B * J + 0j,
        )
        # cladding, scaled to match Ez/Hz at r = a
        s = jv(nu, self.u) / kv(nu, self.w)
        y = gc * np.where(inside, a, r)
        K = kv(nu, y) * s
        Kp = kvp(nu, y) * s
        k_over_r = K / np.where(inside, a, r)
        clad = (
            1j / gc**2 * (beta * A * gc * Kp + k0 * nu * B * k_over_r),
            -1j / gc**2 * (beta * nu * A * k_over_r + k0 * B * gc * Kp),
            1j / gc**2 * (beta * B * gc * Kp + k0 * g.n_clad**2 * nu * A * k_over_r),
            1j / gc**2 * (beta * nu * B * k_over_r + k0 * g.n_clad**2 * A * gc * Kp),
            A * K + 0j,
            B * K + 0j,
        )
        return tuple(np.where(inside, c, o) for c, o in zip(core, clad))

    def fields(self, x, y, scale=1.0):
        """Cartesian (Ex, Ey, Ez), (Hx, Hy, Hz) at points (x, y) from the axis."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        th = np.arctan2(y, x)
        er, et, hr, ht, ez, hz = self.radial(r)
        arg = self.label.nu * th + self.phase
        c, s = np.cos(arg), np.sin(arg)
        er, ht, ez = er * c, ht * c, ez * c
        et, hr, hz = et * s, hr * s, hz * s
        ct, st = np.cos(th), np.sin(th)
        E = (scale * (er * ct - et * st), scale * (er * st + et * ct), scale * ez)
        H = (scale * (hr * ct - ht * st), scale * (hr * st + ht * ct), scale * hz)
        return E, H

    def angular_weights(self):
        """Integrals over theta of cos^2 and sin^2 of (nu theta + phi)."""
        if self.label.nu == 0:
            return 2 * math.pi * math.cos(self.phase) ** 2, 2 * math.pi * math.sin(self.phase) ** 2
        return math.pi, math.pi


def mode_profile(mode, x, y):
    """Transverse and longitudinal E, H of ``mode`` at (x, y) in um from the axis."""
    return mode.fields(x, y)


def _axial_flux_density(mode, r):
    er, et, hr, ht, _, _ = mode.radial(r)
    wc, ws = mode.angular_weights()
    return 0.5 * np.real(er * np.conj(ht) * wc - et * np.conj(hr) * ws) * r


def mode_power(mode, r_max=None):
    """0.5 Re integral of (E x H*) . z over the cross-section."""
    a = mode.guide.radius
    f = lambda r: float(_axial_flux_density(mode, r))
    opts = dict(epsabs=0.0, epsrel=1e-11, limit=400)
    core, err1 = integrate.quad(f, 0.0, a, **opts)
    clad, err2 = integrate.quad(f, a, np.inf, **opts)
    total = core + clad
    if not np.isfinite(total) or total <= 0:
        raise ArithmeticError(f"mode power quadrature failed for {mode.label}")
    return total, core / total


def _make_mode(label, guide, n_eff):
    u, w = guide.uw(n_eff)
    u, w = float(u), float(w)
    a = guide.radius
    if label.family == "TE":
        A, B = 0.0, 1.0
    elif label.family == "TM":
        A, B = 1.0, 0.0
    else:
        kc, gc = u / a, w / a
        Ju, Jp = jv(label.nu, u), jvp(label.nu, u)
        kr = kvp(label.nu, w) / kv(label.nu, w)
        A = 1.0
        B = -(guide.k0 * n_eff * label.nu / a) * Ju * (1 / kc**2 + 1 / gc**2) / (
            guide.k0 * (Jp / kc + Ju * kr / gc))
    mode = GuidedMode(label, guide, float(n_eff), u, w, float(A), float(B))
    p, frac = mode_power(mode)
    # unit power normalization keeps amplitudes comparable across modes
    s = 1.0 / math.sqrt(p)
    mode = GuidedMode(label, guide, float(n_eff), u, w, A * s, B * s)
    p, frac = mode_power(mode)
    return GuidedMode(label, guide, float(n_eff), u, w, A * s, B * s, p, frac)


def solve_modes(radius, n_core, n_clad, wavelength, points=SCAN_POINTS):
    """All guided modes, sorted by decreasing effective index.

    Each nu >= 1 hybrid mode appears twice (polarizations 0 and 1).
    """
    v_number(radius, n_core, n_clad, wavelength)
    guide = Waveguide(radius, n_core, n_clad, wavelength)
    found = []
    empty_run = 0
    nu = 0
    while empty_run < 2:
        branches = (("TE", 1), ("TM", -1)) if nu == 0 else (("EH", 1), ("HE", -1))
        count = 0
        for fam, sign in branches:
            f = lambda ne, nu=nu, sign=sign: _branch(guide, nu, sign, ne)
            with np.errstate(all="ignore"):
                roots = _bisect_roots(f, n_clad, n_core, points)
            for m, ne in enumerate(sorted(roots, reverse=True), start=1):
                pols = (0,) if nu == 0 else (0, 1)
                for pol in pols:
                    found.append(_make_mode(ModeLabel(fam, nu, m, pol), guide, ne))
                count += 1
        empty_run = empty_run + 1 if count == 0 else 0
        nu += 1
    found.sort(key=lambda md: (-md.n_eff, md.label))
    return found


def _polar_grid(modes, nr, ntheta, r_max_decay):
    a = modes[0].guide.radius
    gmin = min(m.w for m in modes) / a
    r_out = a + r_max_decay / gmin
    xg, wg = np.polynomial.legendre.leggauss(nr)
    rs, ws = [], []
    for lo, hi in ((0.0, a), (a, a + 3.0 / gmin), (a + 3.0 / gmin, r_out)):
        rs.append(0.5 * (hi - lo) * xg + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * wg)
    r = np.concatenate(rs)
    wr = np.concatenate(ws)
    th = np.arange(ntheta) * 2 * np.pi / ntheta
    R, TH = np.meshgrid(r, th, indexing="ij")
    weight = (wr * r)[:, None] * (2 * np.pi / ntheta)
    return R * np.cos(TH), R * np.sin(TH), weight


def _cross(Ei, Hi, Ej, Hj, weight):
    return 0.25 * np.sum((Ei[0] * np.conj(Hj[1]) - Ei[1] * np.conj(Hj[0])
                          + np.conj(Ej[0]) * Hi[1] - np.conj(Ej[1]) * Hi[0]) * weight)


def overlap(mode_i, mode_j, nr=160, ntheta=96, r_max_decay=40.0):
    """0.25 integral (E_i x H_j* + E_j* x H_i) . z, by polar quadrature.

    Gauss-Legendre in r on the core and on the cladding out to
    ``r_max_decay`` decay lengths, trapezoid in theta.
    """
    X, Y, weight = _polar_grid((mode_i, mode_j), nr, ntheta, r_max_decay)
    Ei, Hi = mode_i.fields(X, Y)
    Ej, Hj = mode_j.fields(X, Y)
    return _cross(Ei, Hi, Ej, Hj, weight)


def overlap_matrix(modes, nr=160, ntheta=96, r_max_decay=40.0):
    """Pairwise overlaps normalized by sqrt(P_i P_j); identity for an orthonormal set."""
    X, Y, weight = _polar_grid(modes, nr, ntheta, r_max_decay)
    fields = [m.fields(X, Y) for m in modes]
    n = len(modes)
    out = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            norm = math.sqrt(modes[i].normalization_power * modes[j].normalization_power)
            out[i, j] = _cross(*fields[i], *fields[j], weight) / norm
    return out
