"""Scene description: dielectric cylinders in vacuum, and their rasterization.

Coordinates are in micrometres with the origin at the low corner of the
simulation domain (PML included).  Scenes are loaded from JSON trees with a
fixed set of keys; anything unexpected is rejected so typos fail loudly.
"""

from dataclasses import dataclass, field, replace
import json
import math

import numpy as np

AXIS_NAMES = ("x", "y", "z")
ORIENTATIONS = {"radial": "x", "azimuthal": "y", "axial": "z"}
DIPOLE_CLEARANCE = 0.010  # um, emitter to nearest facet
_SUB = (np.arange(4) + 0.5) / 4 - 0.5  # 4-point subcell offsets, in cells


class ConfigError(ValueError):
    """Malformed or inconsistent scene configuration."""


class ResolutionError(ValueError):
    pass


class OutOfDomainError(ValueError):
    pass


@dataclass(frozen=True)
class Material:
    name: str
    refractive_index: float

    @property
    def permittivity(self):
        return self.refractive_index**2


VACUUM = Material("vacuum", 1.0)


@dataclass(frozen=True)
class CylinderPrimitive:
    """Flat-ended cylinder along a coordinate axis.

    ``axis`` is a signed axis label such as ``"+z"``; the sign only records
    which end is the facet (the low end for ``+``).
    """

    name: str
    axis: str
    center: tuple
    radius: float
    length: float
    material: str

    @property
    def axis_index(self):
        return AXIS_NAMES.index(self.axis[-1])

    def local(self, points):
        """Radial and axial offsets of ``points`` (..., 3) from the axis/centre."""
        p = np.asarray(points, dtype=float) - np.asarray(self.center, dtype=float)
        a = self.axis_index
        t = [i for i in range(3) if i != a]
        rho = np.hypot(p[..., t[0]], p[..., t[1]])
        return rho, p[..., a]

    def contains(self, points):
        rho, s = self.local(points)
        return (rho <= self.radius) & (np.abs(s) <= 0.5 * self.length)

    def distance(self, point):
        """Euclidean distance from an outside point to the solid (0 inside)."""
        rho, s = self.local(point)
        dr = max(float(rho) - self.radius, 0.0)
        ds = max(abs(float(s)) - 0.5 * self.length, 0.0)
        return math.hypot(dr, ds)

    def bounds(self):
        lo = np.asarray(self.center, dtype=float) - self.radius
        hi = np.asarray(self.center, dtype=float) + self.radius
        a = self.axis_index
        lo[a] = self.center[a] - 0.5 * self.length
        hi[a] = self.center[a] + 0.5 * self.length
        return lo, hi


@dataclass(frozen=True)
class PairConfig:
    primary: str
    secondary: str = None
    gap_d: float = 0.0


@dataclass(frozen=True)
class Domain:
    extents: tuple
    grid_step: float
    pml_cells: int = 10

    @property
    def shape(self):
        return tuple(int(round(e / self.grid_step)) for e in self.extents)


@dataclass(frozen=True)
class SourceSpec:
    position: tuple
    orientation: str = "radial"
    wavelength: float = 0.620
    amplitude: float = 1.0
    ramp_cycles: float = 20.0

    @property
    def axis(self):
        return ORIENTATIONS.get(self.orientation, self.orientation)


@dataclass(frozen=True)
class MonitorSpec:
    plane_z: float = None  # um; flux plane M normal to +z
    box_half_cells: int = 2


@dataclass(frozen=True)
class RunSpec:
    preset: str = "coarse"
    courant: float = 0.99
    shutoff: float = 1e-3
    window_cycles: int = 5
    max_cycles: float = 400.0
    mode_decomposition: bool = True
    snapshots: bool = False


@dataclass(frozen=True)
class Scene:
    domain: Domain
    materials: dict
    primitives: tuple
    source: SourceSpec
    pair: PairConfig = None
    monitors: MonitorSpec = field(default_factory=MonitorSpec)
    run: RunSpec = field(default_factory=RunSpec)
    background: Material = VACUUM

    def primitive(self, name):
        for p in self.primitives:
            if p.name == name:
                return p
        raise KeyError(name)

    def material_of(self, prim):
        return self.materials[prim.material]

    def with_grid_step(self, dx):
        return replace(self, domain=replace(self.domain, grid_step=dx))


# --- config tree -----------------------------------------------------------

_KEYS = {
    "": {"domain", "materials", "primitives", "pair", "source", "monitors", "run"},
    "domain": {"extents", "grid_step", "pml_cells"},
    "material": {"name", "refractive_index"},
    "primitive": {"name", "axis", "center", "radius", "length", "material"},
    "pair": {"primary", "secondary", "gap_d"},
    "source": {"position", "orientation", "wavelength", "amplitude", "ramp_cycles"},
    "monitors": {"plane_z", "box_half_cells"},
    "run": {"preset", "courant", "shutoff", "window_cycles", "max_cycles",
            "mode_decomposition", "snapshots"},
}
_REQUIRED = {"": {"domain", "materials", "primitives", "source"}}


def _check_keys(tree, kind, path):
    if not isinstance(tree, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    unknown = set(tree) - _KEYS[kind]
    if unknown:
        raise ConfigError(f"unknown key {path + '.' if path else ''}{sorted(unknown)[0]}")
    missing = _REQUIRED.get(kind, set()) - set(tree)
    if missing:
        raise ConfigError(f"missing key {sorted(missing)[0]}")


def scene_from_dict(tree):
    _check_keys(tree, "", "")
    _check_keys(tree["domain"], "domain", "domain")
    try:
        domain = Domain(tuple(float(v) for v in tree["domain"]["extents"]),
                        float(tree["domain"]["grid_step"]),
                        int(tree["domain"].get("pml_cells", 10)))
        materials = {}
        for i, m in enumerate(tree["materials"]):
            _check_keys(m, "material", f"materials[{i}]")
            materials[m["name"]] = Material(m["name"], float(m["refractive_index"]))
        prims = []
        for i, p in enumerate(tree["primitives"]):
            _check_keys(p, "primitive", f"primitives[{i}]")
            prims.append(CylinderPrimitive(p["name"], p["axis"], tuple(float(v) for v in p["center"]),
                                           float(p["radius"]), float(p["length"]), p["material"]))
        pair = None
        if tree.get("pair") is not None:
            _check_keys(tree["pair"], "pair", "pair")
            pair = PairConfig(**tree["pair"])
        _check_keys(tree["source"], "source", "source")
        src = dict(tree["source"])
        src["position"] = tuple(float(v) for v in src["position"])
        source = SourceSpec(**src)
        mon = tree.get("monitors") or {}
        _check_keys(mon, "monitors", "monitors")
        run = tree.get("run") or {}
        _check_keys(run, "run", "run")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return Scene(domain, materials, tuple(prims), source, pair, MonitorSpec(**mon), RunSpec(**run))


def scene_to_dict(scene):
    d = scene.domain
    out = {
        "domain": {"extents": list(d.extents), "grid_step": d.grid_step, "pml_cells": d.pml_cells},
        "materials": [{"name": m.name, "refractive_index": m.refractive_index}
                      for m in scene.materials.values()],
        "primitives": [{"name": p.name, "axis": p.axis, "center": list(p.center), "radius": p.radius,
                        "length": p.length, "material": p.material} for p in scene.primitives],
        "pair": None if scene.pair is None else dict(vars(scene.pair)),
        "source": {**vars(scene.source), "position": list(scene.source.position)},
        "monitors": dict(vars(scene.monitors)),
        "run": dict(vars(scene.run)),
    }
    return out


def load_scene(path):
    with open(path) as fh:
        try:
            tree = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return scene_from_dict(tree)


# --- validation ------------------------------------------------------------


def _overlap(a, b, samples=24):
    """Brute-force intersection test of two cylinders on a lattice."""
    alo, ahi = a.bounds()
    blo, bhi = b.bounds()
    lo = np.maximum(alo, blo)
    hi = np.minimum(ahi, bhi)
    if np.any(lo > hi):
        return False
    axes = [np.linspace(l, h, samples) for l, h in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return bool(np.any(a.contains(pts) & b.contains(pts)))


def validate_scene(scene):
    """List every invariant violation; an empty list means the scene is usable."""
    out = []
    dom = scene.domain
    if len(dom.extents) != 3 or any(e <= 0 for e in dom.extents):
        out.append("domain: extents must be three positive lengths")
    if dom.grid_step <= 0:
        out.append("domain: grid_step must be positive")
    if dom.pml_cells < 8:
        out.append(f"domain: pml_cells={dom.pml_cells} is below the minimum of 8")
    if dom.grid_step > 0 and all(e > 0 for e in dom.extents):
        for name, n in zip(AXIS_NAMES, dom.shape):
            if n < 2 * dom.pml_cells + 10:
                out.append(f"domain: only {n} cells along {name}, need {2 * dom.pml_cells + 10}")
    for m in scene.materials.values():
        if m.refractive_index < 1.0:
            out.append(f"material {m.name}: refractive index {m.refractive_index} < 1")
    for p in scene.primitives:
        if p.radius <= 0:
            out.append(f"primitive {p.name}: radius must be positive (got {p.radius})")
        if p.length <= 0:
            out.append(f"primitive {p.name}: length must be positive (got {p.length})")
        if p.axis not in {s + a for s in "+-" for a in AXIS_NAMES}:
            out.append(f"primitive {p.name}: axis {p.axis!r} is not one of +-x, +-y, +-z")
        if p.material not in scene.materials:
            out.append(f"primitive {p.name}: unknown material {p.material!r}")
    if out:
        return out
    prims = scene.primitives
    for i in range(len(prims)):
        for j in range(i + 1, len(prims)):
            if _overlap(prims[i], prims[j]):
                out.append(f"primitives {prims[i].name} and {prims[j].name} overlap")

    src = scene.source
    pos = np.asarray(src.position, dtype=float)
    if src.axis not in AXIS_NAMES:
        out.append(f"source: orientation {src.orientation!r} not recognised")
    if src.wavelength <= 0:
        out.append("source: wavelength must be positive")
    pml = dom.pml_cells * dom.grid_step
    if np.any(pos < pml) or np.any(pos > np.asarray(dom.extents) - pml):
        out.append("source: position lies in the PML or outside the domain")
    for p in prims:
        if p.contains(pos):
            out.append(f"source: dipole is inside {p.name}")
        elif p.distance(pos) < DIPOLE_CLEARANCE - 1e-9:
            out.append(f"source: dipole is {p.distance(pos) * 1e3:.1f} nm from {p.name}, "
                       f"needs {DIPOLE_CLEARANCE * 1e3:.0f} nm clearance")

    if scene.pair is not None:
        pr = scene.pair
        names = {p.name for p in prims}
        if pr.primary not in names:
            out.append(f"pair: primary {pr.primary!r} is not a primitive")
        if pr.secondary is not None and pr.secondary not in names:
            out.append(f"pair: secondary {pr.secondary!r} is not a primitive")
        if pr.gap_d < 0:
            out.append("pair: gap_d must be non-negative")
        if not out and pr.secondary is not None:
            out.extend(_check_gap(scene))

    if scene.monitors.plane_z is not None:
        z = scene.monitors.plane_z
        if not pml < z < dom.extents[2] - pml:
            out.append("monitors: plane_z lies in the PML")
    return out


def _check_gap(scene):
    """Dipole must sit in the gap between facet and partner along the axis."""
    pr = scene.pair
    a = scene.primitive(pr.primary)
    b = scene.primitive(pr.secondary)
    ax = a.axis_index
    pos = np.asarray(scene.source.position, dtype=float)
    facet = a.center[ax] - 0.5 * a.length if a.axis[0] == "+" else a.center[ax] + 0.5 * a.length
    blo, bhi = b.bounds()
    partner = bhi[ax] if a.axis[0] == "+" else blo[ax]
    out = []
    gap = abs(facet - partner)
    if abs(gap - pr.gap_d) > 1e-6:
        out.append(f"pair: geometry gap {gap:.4f} um disagrees with gap_d {pr.gap_d:.4f} um")
    lo, hi = sorted((facet, partner))
    if not lo < pos[ax] < hi:
        out.append("pair: dipole is not inside the gap")
    return out


# --- permittivity ----------------------------------------------------------


def permittivity_at(scene, point):
    """Exact relative permittivity at a point (last listed primitive wins)."""
    p = np.asarray(point, dtype=float)
    ext = np.asarray(scene.domain.extents, dtype=float)
    if np.any(p < 0) or np.any(p > ext):
        raise OutOfDomainError(f"point {tuple(p)} is outside the domain")
    eps = scene.background.permittivity
    for prim in scene.primitives:
        if prim.contains(p):
            eps = scene.material_of(prim).permittivity
    return eps


@dataclass
class PermittivityGrid:
    """Relative permittivity on the Ex, Ey, Ez edges (each shaped like the grid)."""

    ex: np.ndarray
    ey: np.ndarray
    ez: np.ndarray
    dx: float

    def as_tuple(self):
        return (self.ex, self.ey, self.ez)


def _area_fraction(c0, c1, radius, dx):
    """Fraction of each dx-square (centres c0 x c1) inside the disk, 4x4 samples."""
    sub = _SUB * dx
    a = c0[:, None, None, None] + sub[None, None, :, None]
    b = c1[None, :, None, None] + sub[None, None, None, :]
    inside = (a * a + b * b) <= radius * radius
    return inside.mean(axis=(2, 3))


def _area_fraction_banded(c0, c1, radius, dx):
    # exact 0/1 away from the rim; subsample only near it
    rho = np.hypot(c0[:, None], c1[None, :])
    frac = (rho <= radius).astype(float)
    band = np.abs(rho - radius) <= dx * math.sqrt(0.5) + 1e-12
    rows = np.nonzero(band.any(axis=1))[0]
    if rows.size:
        sub = _area_fraction(c0[rows], c1, radius, dx)
        frac[rows] = np.where(band[rows], sub, frac[rows])
    return frac


def _length_fraction(s, half, dx):
    pts = s[:, None] + _SUB[None, :] * dx
    return (np.abs(pts) <= half).mean(axis=1)


def rasterize(scene, domain=None):
    """Sample permittivity onto the staggered E edges with subpixel averaging.

    Cells wholly inside or outside a cylinder receive the exact value; cells
    cut by a surface receive the volume-fraction average estimated with
    4 x 4 x 4 subsamples (the axis-aligned cylinder makes this the product
    of a 4 x 4 area fraction and a 4-point length fraction).
    """
    domain = domain or scene.domain
    dx = domain.grid_step
    for p in scene.primitives:
        if p.radius < 2 * dx:
            raise ResolutionError(f"{p.name}: radius {p.radius} um is below two grid steps ({2 * dx} um)")
    shape = domain.shape
    nodes = [np.arange(n) * dx for n in shape]
    halves = [(np.arange(n) + 0.5) * dx for n in shape]
    eps_bg = scene.background.permittivity
    out = []
    for comp in range(3):
        coords = [halves[a] if a == comp else nodes[a] for a in range(3)]
        eps = np.full(shape, eps_bg, dtype=np.float64)
        for prim in scene.primitives:
            a = prim.axis_index
            t0, t1 = [i for i in range(3) if i != a]
            area = _area_fraction_banded(coords[t0] - prim.center[t0], coords[t1] - prim.center[t1],
                                         prim.radius, dx)
            length = _length_fraction(coords[a] - prim.center[a], 0.5 * prim.length, dx)
            frac = np.einsum("ij,k->ijk", area, length)
            # einsum order is (t0, t1, a); move back to (x, y, z)
            frac = np.moveaxis(frac, 2, a) if a != 2 else frac
            eps += frac * (scene.material_of(prim).permittivity - eps_bg)
        out.append(eps.astype(np.float32))
    return PermittivityGrid(*out, dx=dx)
