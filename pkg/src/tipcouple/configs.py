"""Resolution presets and built-in scenes for every experiment case.

Geometry convention: the collecting tip runs along +z with its facet facing
down; the emitter sits 10 nm below the facet on the axis.  A partner tip is
coaxial below the gap, facet up; a partner wire runs along y through the
whole domain.  ``radial``/``azimuthal``/``axial`` dipoles point along x/y/z.
"""

from dataclasses import dataclass

from tipcouple.scene import (CylinderPrimitive, Domain, Material, MonitorSpec, PairConfig,
                             RunSpec, Scene, SourceSpec, DIPOLE_CLEARANCE)

SILICA = Material("silica", 1.457)
DIAMOND = Material("diamond", 2.410)
TIP_LENGTH = 25.0  # um
P1, P2, P3 = 0.20, 0.43, 0.71  # silica tip radii at the efficiency peaks


@dataclass(frozen=True)
class Preset:
    name: str
    grid_step: float
    extents: tuple
    monitor_distance: float
    pml_cells: int = 10


PRESETS = {
    "coarse": Preset("coarse", 0.025, (3.0, 3.0, 8.0), 5.0),
    "medium": Preset("medium", 0.015, (3.0, 3.0, 8.0), 5.0),
    "fine": Preset("fine", 0.010, (3.0, 3.0, 8.0), 5.0),
    "full": Preset("full", 0.025, (6.0, 6.0, 25.0), 15.0),
}

# case -> (collector material, partner material or None, partner kind)
CASES = {
    "snt_alone": ("silica", None, None),
    "case1": ("silica", "silica", "tip"),
    "case2": ("silica", "silica", "wire"),
    "case3": ("silica", "diamond", "tip"),
    "case4": ("silica", "diamond", "wire"),
    "case5": ("diamond", None, None),
    "dnt_radius": ("diamond", None, None),
    "case6": ("diamond", "diamond", "tip"),
    "case7": ("diamond", "diamond", "wire"),
}

# space kept between the flux plane and the top PML
_TOP_MARGIN = 0.25


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def build_scene(case, a, b=None, d=None, orientation="radial", preset="coarse", **run):
    """Scene for one parameter point of an experiment case.

    ``a`` is the collector radius, ``b`` the partner radius (defaults to
    ``a``), ``d`` the surface-to-surface gap in um.
    """
    if case not in CASES:
        raise KeyError(f"unknown case {case!r}")
    p = get_preset(preset)
    core, partner, kind = CASES[case]
    mats = {"silica": SILICA, "diamond": DIAMOND}
    lx, ly, lz = p.extents
    pml = p.pml_cells * p.grid_step
    x0, y0 = 0.5 * lx, 0.5 * ly
    z_src = lz - pml - _TOP_MARGIN - p.monitor_distance
    facet = z_src + DIPOLE_CLEARANCE
    prims = [CylinderPrimitive("collector", "+z", (x0, y0, facet + 0.5 * TIP_LENGTH), a,
                               TIP_LENGTH, core)]
    pair = None
    if partner is not None:
        if d is None:
            raise ValueError(f"{case} needs a gap d")
        b = a if b is None else b
        top = facet - d
        if kind == "tip":
            prims.append(CylinderPrimitive("partner", "-z", (x0, y0, top - 0.5 * TIP_LENGTH), b,
                                           TIP_LENGTH, partner))
        else:
            prims.append(CylinderPrimitive("partner", "+y", (x0, y0, top - b), b, ly + 2.0, partner))
        pair = PairConfig("collector", "partner", d)
    used = {core} | ({partner} if partner else set())
    return Scene(
        domain=Domain(p.extents, p.grid_step, p.pml_cells),
        materials={m: mats[m] for m in sorted(used)},
        primitives=tuple(prims),
        source=SourceSpec((x0, y0, z_src), orientation),
        pair=pair,
        monitors=MonitorSpec(plane_z=z_src + p.monitor_distance),
        run=RunSpec(preset=preset, **run),
    )


def vacuum_scene(preset="coarse", orientation="radial", extents=None, **run):
    p = get_preset(preset)
    ext = extents or p.extents
    pml = p.pml_cells * p.grid_step
    x0, y0, z_src = (0.5 * e for e in ext)
    return Scene(
        domain=Domain(tuple(ext), p.grid_step, p.pml_cells),
        materials={},
        primitives=(),
        source=SourceSpec((x0, y0, z_src), orientation),
        monitors=MonitorSpec(plane_z=ext[2] - pml - _TOP_MARGIN),
        run=RunSpec(preset=preset, mode_decomposition=False, **run),
    )


# summary configurations: collector radius, partner radius and the reference best gap.
NAMED = {
    "snt_alone_p1": dict(case="snt_alone", a=P1),
    "snt_alone_p2": dict(case="snt_alone", a=P2),
    "snt_alone_p3": dict(case="snt_alone", a=P3),
    "case1": dict(case="case1", a=P2, d=0.22),
    "case2": dict(case="case2", a=P2, d=0.17),
    "case3": dict(case="case3", a=P2, d=0.19),
    "case4": dict(case="case4", a=P2, d=0.23),
    "case5": dict(case="case5", a=0.40),
    "case6": dict(case="case6", a=0.40, b=0.40, d=0.20),
    "case7": dict(case="case7", a=0.40, b=0.40, d=0.35),
    "vacuum": None,
}


def named_scene(name, preset="coarse", orientation="radial"):
    if name not in NAMED:
        raise KeyError(f"unknown built-in config {name!r}; choose from {sorted(NAMED)}")
    if name == "vacuum":
        return vacuum_scene(preset, orientation)
    return build_scene(preset=preset, orientation=orientation, **NAMED[name])
