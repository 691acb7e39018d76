import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from tipcouple.configs import DIAMOND, SILICA  # noqa: E402
from tipcouple.scene import (CylinderPrimitive, Domain, MonitorSpec, PairConfig,  # noqa: E402
                             RunSpec, Scene, SourceSpec)


def small_tip_scene(radius=0.3, material=DIAMOND, dx=0.025, extents=(1.5, 1.5, 2.0),
                    orientation="radial", partner=None, gap=None, **run):
    """Compact single-tip (or coaxial tip pair) scene for fast runs.

    The dipole sits on the axis 10 nm below the facet of a tip running
    along +z; the flux plane is 1 um above the dipole.
    """
    lx, ly, lz = extents
    x0, y0 = 0.5 * lx, 0.5 * ly
    z_src = 0.6
    facet = z_src + 0.010
    length = 10.0
    prims = [CylinderPrimitive("collector", "+z", (x0, y0, facet + 0.5 * length), radius, length,
                               material.name)]
    mats = {material.name: material}
    pair = None
    if partner is not None:
        top = facet - gap
        prims.append(CylinderPrimitive("partner", "-z", (x0, y0, top - 0.5 * length), radius,
                                       length, partner.name))
        mats[partner.name] = partner
        pair = PairConfig("collector", "partner", gap)
    return Scene(Domain(extents, dx, 10), mats, tuple(prims),
                 SourceSpec((x0, y0, z_src), orientation), pair,
                 MonitorSpec(plane_z=z_src + 1.0), RunSpec(**run))


@pytest.fixture
def tip_scene():
    return small_tip_scene


@pytest.fixture
def silica():
    return SILICA


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
