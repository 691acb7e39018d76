"""Physical constants in the micrometre / femtosecond unit system."""

import math

C_UM_PER_FS = 0.299792458
ETA0 = 376.730313668  # vacuum impedance, ohm
DEFAULT_WAVELENGTH = 0.620  # um


def omega_of(wavelength):
    """Angular frequency (rad/fs) for a vacuum wavelength in um."""
    return 2.0 * math.pi * C_UM_PER_FS / wavelength
