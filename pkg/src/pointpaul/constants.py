"""Physical constants (CODATA 2018) and ion presets, all SI."""

ELEMENTARY_CHARGE = 1.602176634e-19  # C, exact
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg
ELECTRON_MASS = 9.1093837015e-31  # kg
VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m
ELECTRON_VOLT = 1.602176634e-19  # J, exact

# name -> (mass in u of the ion, charge in units of e)
# 88Sr+ mass: neutral atomic mass minus one electron
SPECIES_PRESETS = {
    "88Sr+": (87.9056122571 - ELECTRON_MASS / ATOMIC_MASS_UNIT, 1),
    "40Ca+": (39.962590863 - ELECTRON_MASS / ATOMIC_MASS_UNIT, 1),
    "171Yb+": (170.9363315 - ELECTRON_MASS / ATOMIC_MASS_UNIT, 1),
}
