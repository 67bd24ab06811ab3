"""Model, optimize and simulate circular surface-electrode point Paul traps."""

__version__ = "0.1.0"

from .errors import EscapeError, NoTrapError, NumericalFailure, TrapError  # noqa: E402
from .fieldcore import (  # noqa: E402
    SR88, AnnularElectrode, FieldMap, IonSpecies, RfDrive, RingGeometry, TrapConfig,
    annular_coefficient, electrode_stack, field_map, kappa_axial, kappa_gradient,
    kappa_numeric, pseudopotential,
)
from .characterize import (  # noqa: E402
    TrapCharacteristics, characterize, epsilon_sweep, four_rod_references,
    geometric_factor, mathieu_q, secular_frequencies, trap_depth, trap_height,
    turning_point,
)
from .optimize import height_constrained_b, optimize_depth_at_height  # noqa: E402
