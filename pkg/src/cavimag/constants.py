"""Physical constants and defaults (SI)."""

import math

MU0 = 4e-7 * math.pi  # T·m/A
HBAR = 1.05457182e-34  # J·s
GAMMA_LL = 1.7595e11  # rad/(s·T)

# Demag is a direct O(N^2) dipole sum; above this many cells it is refused.
DEMAG_CELL_LIMIT = 4096

# kappa*t beyond which the un-rescaled memory sums exp(kappa*t)*S would overflow
KAPPA_T_OVERFLOW = 700.0
