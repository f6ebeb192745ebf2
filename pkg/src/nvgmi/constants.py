"""Physical constants (SI) shared across the models."""

from scipy import constants as _c

MU_0 = _c.mu_0
PLANCK = _c.h
BOHR_MAGNETON = _c.physical_constants["Bohr magneton"][0]
BOLTZMANN = _c.k

# NV electron gyromagnetic ratio, Hz/T (cyclic, not angular)
GYRO_E = 2.8e10
G_FACTOR = 2.0

ZERO_FIELD_SPLITTING = 2.870e9
HYPERFINE_15N = 3.0e6

# linear-Zeeman validity bound used throughout, T
LINEAR_ZEEMAN_LIMIT = 10e-3
