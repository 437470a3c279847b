"""Physical constants (CODATA, via scipy.constants). SI units everywhere."""

from scipy import constants as _c

C_LIGHT = _c.c
HBAR = _c.hbar
EPS0 = _c.epsilon_0
E_CHARGE = _c.e

# convenience unit factors
EV = _c.e
MEV = 1e-3 * _c.e
ANGSTROM = 1e-10
PICOSECOND = 1e-12
MICROMETRE = 1e-6
