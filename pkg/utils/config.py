import math

import scipy.constants as const

# Physical constants (SI)
HBAR = const.hbar
AMU = const.atomic_mass
COULOMB_CONSTANT = 1.0 / (4.0 * math.pi * const.epsilon_0)
ELEMENTARY_CHARGE = const.e

# Species masses in atomic mass units
SPECIES_MASS_AMU = {
    "171Yb+": 170.936323,
    "174Yb+": 173.938859,
    "40Ca+": 39.962591,
    "9Be+": 9.012183,
}
DEFAULT_SPECIES = "171Yb+"

# Doppler cooling linewidth of the Yb+ S-P transition
GAMMA_DOPPLER = 2.0 * math.pi * 19.6e6

# Beam regime limits
LAMBDA0_HARD_LIMIT = 0.5  # |λ⁽⁰⁾| must stay inside the Rayleigh range
LAMBDA0_WARN_LIMIT = 0.1

# Series expansion
SERIES_RTOL = 1e-12
SERIES_ITERATION_CAP = 1_000_000

# Θ_n summation
THETA_RTOL = 1e-9
THETA_M_CAP = 2000
THETA_BASE_DPS = 30
DIRECT_HYP2F1_MAX_N = 1000  # direct terminating sums lose all digits above this

# Thermal state
THERMAL_TAIL_TOLERANCE = 1e-6
TRUNCATION_TAIL_TOLERANCE = 1e-3

# Truncation engine
TRUNCATION_THRESHOLD = 1e-2
TRUNCATION_N_IONS_MAX = 50
TRUNCATION_CAPS = {"p": 4, "q": 8}

# Rabi optimization
RABI_BRACKET = (0.5 * math.pi / 2.0, 3.0 * math.pi / 2.0)
RABI_XTOL = 1e-8
RABI_BRACKET_SAMPLES = 160

# Heating fit
FIT_XATOL = 1e-6
FIT_MAX_ITERATIONS = 10_000
FIT_SIGMA_FLOOR = 0.01
FIT_TABLE_NODES = 257
FIT_MAX_NBAR = 1e4

# Oracle
ORACLE_MAX_DIMENSION = 4096

# Debye-Waller cutoff-doubling convergence check
DEBYE_WALLER_RTOL = 1e-6

# Scenario files
SCENARIO_VERSION = "1"
SCENARIO_FOLDER = "scenarios"

# Output
BUILD_ID_LENGTH = 12
