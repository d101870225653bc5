"""Physical constants used throughout the package.

Values follow the 2019 SI redefinition (CODATA 2018): k_B and h are exact
by definition, hbar = h / (2 pi) is quoted at full double precision.
All quantities SI.
"""

# Planck constant [J s], exact
PLANCK = 6.62607015e-34

# Reduced Planck constant [J s], h / (2 pi)
HBAR = 1.054571817e-34

# Boltzmann constant [J / K], exact
KBOLTZ = 1.380649e-23
