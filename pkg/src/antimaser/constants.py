"""Physical constants (SI, exact since the 2019 redefinition)."""

K_B = 1.380649e-23  # J/K
H = 6.62607015e-34  # J s
