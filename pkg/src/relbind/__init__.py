"""relbind: a numerical laboratory for enhanced binding of relativistic
particles coupled to a massless scalar field.

Modules: model (types, profiles, grids), kinetic (multiplier operators),
effpot (pair potentials), spectral (eigensolvers, thresholds), stability
(margins, coupling scans), fiber (total-momentum decomposition), levy
(path sampling, Feynman-Kac), fock (truncated-space certificates),
config/reporting/cli (driver plumbing), acceptance (the check suite).
"""

__version__ = "0.1.0"
