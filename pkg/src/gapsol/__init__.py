"""Gap solitons in a 1D optical lattice and their quantum noise.

Library layout:
    grid          periodic grid, complex fields, spectral primitives
    bloch         linear band structure and band-edge data
    stationary    Newton solitons, families, bound pairs
    dynamics      split-step mean-field propagation
    quantum       linearized fluctuations, back-propagation, squeezing
    correlations  slot correlation matrices and pair entanglement
    cli           command-line front end with figure presets
    kernels       compiled/pure-python stepping backends
"""

__version__ = "0.1.0"
