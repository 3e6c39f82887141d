"""dimergas: exact computation and sampling for off-critical square-grid
dimer models -- flipped/drifted weight families, their measure equivalence,
scaling-window Green's functions and correlations, amoeba geometry, and
Wilson-algorithm spanning-tree sampling."""

__version__ = "0.1.0"
