"""Geometry of spacelike 2-spheres in 4-dimensional spacetimes.

Spectral discretization of embedded spheres, their normal connection,
time-flat normal frames and the variation of the Hawking mass along
uniformly area expanding flows.
"""

__version__ = "0.1.0"
