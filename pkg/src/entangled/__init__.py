"""Numerical toolkit for entangled multilinear singular integral forms on a torus."""

from .grid import (
    Grid1D,
    SampledField2D,
    ScaleQuadrature,
    ResolutionWarning,
    forward_ft_2d,
    inverse_ft_2d,
    dilate_l1,
    scale_integral,
    lp_norm,
    read_field,
    write_field,
)

__version__ = "0.1.0"
