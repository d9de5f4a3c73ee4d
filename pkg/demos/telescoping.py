"""Telescoping identity for two Gaussian pairs: gap shrinks as the scale rule is refined."""

import numpy as np

from entangled.forms import QuadInput
from entangled.grid import Grid1D, ScaleQuadrature
from entangled.telescope import certify_pair, derived_window, gaussian_window, telescoping_identity_check

grid = Grid1D(16.0, 32)
rng = np.random.default_rng(2)
q = QuadInput.from_arrays(grid, *[rng.standard_normal((32, 32)) for _ in range(4)])
p1 = certify_pair(gaussian_window(1.0), derived_window(1.0), grid)
p2 = certify_pair(gaussian_window(1.5), derived_window(1.5), grid)
print(f"pair residuals: {p1.residual:.1e}, {p2.residual:.1e}")
for M in (64, 128, 256, 512, 1024):
    r = telescoping_identity_check(q, p1, p2, ScaleQuadrature.for_grid(grid, M=M))
    print(f"M = {M:4d}  left = {r['left']:+.10f}  right = {r['right']:+.10f}  relative gap = {r['relative_gap']:.2e}")
