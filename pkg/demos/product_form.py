"""The constant symbol turns the entangled form into the pointwise product sum."""

import numpy as np

from entangled.forms import QuadInput, entangled_spectrum, pair_with_symbol, product_form
from entangled.grid import Grid1D
from entangled.symbols import builtin_symbol

grid = Grid1D(16.0, 32)
rng = np.random.default_rng(1)
q = QuadInput.from_arrays(grid, *[rng.standard_normal((32, 32)) for _ in range(4)])
B = entangled_spectrum(q)
for name in ("one", "riesz-ratio", "cone-eta"):
    print(f"{name:12s} Lambda = {pair_with_symbol(B, builtin_symbol(name, grid)):+.12f}")
print(f"{'product':12s} sum   = {product_form(q):+.12f}")
