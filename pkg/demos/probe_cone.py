"""Gradient ascent on |Lambda| / prod ||F_j||_4 for the cone symbol at two resolutions."""

from entangled.grid import Grid1D
from entangled.probe import AscentConfig, EnsembleSpec, probe_norm
from entangled.symbols import builtin_symbol

for n in (32, 64):
    grid = Grid1D(16.0, n)
    est = probe_norm(builtin_symbol("cone-eta", grid), EnsembleSpec(count=4, seed=0, grid=grid),
                     AscentConfig(max_iter=30))
    s = est.stats["ascended"]
    print(f"N = {n}: best ratio {est.best:.4f} (start {est.stats['start']['max']:.4f}, "
          f"median after ascent {s['quantiles']['q50']:.4f})")
