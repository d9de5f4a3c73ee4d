"""Replay the positivity argument on one random quadruple and print the ledger."""

from entangled.grid import Grid1D
from entangled.probe import EnsembleSpec, random_quadruple
from entangled.telescope import ProofReplay, uniformity_certificate

grid = Grid1D(16.0, 32)
q = random_quadruple(EnsembleSpec(grid=grid, seed=3), 0)
replay = ProofReplay(q)
for u, v in ((0.0, 0.0), (1.0, 5.0)):
    rep = replay.run(u, v)
    m = rep.meta
    print(f"(u, v) = ({u:g}, {v:g}): Lambda-tilde = {m['normalised_value']:.4e}, "
          f"bound = {m['normalised_bound']:.4e}, constant = {m['normalised_constant']:.4e}, "
          f"smallest slack = {m['min_slack']:.1e}")
print()
for e in replay.run(0.0, 0.0).ledger:
    print(f"  {e['step']:15s} {e['label'][:70]:70s} slack {e['slack'] if e['slack'] is None else format(e['slack'], '.2e')}")
cert = uniformity_certificate(replay)
print(f"\nsup_u C_u C_-u = {cert['sup']:.1f} at u = {cert['argsup']:g}")
