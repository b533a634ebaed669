"""How many gossip rounds buy a given averaging accuracy.

Builds a Metropolis matrix on a random graph, asks the calculators for an
iteration count, then checks the count against an actual gossip run.
"""

import numpy as np

from gossipdda.averaging import gossip, gossip_iterations_for_accuracy, kstar_theorem2, run_averaging
from gossipdda.topology import make_graph, metropolis_weights, spectral_info

n = 32
P = metropolis_weights(make_graph("erdos_renyi", n, seed=3, p=0.5))
info = spectral_info(P)
print(f"n={n}  lambda2={info.lambda2:.4f}  lambda_min={info.lambda_min:.4f}  rho={info.rho:.4f}")

Y = np.random.default_rng(0).normal(size=(n, 5))
spread = float(np.max(np.linalg.norm(Y - Y.mean(axis=0), axis=1)))
for delta in (1e-2, 1e-4, 1e-8):
    k = gossip_iterations_for_accuracy(delta, n, spread, info.rho_gap)
    got = run_averaging(gossip(P, k), Y).accuracy_achieved
    print(f"target {delta:.0e}: k={k:3d}  achieved {got:.2e}")

# iteration count that keeps gossip error below 1/(b+mu) every round
for b in (64, 512, 4096):
    print(f"b={b:5d}: k*={kstar_theorem2(1.0, b, n, 1, info.rho_gap)}")
