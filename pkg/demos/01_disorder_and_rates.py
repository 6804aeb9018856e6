"""Sample a disorder realization and inspect its thermally weighted rates.

Prints the impurity geometry, a few site energies, and the hop/exchange
rates together with the detailed-balance ratios that make the product
Fermi-Dirac measure stationary.
"""

import math

from mottlind import ModelParams, sample_disorder
from mottlind.jumps import rate_hop, rate_in, rate_out

params = ModelParams(
    beta=2.0,
    mu=0.1,
    gamma0=1.0,
    gamma_star=0.5,
    r_loc=1.0,
    delta=(-1.0, 1.0),
    dim=2,
    box=(6, 6),
    impurity_density=0.3,
)
omega = sample_disorder(params, seed=42)
energies = omega.energy_map()
sites = list(energies)

print("disorder realization (seed 42)")
print(f"  box {params.box}, density {params.impurity_density}")
print(f"  {len(sites)} impurity sites drawn")
print()

print("first five sites and their energies:")
for site in sites[:5]:
    print(f"  x = {site}  epsilon = {energies[site]:+.4f}")
print()

print("hop rates and detailed balance (three nearby pairs):")
beta = params.beta
shown = 0
for i, x in enumerate(sites):
    for y in sites[i + 1 :]:
        if math.dist(x, y) > 3.0:
            continue
        fwd = rate_hop(omega, x, y)
        bwd = rate_hop(omega, y, x)
        gap = energies[y] - energies[x]
        print(
            f"  {x} -> {y}: r = {math.dist(x, y):.3f}, dE = {gap:+.4f}, "
            f"rate = {fwd:.3e}, reverse = {bwd:.3e}"
        )
        print(
            f"    forward/backward = {fwd / bwd:.12f}, "
            f"exp(-beta dE) = {math.exp(-beta * gap):.12f}"
        )
        shown += 1
        if shown == 3:
            break
    if shown == 3:
        break
print()

print("reservoir exchange at the first site:")
x = sites[0]
xi = energies[x] - params.mu
fd = 1.0 / (1.0 + math.exp(beta * xi))
r_in, r_out = rate_in(omega, x), rate_out(omega, x)
print(f"  rate in  = {r_in:.6f}")
print(f"  rate out = {r_out:.6f}")
print(
    f"  in/(in+out) = {r_in / (r_in + r_out):.12f}"
    f"  (Fermi-Dirac occupation = {fd:.12f})"
)
print()
print(
    "every ratio above matches its Boltzmann/Fermi factor exactly: the"
    " rates are built in log space so detailed balance holds to machine"
    " precision."
)
