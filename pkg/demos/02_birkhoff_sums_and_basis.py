# Special Birkhoff sums, the Oseledets flag and the spectral basis.
import numpy as np

from ietlab import numeric as nm
from ietlab.iet_core import Perm, random_iet
from ietlab.renorm import accelerate
from ietlab.oseledets import estimate_flags
from ietlab.correction import Corrector
from ietlab.pfun import PFun
from ietlab.spectral import Basis, d_functionals, measure_exponent

nm.set_precision(540)
run = accelerate(random_iet(Perm.symmetric(4), np.random.default_rng(5), bits=1600), k_max=290)
filt = estimate_flags(run, L=80, window=200)
le = filt.local_exponents(10, 40)
print("local exponents", np.round(le, 4))

cor = Corrector(run, filt, L=60, exponents=le[:2])
B = Basis(cor, 2)

# every basis element decays (or grows) at its predicted rate
for tag in B.tags():
    l, kind, i = tag
    target = {"+": le[i - 1], "0": 0.0, "-": -le[i - 1]}[kind] - l * le[0]
    fit = measure_exponent(run, B.pfun(tag), "sup", (10, 40))
    print(tag, round(fit.rate, 3), round(target, 3))

# invariant distributions vanish on a coboundary
dom = cor.dom0
phi = PFun.coboundary_of_poly(dom, [0, 0.7, -1.2, 0.5]) + PFun.coboundary_of_power(dom, 0.8, 0.3)
rep = d_functionals(B, phi, a=0.2, n=1)
for row in rep.triples:
    print(row["tag"], "order %.3f" % row["order"], "value %.2e" % row["value"])
