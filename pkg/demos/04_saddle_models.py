# Saddle jets: the coefficients d, C and the corrected models xi.
import numpy as np

from ietlab import numeric as nm
from ietlab.iet_core import Perm, random_iet
from ietlab.renorm import accelerate
from ietlab.oseledets import estimate_flags
from ietlab.correction import Corrector
from ietlab.spectral import Basis, measure_exponent
from ietlab.saddle import SaddleClass, SaddleJet, TD, eval_C, eval_d, frak_B, k_r, xi_models

print(frak_B(0.5, 0.5), frak_B(0.25, 0.75))
print([[k_r(m, r) for r in (0.2, 0.5, 1.5)] for m in (2, 3, 4)])

# jet of a real density V(x, y) near a saddle of multiplicity 3
def V(x, y):
    return 1 + x ** 2 + y ** 2 + 0.5 * x * y ** 3


jet = SaddleJet.from_callback(V, 3, 6)
for k, j in TD(3, 6):
    print("d", k, j, np.round(eval_d(jet, k, j), 6))
for k in (2, 4):
    print("C", k, [complex(np.round(eval_C(jet, k, l), 6)) for l in range(3)])

nm.set_precision(540)
run = accelerate(random_iet(Perm.symmetric(4), np.random.default_rng(5), bits=1600), k_max=290)
filt = estimate_flags(run, L=80, window=200)
le = filt.local_exponents(10, 40)
B = Basis(Corrector(run, filt, L=60, exponents=le[:2]), 2)

classes = [SaddleClass("s1", 2, 1, (0,), 0, "+"), SaddleClass("s2", 4, 5, (1,), 2, "-")]
for m in xi_models(B, classes):
    fit = measure_exponent(run, m.xi, "sup", (10, 40))
    print(m.cls.sigma, "order", m.exponent, "rate", round(fit.rate, 3), "target", round(-le[0] * float(m.exponent), 3))
