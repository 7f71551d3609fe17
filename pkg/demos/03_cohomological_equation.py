# Solving v o T - v = phi.
import numpy as np

from ietlab import numeric as nm
from ietlab.iet_core import Perm, random_iet
from ietlab.renorm import accelerate
from ietlab.pfun import Domain, PFun
from ietlab.cohom import DecayError, holder_exponent, osc_check, solve, time_decompose

nm.set_precision(200)
iet = random_iet(Perm.symmetric(4), np.random.default_rng(5), bits=400)
run = accelerate(iet, k_max=60)
dom = Domain.of_iet(iet)
xs = np.linspace(0, float(dom.total), 2001)[:-1]

# an orbit segment splits into special Birkhoff sums over the towers
od = time_decompose(run, 0.123456, 1000)
print(od.top, od.N_plus, od.N_minus, od.counts_ok())

# cubic plus a 0.8-Holder perturbation
cubic = [0, 0.7, -1.2, 0.5]
phi = PFun.coboundary_of_poly(dom, cubic) + PFun.coboundary_of_power(dom, 0.8, 0.3)
sol = solve(run, phi)
v = np.polynomial.polynomial.polyval(xs, cubic) + 0.3 * xs ** 0.8
print("sup error", np.max(np.abs(sol(xs) - v)))
print("orbit residual", sol.residual)
print("Holder fit", holder_exponent(sol).to_json())
for k, osc, bound in osc_check(run, sol, phi, [1, 2, 3]):
    print(k, osc, bound)

# a function with nonzero mean is not a coboundary
try:
    solve(run, PFun.from_global_poly(dom, [0, 1]))
except DecayError as e:
    print("rejected:", e)
