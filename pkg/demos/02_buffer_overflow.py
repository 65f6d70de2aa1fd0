"""
How much is lost at the top of the buffer
=========================================

Long-run overflow and unused capacity per phase, as a function of the buffer
size, checked three ways: the linear system, a small killing rate limit and
simulation.
"""
import numpy as np

import reflected_mmbm as rm
from reflected_mmbm.simulate import SimConfig, estimate_overflow

np.set_printoptions(precision=5, suppress=True)

model = rm.MmbmModel(
    Q=[[-2.0, 2.0], [1.0, -1.0]],
    mu=[1.5, -0.5],
    sigma2=[0.3, 0.8],
    labels=("on", "off"),
)
print("drift", model.kappa)

print("\n   B     overflow    unused    overflow - unused")
for B in (0.25, 0.5, 1.0, 2.0, 4.0):
    r = rm.overflow_rates(model, B)
    print(f"{B:5.2f}  {r.kappaU:10.6f} {r.kappaL:10.6f}   {r.kappaU - r.kappaL:.6f}")
# the last column is the drift for every B: whatever is not lost is pushed back at 0

B = 1.0
r = rm.overflow_rates(model, B)
L, U = rm.overflow_rates_limit(model, B, q=1e-6)
print("\nper phase overflow  ", r.overflow)
print("from -q M^U(0) rows\n", U)

# simulation: U(t)/t split by the active phase
est = estimate_overflow(model, rm.StripSpec(B), SimConfig(dt=1e-2, horizon=2e4, seed=1))
print("\nsimulated overflow  ", est.overflow, "+-", est.overflow_se)
print("simulated unused    ", est.unused, "+-", est.unused_se)
print("exact unused        ", r.unused)
