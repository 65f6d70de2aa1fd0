"""
Transforms at inverse local times
=================================

Observed each time the lower local time reaches a new level, the free
process is a Markov additive process.  Its exponent F^L and the busy
period transform, for a single Brownian state and for a modulated model.
"""
import numpy as np

import reflected_mmbm as rm

np.set_printoptions(precision=5, suppress=True)

mu, B, q = 0.8, 1.0, 0.0
scalar = rm.MmbmModel([[0.0]], [mu], [1.0])
lo, hi = rm.admissible_interval(scalar, q)
print(f"admissible interval ({lo:.3f}, {hi:.3f})")

print("\n alpha    F^L (matrix)   F^L (closed form)")
for a in np.linspace(lo, hi, 7)[1:-1]:
    t = rm.localtime_transform(scalar, B, 0.0, q, a)
    print(f"{a:6.3f}  {t.FL[0, 0]:14.10f} {rm.brownian_exponent(mu, B, q, a):14.10f}")

# overflow batches between visits to 0 form a compound Poisson process in
# the local time scale
rate, size = rm.brownian_overflow_process(mu, B)
print(f"\noverflow batches arrive at rate {rate:.4f} and have mean size {1 / size:.4f}")

# a modulated model: Perron eigenvalues stay negative over the whole interval
model = rm.random_model(4, 3)
q = 0.5
lo, hi = rm.admissible_interval(model, q)
print("\n alpha    kL        kU")
for a in np.linspace(lo, hi, 8)[1:-1]:
    t = rm.localtime_transform(model, B, 0.3, q, a)
    print(f"{a:6.3f}  {t.kL:8.4f}  {t.kU:8.4f}")

# busy period from a full buffer: overflow collected before it first empties
print("\nE_B[exp(alpha U) ; J] at alpha = -0.5\n", rm.busy_period_transform(model, B, q, -0.5))
