"""
Passage matrices and the stationary buffer content
==================================================

A three-state source feeds a buffer of size B.  We look at the level-crossing
chains of the free process and then at the long-run content of the buffer.
"""
import numpy as np

import reflected_mmbm as rm

np.set_printoptions(precision=4, suppress=True)

# states: a bursty source, a draining state and a noisy idle state
model = rm.MmbmModel(
    Q=[[-1.0, 0.6, 0.4], [0.5, -1.2, 0.7], [0.3, 0.9, -1.2]],
    mu=[1.0, -1.5, 0.3],
    sigma2=[0.5, 1.0, 2.0],
    labels=("burst", "drain", "idle"),
)
print(model)
print("stationary phase law", model.pi, " drift", round(model.kappa, 4))

# the drift is negative, so downward passage is certain and upward is not
up, down = rm.passage_pairs(model)
print("\nLambda+ (upward level chain)\n", up.Lambda)
print("Lambda- (downward level chain)\n", down.Lambda)
print("Perron eigenvalues", up.rho, down.rho)

# probability of ever climbing x above the start, split by the phase at crossing
for x in (0.5, 1.0, 2.0):
    P = rm.crossing_probability(up, x)
    print(f"x = {x}:  P(climb) per start state = {P.sum(axis=1)}")

# stationary law in a buffer of size 2
B = 2.0
law = rm.stationary_law(model, B, 9)
print("\nP(W >= x | J)")
for x, row in zip(law.grid, law.survival):
    print(f"  {x:4.2f}  {row}")
print("atoms at 0:", law.mass0, " atoms at B:", law.massB)

# a single Brownian state has the truncated exponential law
scalar = rm.MmbmModel([[0.0]], [-1.0], [1.0])
xs = np.linspace(0, 1, 5)
exact = (np.exp(-2 * xs) - np.exp(-2)) / (1 - np.exp(-2))
print("\nscalar check, max error:", np.abs(rm.stationary_law(scalar, 1.0, xs).survival[:, 0] - exact).max())
