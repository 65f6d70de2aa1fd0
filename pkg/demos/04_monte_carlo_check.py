"""
Simulated paths against the exact law
=====================================

The simulator reflects sampled paths in [0, B] and keeps the local times.
Here it is compared with the stationary law and the law at an exponential
time.
"""
import numpy as np

import reflected_mmbm as rm
from reflected_mmbm.simulate import SimConfig, estimate_epoch, estimate_stationary, simulate_path

np.set_printoptions(precision=4, suppress=True)

model = rm.MmbmModel(
    Q=[[-1.0, 1.0], [2.0, -2.0]],
    mu=[1.0, -1.5],
    sigma2=[0.5, 1.0],
)
B = 0.5
strip = rm.StripSpec(B)

path = simulate_path(model, strip, 0, SimConfig(horizon=5.0, seed=7))
gap = np.abs(path.W - (path.x0 + path.X + path.L - path.U)).max()
print(f"{path.t.size} samples, W in [{path.W.min():.3g}, {path.W.max():.3g}], identity gap {gap:.1e}")
print(f"L(5) = {path.L[-1]:.4f}, U(5) = {path.U[-1]:.4f}")

levels = np.array([0.1, 0.25, 0.4])
exact = rm.stationary_law(model, B, levels).cdf
est = estimate_stationary(model, strip, SimConfig(horizon=2000.0, seed=8), levels)
print("\nP(W <= x | J): exact, simulated, z")
for k, x in enumerate(levels):
    print(f"x = {x}:", exact[k], est.cdf[k], (est.cdf[k] - exact[k]) / est.se[k])

q = 2.0
law = rm.exp_epoch_law(model, B, q, "bottom", 0.25)
samp = estimate_epoch(model, strip, q, SimConfig(replications=20000, seed=9))
p, se = samp.joint_survival(0.25, model.n)
print("\nP_i(W(e_q) >= 0.25, J(e_q) = j)\nexact\n", law, "\nsimulated\n", p, "\nstandard errors\n", se)
