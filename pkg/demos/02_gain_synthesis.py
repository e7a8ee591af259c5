"""
Consensus and observer gains
============================

Solve the Riccati equation for the consensus gain K, check the
certificate, and design the observer pair (K_o, F).
"""

import numpy as np

from leadfollow.gainsynth import check_detectable, check_stabilizable, riccati_residual, synthesize
from leadfollow.scenario import demo_model

model = demo_model()
print("open-loop eigenvalues:", np.round(np.linalg.eigvals(model.a), 4))
print("stabilizable:", check_stabilizable(model), " detectable:", check_detectable(model))

# %%
# delta_bar is a lower bound on the real parts of the averaged structure
# matrices' eigenvalues; smaller values give a more conservative, larger K.
gains = synthesize(model, delta_bar=0.005, margin=0.1, observer=True)
print("K =\n", np.round(gains.k, 4))
print("K_o =\n", np.round(gains.k_o, 4))
print("F =\n", np.round(gains.f, 4))

# %%
# The certificate: P A + A^T P - 2 delta P B B^T P + I is negative definite,
# here with every eigenvalue at exactly -margin.
res = riccati_residual(gains.p, model.a, model.b, gains.delta_bar)
print("residual eigenvalues:", np.round(np.linalg.eigvalsh(res), 10))

# %%
# Any shifted closed loop A - lam B K with Re(lam) >= delta_bar is stable.
rng = np.random.default_rng(0)
lams = gains.delta_bar + rng.exponential(1.0, 5) + 1j * rng.normal(0, 2, 5)
for lam in lams:
    ab = np.linalg.eigvals(model.a - lam * model.b @ gains.k).real.max()
    print(f"lam = {lam:.3f}: abscissa {ab:.4f}")
