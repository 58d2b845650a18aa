"""
Emulating a NISQ backend: depolarizing gates, shots, readout flips
==================================================================

The noise model wraps the exact simulator with three stochastic layers:
a depolarizing channel after every gate (realized as trajectory
sampling of random Paulis), a finite shot budget for each expectation,
and a readout bit-flip probability. Expectations become noisy but
unbiased-ish estimates, and the adjoint gradient engine refuses to run:
there is no clean statevector to sweep backwards.
"""

import numpy as np

from qdrl.ansatz import build_layout, evaluate, init_params
from qdrl.gradients import GradientMethodError, grad_adjoint, grad_parameter_shift
from qdrl.noise import DEFAULT_NISQ, NoiseConfig, noisy_evaluate

layout = build_layout(
    n_qubits=3, n_inputs=2, n_layers=2, entangle="ring",
    observables=(("z", 0), ("x", 0)),
)
params = init_params(layout, seed=3)
x = np.array([0.4, -0.2])

exact = evaluate(layout, params, x)
print("exact expectations:          ", np.round(exact, 6))

# ------------------------------------------------------------
# the default NISQ profile
# ------------------------------------------------------------
# depolarizing_prob 0.001 per gate, 1024 shots, 1% readout flips;
# the salt picks the random stream, so a fixed salt reproduces exactly
noisy = noisy_evaluate(layout, params, x, DEFAULT_NISQ, salt=0)
again = noisy_evaluate(layout, params, x, DEFAULT_NISQ, salt=0)
other = noisy_evaluate(layout, params, x, DEFAULT_NISQ, salt=1)
print("noisy (salt 0):              ", np.round(noisy, 6))
print("noisy (salt 0, repeated):    ", np.round(again, 6))
print("noisy (salt 1):              ", np.round(other, 6))

# ------------------------------------------------------------
# shot noise shrinks like 1/sqrt(shots)
# ------------------------------------------------------------
# a Z readout is a +-1 coin: the binomial prediction for the standard
# deviation of the estimate is sqrt((1 - <Z>^2) / shots)
print("\nestimate spread over 64 salts:")
for shots in (128, 1024, 8192):
    cfg = NoiseConfig(depolarizing_prob=0.0, shots=shots, readout_flip_prob=0.0)
    draws = np.array(
        [noisy_evaluate(layout, params, x, cfg, salt=s)[0] for s in range(64)]
    )
    predicted = np.sqrt((1.0 - exact[0] ** 2) / shots)
    print(f"  shots {shots:5d}: std = {draws.std():.4f} (binomial {predicted:.4f})")

# ------------------------------------------------------------
# what the noise does to gradient engines
# ------------------------------------------------------------
# the parameter-shift rule only needs expectation values, so it runs on
# the noisy backend; the adjoint sweep needs the pure statevector and
# raises by contract
g = grad_parameter_shift(layout, params, x, noise=DEFAULT_NISQ, salt=0)
print("\nparameter-shift under noise, first row:", np.round(g[0, :4], 4), "...")
try:
    grad_adjoint(layout, params, x, noise=DEFAULT_NISQ)
except GradientMethodError as exc:
    print("adjoint under noise: rejected —", exc)
