"""Gowers norms of phases: a quadratic phase is invisible to U^2 but saturates U^3.

Run: python3 demos/gowers_norms.py
"""

import numpy as np

from hofa import SampledFunction, gowers_norm

rng = np.random.default_rng(0)

print("Quadratic phase e(n^2/N) on Z_N, N prime")
print(f"{'N':>5} {'U2':>10} {'N^-1/4':>10} {'U3':>8}")
for N in (31, 101, 257):
    n = np.arange(N)
    f = SampledFunction.on_cyclic(np.exp(2j * np.pi * (n * n % N) / N))
    u2 = gowers_norm(f, 2, method="fft").norm
    u3 = gowers_norm(f, 3).norm if N < 120 else float("nan")
    print(f"{N:>5} {u2:10.6f} {N ** -0.25:10.6f} {u3:8.4f}")

# Random signs are uniform at every order, though the norms shrink slowly.
N = 64
signs = SampledFunction.on_cyclic(rng.choice([-1.0, 1.0], N))
print("\nRandom signs on Z_64:", ", ".join(
    f"U{k}={gowers_norm(signs, k).norm:.3f}" for k in (1, 2, 3)))

# On an interval the norm is taken inside a larger cyclic group and normalized
# by the indicator of [N]; the choice of ambient group does not matter.
f = SampledFunction.on_interval(np.exp(2j * np.pi * 0.3 * np.arange(1, 41) ** 2))
print("\nInterval [40], quadratic phase 0.3 n^2:")
for ntilde in (160, 167, 320):
    print(f"  ambient Z_{ntilde}: U2 = {gowers_norm(f, 2, ntilde=ntilde).norm:.12f}")
