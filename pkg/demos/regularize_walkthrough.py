"""Splitting a noisy cosine into structured, small and uniform parts.

The energy increment loop refines a factor until the Fourier oracle finds no
large coefficient left. The output is f = f_nil + f_sml + f_unf, with
each piece measured against its budget.

Run: python3 demos/regularize_walkthrough.py
"""

import math

import numpy as np

from hofa import SampledFunction, regularize

N, alpha = 1000, (math.sqrt(5) - 1) / 2
rng = np.random.default_rng(9)
n = np.arange(1, N + 1)
f = SampledFunction.on_interval(
    np.clip(0.5 + 0.5 * np.cos(2 * np.pi * alpha * n) + 0.05 * rng.uniform(-1, 1, N), 0, 1))

for m0 in (1, 4):
    res = regularize(f, 1, 0.1, "exp", m0=m0)
    print(f"\nstarting complexity m0 = {m0}")
    print(f"  rounds {res.rounds}, final M = {res.M:g}, cells {res.factor.complexity}")
    print("  energies:", " ".join(f"{x:.4f}" for x in res.energies))
    print("  measured:", {k: float(f"{v:.3e}") for k, v in res.measured.items()})
    print("  budgets: ", {k: float(f"{v:.3e}") for k, v in res.budgets.items()})
    print("  certificates:", res.certificates)
    miss = np.sqrt(np.mean(np.abs(res.f_nil.values - f.values) ** 2))
    print(f"  L2 distance from f_nil to f: {miss:.3f}")
