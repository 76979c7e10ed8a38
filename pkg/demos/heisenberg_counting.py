"""Counting 3-APs along a Heisenberg orbit.

An orbit with irrational horizontal data equidistributes in its Leibman
subgroup, so averages of F(g(n))F(g(n+d))F(g(n+2d)) approach a Haar integral.
Rational data breaks this, and a horizontal character certifies the failure.

Run: python3 demos/heisenberg_counting.py   (about 30 s)
"""

import math
from fractions import Fraction

from hofa import PolySequence, ap_system, counting_report, equidist_witness, heisenberg

H = heisenberg()
psi = ap_system(3)

irrational = PolySequence.from_coords(H, [(0, 0, 0), (math.sqrt(2) - 1, math.sqrt(3) - 1, 0)])
rational = PolySequence.from_coords(H, [(0, 0, 0), (Fraction(1, 3), Fraction(1, 5), 0)])

for label, seq in (("irrational", irrational), ("rational", rational)):
    print(f"\n{label} data, N = 2000, 2*10^5 Haar samples")
    print(f"  {'test function':<22} {'orbit':>16} {'Haar':>16} {'residual':>9}")
    for row in counting_report(seq, psi, 2000, 200_000, seed=1):
        emp, haar = complex(row.empirical), complex(row.haar)
        print(f"  {row.name:<22} {emp.real:+.4f}{emp.imag:+.4f}i {haar.real:+.4f}{haar.imag:+.4f}i"
              f" {row.residual:9.4f}")
    w = equidist_witness(seq, 2000, 0.05)
    print("  witness:", "none (equidistributed)" if w is None else w.to_json())
