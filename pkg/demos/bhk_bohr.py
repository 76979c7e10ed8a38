"""Weighted 3-AP counts in a Bohr set.

A Bohr set of density 0.3 has about 0.3^3 N^2 progressions, but the weighted
count concentrates on differences d with d*alpha near an integer. The weight
is normalized to mean about 1 and the profile shows where the mass sits.

Run: python3 demos/bhk_bohr.py
"""

from hofa import ap_profile, bhk_verify_synthetic
from hofa.patterns import build_construction

N = 5000
con = build_construction("bohr:alpha=0.618,delta=0.15", N)
rep = bhk_verify_synthetic(3, "bohr:alpha=0.618,delta=0.15", 0.05, N)
print(f"density {rep['density']:.4f}, weighted count {rep['weightedCount']:.4f}, "
      f"threshold {rep['threshold']:.4f}, pass {rep['pass']}")
print(f"good differences {rep['goodDifferenceFraction']:.4f} "
      f"(strict delta^3 cut: {rep['strictGoodDifferenceFraction']:.4f})")

profile = ap_profile(con.indicator, 3)
print("\n  d    count/N")
for d in (0, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89):
    print(f"{d:>4} {profile[d]:9.4f}")
