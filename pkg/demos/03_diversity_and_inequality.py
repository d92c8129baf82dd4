"""
Diversity of time use and the Gini of per-user STU
==================================================
"""

import math

import numpy as np

from stutime import dispersion

# Shannon diversity over NAICS sectors, natural log
print(dispersion.shannon_diversity({"722511": 90}))                      # one sector
print(dispersion.shannon_diversity({"722511": 45, "813110": 45}))        # ln 2
print(dispersion.shannon_diversity([0.5, 0.25, 0.25]), 1.5 * math.log(2))
# only proportions matter
print(dispersion.shannon_diversity([5e6, 2.5e6, 2.5e6]))

# Gini across neighborhoods: (geoid, population, per-user minutes)
equal = [(f"t{i}", 1000, 120.0) for i in range(4)]
one_of_four = [("t0", 1000, 0.0), ("t1", 1000, 0.0), ("t2", 1000, 0.0), ("t3", 1000, 50.0)]
print("equal:", dispersion.gini_stu(equal), " one of four:", dispersion.gini_stu(one_of_four))

# The Lorenz curve behind it
for pt in dispersion.lorenz_curve([("a", 500, 80.0), ("b", 2000, 150.0), ("c", 1000, 400.0)]):
    print(f"{pt.geoid} pop share {pt.population_share:.3f}  cumulative STU share {pt.cumulative_stu_share:.3f}")

# Trapezoid Gini and the pairwise mean-difference form agree to rounding
rng = np.random.default_rng(0)
units = [(f"t{i}", int(p), float(v)) for i, (p, v) in
         enumerate(zip(rng.integers(500, 8000, 150), rng.lognormal(5.5, 0.6, 150)))]
print(dispersion.gini_stu(units), dispersion.gini_pairwise(units))

# Read literally, 1 - 2 sum P_i Y_i (T_i - T_{i-1}) depends on the time unit:
# the same neighborhoods in minutes and in hours give different answers
hours = [(g, p, v / 60) for g, p, v in units]
print("literal form, minutes:", dispersion.gini_as_printed(units))
print("literal form, hours:  ", dispersion.gini_as_printed(hours))
print("Lorenz Gini, hours:   ", dispersion.gini_stu(hours))
