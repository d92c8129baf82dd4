"""
Distribution fits, KS, Moran's I and Pearson r
==============================================

Runs the validation statistics on synthetic tract values.
"""

import math

import numpy as np

from stutime import stats, synth

# Per-user minutes from a synthetic region with a lognormal intensity model
cfg = synth.SynthConfig(seed=3, n_tracts=1500, n_counties=15, n_pois=140, n_weeks=1,
                        urban_fraction=1.0, population_range=(300, 600),
                        unattributed_mean=0.5, colocation_rate=0.0)
data = synth.generate(cfg)
x = synth.per_user_samples(data.ledger, data.catalog, data.category_map, data.panel)
print(f"{x.size} tract values, median {np.median(x):.1f} min/device")

fits, failures = stats.select_best_family(x)
for f in fits:
    shape = "-" if f.shape is None else f"{f.shape:.3f}"
    print(f"{f.family:<12} D={f.ks_statistic:.4f}  shape={shape:<8} loc={f.loc:8.2f} scale={f.scale:8.2f}")

# Urban vs rural scale
rng = np.random.default_rng(1)
urban = rng.lognormal(math.log(268.7), 0.6, 5000)
rural = rng.lognormal(math.log(155.3), 0.6, 5000)
print("KS urban vs rural: D=%.3f p=%.2e" % stats.two_sample_ks(urban, rural))

# Moran's I on a rook grid
ids, edges = stats.rook_grid(10, 10)
w = stats.SpatialWeights.from_edges(edges, ids)
gradient = np.add.outer(np.arange(10), np.arange(10)).ravel()
noise = rng.normal(size=100)
print("gradient: I=%.3f p=%.3f" % stats.morans_i(gradient, w, permutations=999, seed=0))
print("noise:    I=%.3f p=%.3f" % stats.morans_i(noise, w, permutations=999, seed=0))

ids, edges = stats.rook_grid(2, 2)
print("checkerboard:", stats.morans_i([1, -1, -1, 1], stats.SpatialWeights.from_edges(edges, ids), 0)[0])

# Pearson r with a Fisher-z interval
cov = [[1, -0.26], [-0.26, 1]]
a, b = rng.multivariate_normal([0, 0], cov, size=1500).T
r, p, (lo, hi) = stats.pearson_r(a, b)
print(f"r={r:.3f} p={p:.1e} 95% CI [{lo:.3f}, {hi:.3f}]")
