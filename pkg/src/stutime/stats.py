"""Validation statistics: distribution fitting, KS tests, Moran's I, Pearson r.

KS p-values come from the asymptotic Kolmogorov distribution. When the
reference distribution was fitted to the same sample they are approximate
(too large), which is how they are normally reported for this kind of
model comparison.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy import stats as sps

from .errors import (
    ConstantInput,
    DegenerateSample,
    InsufficientSamples,
    SupportViolation,
    TooFewPoints,
    TooFewUnits,
    ZeroVariance,
)

FAMILIES = ("normal", "lognormal", "weibull", "exponential", "gamma", "powerlaw", "chisquared")
MIN_FIT_SAMPLES = 8
LOCATION_GRID_POINTS = 32
DEFAULT_PERMUTATIONS = 999


@dataclass(frozen=True)
class DistributionFit:
    family: str
    shape: float | None
    loc: float
    scale: float
    ks_statistic: float
    p_value: float
    sample_size: int

    @property
    def params(self):
        return (self.shape, self.loc, self.scale)

    def frozen(self):
        return _frozen(self.family, self.shape, self.loc, self.scale)


@dataclass(frozen=True)
class FitFailure:
    family: str
    reason: str


def _frozen(family, shape, loc, scale):
    if family == "normal":
        return sps.norm(loc=loc, scale=scale)
    if family == "lognormal":
        return sps.lognorm(shape, loc=loc, scale=scale)
    if family == "weibull":
        return sps.weibull_min(shape, loc=loc, scale=scale)
    if family == "exponential":
        return sps.expon(loc=loc, scale=scale)
    if family == "gamma":
        return sps.gamma(shape, loc=loc, scale=scale)
    if family == "chisquared":
        return sps.chi2(shape, loc=loc, scale=scale)
    if family == "powerlaw":
        # density (a-1)/xmin (x/xmin)^-a for x >= xmin
        return sps.pareto(shape - 1.0, loc=loc, scale=scale)
    raise ValueError(f"unknown family {family!r}")


def ks_statistic(samples, cdf):
    """One-sample sup |ECDF - F| for a vectorized CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = cdf(x)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def kolmogorov_sf(d, n_eff):
    """Asymptotic P(D > d) for effective sample size ``n_eff``."""
    return float(sps.kstwobign.sf(math.sqrt(n_eff) * d))


def _location_grid(xmin):
    # 32 candidates in [0, xmin); xmin itself would put a sample on the boundary
    return np.linspace(0.0, xmin, LOCATION_GRID_POINTS + 1)[:-1]


def _lognorm_profile(x, loc):
    y = np.log(x - loc)
    mu = y.mean()
    sigma = y.std()
    if sigma <= 0:
        return -np.inf, None
    n = x.size
    ll = -y.sum() - n * math.log(sigma) - 0.5 * n * math.log(2 * math.pi) - 0.5 * n
    return ll, (float(sigma), float(math.exp(mu)))


def _scipy_profile(dist):
    def fit(x, loc):
        shape, _, scale = dist.fit(x - loc, floc=0)
        ll = float(np.sum(dist.logpdf(x - loc, shape, scale=scale)))
        return ll, (float(shape), float(scale))
    return fit


def _profile_fit(x, profile):
    best = (-np.inf, None, None)
    for loc in _location_grid(x.min()):
        ll, params = profile(x, loc)
        if params is not None and np.isfinite(ll) and ll > best[0]:
            best = (ll, float(loc), params)
    if best[2] is None:
        raise DegenerateSample("no finite likelihood on the location grid")
    _, loc, (shape, scale) = best
    return shape, loc, scale


def _estimate(x, family):
    if family == "normal":
        return None, float(x.mean()), float(x.std())
    if x.min() <= 0:
        raise SupportViolation(f"{family} needs positive samples (min {x.min()})")
    if family == "exponential":
        loc = float(x.min())
        return None, loc, float(x.mean() - loc)
    if family == "powerlaw":
        xmin = float(x.min())
        logs = np.log(x / xmin)
        if logs.sum() <= 0:
            raise DegenerateSample("all samples equal the lower bound")
        return float(1.0 + x.size / logs.sum()), 0.0, xmin
    if family == "lognormal":
        return _profile_fit(x, _lognorm_profile)
    if family == "weibull":
        return _profile_fit(x, _scipy_profile(sps.weibull_min))
    if family == "gamma":
        return _profile_fit(x, _scipy_profile(sps.gamma))
    if family == "chisquared":
        return _profile_fit(x, _scipy_profile(sps.chi2))
    raise ValueError(f"unknown family {family!r}")


def fit_distribution(samples, family):
    """Maximum-likelihood fit of one candidate family plus its KS statistic.

    Three-parameter families (lognormal, Weibull, gamma, chi-squared) take
    their location from a 32-point grid in ``[0, min(samples))``, with the
    other two parameters fitted by MLE at each grid point. Exponential uses
    ``loc = min``; the power law fixes its lower bound at the sample minimum.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_FIT_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_FIT_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    if np.ptp(x) == 0:
        raise DegenerateSample("sample has zero variance")
    shape, loc, scale = _estimate(x, family)
    if not scale > 0:
        raise DegenerateSample(f"{family} fit produced scale {scale}")
    d = ks_statistic(x, _frozen(family, shape, loc, scale).cdf)
    return DistributionFit(family, shape, loc, scale, d, kolmogorov_sf(d, x.size), int(x.size))


def select_best_family(samples, families=FAMILIES):
    """Fit every family and rank by ascending KS statistic.

    Returns ``(ranked_fits, failures)``; families that cannot be fitted are
    listed in ``failures`` instead of being ranked.
    """
    fits, failures = [], []
    for family in families:
        try:
            fits.append(fit_distribution(samples, family))
        except (DegenerateSample, SupportViolation, InsufficientSamples) as err:
            failures.append(FitFailure(family, str(err)))
    fits.sort(key=lambda f: (f.ks_statistic, FAMILIES.index(f.family)))
    return fits, failures


def two_sample_ks(a, b):
    """Two-sample KS statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise TooFewPoints("both samples must be nonempty")
    grid = np.concatenate((a, b))
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    n_eff = a.size * b.size / (a.size + b.size)
    return d, kolmogorov_sf(d, n_eff)


# -- spatial autocorrelation -------------------------------------------------


@dataclass
class SpatialWeights:
    ids: list
    matrix: sparse.csr_matrix
    row_standardized: bool = False

    @classmethod
    def from_edges(cls, edges, ids=None, row_standardize=True):
        """Symmetric binary weights from undirected ``(a, b)`` pairs."""
        edges = [(str(a), str(b)) for a, b in edges]
        if any(a == b for a, b in edges):
            raise ValueError("self-loops are not allowed")
        if ids is None:
            ids = sorted({g for e in edges for g in e})
        ids = list(ids)
        pos = {g: i for i, g in enumerate(ids)}
        pairs = {(pos[a], pos[b]) for a, b in edges if a in pos and b in pos}
        pairs |= {(j, i) for i, j in pairs}
        rows, cols = zip(*sorted(pairs)) if pairs else ((), ())
        m = sparse.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(ids), len(ids))
        )
        w = cls(ids, m, False)
        return w.standardized() if row_standardize else w

    @classmethod
    def from_edge_csv(cls, stream, ids=None, row_standardize=True):
        text = stream if isinstance(stream, str) else stream.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8-sig")
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or not {"geoid_a", "geoid_b"} <= set(reader.fieldnames):
            raise ValueError("edge list needs columns geoid_a, geoid_b")
        edges = [(r["geoid_a"].strip(), r["geoid_b"].strip()) for r in reader]
        return cls.from_edges(edges, ids, row_standardize)

    def standardized(self):
        sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
        return SpatialWeights(self.ids, sparse.diags(inv) @ self.matrix, True)

    @property
    def s0(self):
        return float(self.matrix.sum())


def rook_grid(nrows, ncols, prefix="c"):
    """Cell ids and rook-adjacency edges for a ``nrows x ncols`` grid."""
    ids = [f"{prefix}{r:03d}_{c:03d}" for r in range(nrows) for c in range(ncols)]
    edges = []
    for r in range(nrows):
        for c in range(ncols):
            here = f"{prefix}{r:03d}_{c:03d}"
            if c + 1 < ncols:
                edges.append((here, f"{prefix}{r:03d}_{c + 1:03d}"))
            if r + 1 < nrows:
                edges.append((here, f"{prefix}{r + 1:03d}_{c:03d}"))
    return ids, edges


def _moran_stat(z, w, s0):
    return z.size / s0 * float(z @ (w @ z)) / float(z @ z)


def morans_i(values, weights, permutations=DEFAULT_PERMUTATIONS, seed=0):
    """Global Moran's I with a two-sided permutation p-value.

    ``values`` maps unit id -> value (or is a sequence aligned with
    ``weights.ids``). Returns ``(I, p)``; ``p`` is None when
    ``permutations`` is 0.
    """
    if isinstance(values, dict):
        x = np.array([values[g] for g in weights.ids], dtype=float)
    else:
        x = np.asarray(values, dtype=float)
    if x.size != len(weights.ids):
        raise ValueError("values do not cover the weight units")
    if x.size < 3:
        raise TooFewUnits(f"need at least 3 units, got {x.size}")
    z = x - x.mean()
    if np.allclose(z, 0.0, atol=1e-12 * max(1.0, np.abs(x).max())):
        raise ZeroVariance("value field is constant")
    s0 = weights.s0
    if s0 <= 0:
        raise ValueError("weights have no neighbors")
    w = weights.matrix.tocsr()
    observed = _moran_stat(z, w, s0)
    if not permutations:
        return observed, None

    rng = np.random.default_rng(seed)
    sims = np.empty(permutations)
    for k in range(permutations):
        sims[k] = _moran_stat(rng.permutation(z), w, s0)
    upper = np.sum(sims >= observed)
    lower = np.sum(sims <= observed)
    p = min(1.0, 2.0 * (min(upper, lower) + 1) / (permutations + 1))
    return observed, p


# -- correlation -------------------------------------------------------------


def pearson_r(x, y, confidence=0.95):
    """Pearson r, two-sided t-test p-value and a Fisher-z confidence interval."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y differ in length")
    n = x.size
    if n < 4:
        raise TooFewPoints(f"need at least 4 points, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ConstantInput("a variable is constant")
    r = float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))

    if abs(r) == 1.0:
        return r, 0.0, (r, r)
    t = r * math.sqrt((n - 2) / (1 - r * r))
    p = float(2 * sps.t.sf(abs(t), n - 2))
    z = math.atanh(r)
    half = sps.norm.ppf(0.5 + confidence / 2) / math.sqrt(n - 3)
    return r, p, (math.tanh(z - half), math.tanh(z + half))
