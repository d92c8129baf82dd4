"""Shannon diversity of time use and the population-weighted Gini of STU."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRegion, EmptyProfile


@dataclass(frozen=True)
class SectorTimeProfile:
    tract_geoid: str
    week_start: object
    sector_minutes: dict


@dataclass(frozen=True)
class LorenzPoint:
    geoid: str
    population_share: float
    per_user_value: float
    cumulative_stu_share: float


def shannon_diversity(profile):
    """Shannon entropy (natural log) of the sector time shares.

    ``profile`` is a SectorTimeProfile or a plain mapping / sequence of
    nonnegative minutes. Zero-minute sectors contribute nothing.
    """
    if isinstance(profile, SectorTimeProfile):
        profile = profile.sector_minutes
    values = profile.values() if isinstance(profile, dict) else profile
    x = np.asarray(list(values), dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("sector minutes must be finite and nonnegative")
    x = x[x > 0]
    if x.size == 0:
        raise EmptyProfile("no sector has positive minutes")
    p = x / x.sum()
    h = float(-np.sum(p * np.log(p)))
    # a single sector gives -0.0; rounding can leave a tiny negative
    return h if h > 0 else 0.0


def _sorted_units(units):
    units = [(str(g), float(pop), float(t)) for g, pop, t in units]
    if len(units) < 2:
        raise DegenerateRegion(f"need at least 2 neighborhoods, got {len(units)}")
    if any(pop < 0 or t < 0 for _, pop, t in units):
        raise ValueError("populations and per-user values must be nonnegative")
    total_pop = sum(pop for _, pop, _ in units)
    if total_pop <= 0:
        raise DegenerateRegion("region population is zero")
    if sum(pop * t for _, pop, t in units) <= 0:
        raise DegenerateRegion("region has no STU")
    units.sort(key=lambda u: (u[2], u[0]))
    return units, total_pop


def lorenz_curve(units):
    """Lorenz points for ``(geoid, population, per_user)`` triples."""
    units, total_pop = _sorted_units(units)
    pop = np.array([u[1] for u in units]) / total_pop
    mass = pop * np.array([u[2] for u in units])
    y = np.cumsum(mass) / mass.sum()
    y[-1] = 1.0
    return [LorenzPoint(u[0], float(p), u[2], float(c)) for u, p, c in zip(units, pop, y)]


def gini_stu(units):
    """Population-weighted Gini of per-user STU across neighborhoods.

    ``units`` holds ``(geoid, population, per_user)`` triples. Units are
    sorted by per-user value (ties by geoid), and the area under the Lorenz
    curve is taken with the trapezoid rule:
    ``G = 1 - sum (X_i - X_{i-1}) (Y_i + Y_{i-1})``.
    """
    points = lorenz_curve(units)
    dx = np.array([p.population_share for p in points])
    y = np.array([p.cumulative_stu_share for p in points])
    y_prev = np.concatenate(([0.0], y[:-1]))
    g = 1.0 - float(np.sum(dx * (y + y_prev)))
    return max(g, 0.0)


def gini_pairwise(units):
    """O(n^2) weighted mean-absolute-difference Gini, sum p_i p_j |x_i - x_j| / (2 mu)."""
    units, total_pop = _sorted_units(units)
    p = np.array([u[1] for u in units]) / total_pop
    x = np.array([u[2] for u in units])
    mu = np.sum(p * x)
    return float(np.sum(np.outer(p, p) * np.abs(x[:, None] - x[None, :])) / (2 * mu))


def gini_as_printed(units):
    """Literal ``1 - 2 sum P_i Y_i (T_i - T_{i-1})`` with ``T_0 = 0``.

    Kept to show how the printed form behaves: it is not scale invariant and
    can leave [0, 1]. Not used by the pipeline.
    """
    points = lorenz_curve(units)
    p = np.array([pt.population_share for pt in points])
    y = np.array([pt.cumulative_stu_share for pt in points])
    t = np.array([pt.per_user_value for pt in points])
    dt = np.diff(np.concatenate(([0.0], t)))
    return float(1.0 - 2.0 * np.sum(p * y * dt))
