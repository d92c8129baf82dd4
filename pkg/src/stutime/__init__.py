"""Social-infrastructure time use (STU) measures from POI foot-traffic patterns."""

from .aggregate import (
    Level,
    aggregate_diversity,
    aggregate_per_user,
    aggregate_per_visit,
    apply_crosswalk,
    compute_region_gini,
)
from .dispersion import gini_stu, shannon_diversity
from .ingest import ActivityCategory, cbg_to_tract, parse_panel, parse_weekly_patterns
from .measures import (
    DwellPolicy,
    dedup_colocated,
    expected_poi_dwell_total,
    foundational_stu,
    tract_category_time,
)
from .stats import fit_distribution, morans_i, pearson_r, select_best_family, two_sample_ks

__version__ = "0.1.0"

__all__ = [
    "ActivityCategory",
    "DwellPolicy",
    "Level",
    "aggregate_diversity",
    "aggregate_per_user",
    "aggregate_per_visit",
    "apply_crosswalk",
    "cbg_to_tract",
    "compute_region_gini",
    "dedup_colocated",
    "expected_poi_dwell_total",
    "fit_distribution",
    "foundational_stu",
    "gini_stu",
    "morans_i",
    "parse_panel",
    "parse_weekly_patterns",
    "pearson_r",
    "select_best_family",
    "shannon_diversity",
    "tract_category_time",
    "two_sample_ks",
]
