"""
Per-user and per-visit time, one POI at a time
==============================================

Builds a handful of weekly patterns by hand and follows them through the
dwell-total, tract attribution and per-user / per-visit steps.
"""

import datetime as dt

from stutime import measures
from stutime.ingest import ALL, ActivityCategory, CategoryMap, PanelObservation, PoiRecord, WeeklyPattern

week = dt.date(2023, 1, 2)  # weeks start on Monday

# Seven dwell buckets: <5, 5-10, 11-20, 21-60, 61-120, 121-240, >240 minutes.
# The default policy credits each visit with the bucket midpoint, 240 for the open one.
policy = measures.DwellPolicy()
print("representative minutes:", policy.minutes)

cafe = WeeklyPattern("cafe", week, raw_visits=10,
                     dwell_buckets=(4, 2, 3, 1, 0, 0, 0),
                     home_areas={"060010001001": 3, "060010001002": 2, "060010002001": 4})
church = WeeklyPattern("church", week, raw_visits=6,
                       dwell_buckets=(0, 0, 0, 2, 3, 1, 0),
                       home_areas={"060010002001": 5})

for p in (cafe, church):
    print(p.poi_id, "total bucketed minutes:", measures.expected_poi_dwell_total(p, policy))

# The open bucket is a policy choice; a longer tail adds minutes only there
long_tail = measures.DwellPolicy.with_open_bucket(300)
late = WeeklyPattern("bar", week, 3, (0, 0, 0, 0, 0, 0, 3), {})
print("3 visits over 240 min:", measures.expected_poi_dwell_total(late, policy),
      "vs", measures.expected_poi_dwell_total(late, long_tail))

# One visit from the cafe is unattributed (10 raw, 9 with a home block group).
# Attribution shares the POI total by V_ij / V_j, so unattributed visits keep
# their minutes out of every tract.
catalog = [
    PoiRecord("cafe", "722515", (37.8, -122.27), "cafe", "06001000100"),
    PoiRecord("church", "813110", (37.8, -122.26), "church", "06001000200"),
]
cmap = CategoryMap({"722515": ActivityCategory.DINING, "813110": ActivityCategory.RELIGIOUS})
rows = measures.tract_category_time([cafe, church], catalog, cmap, policy)
for r in rows:
    print(f"{r.tract_geoid} {r.category.value:<10} {r.total_minutes:8.2f} min  {r.attributed_visits:g} visits")

panel = [PanelObservation("06001000100", "2023-01", 4, 3200),
         PanelObservation("06001000200", "2023-01", 0, 2900)]
stu = measures.foundational_stu(rows, panel, week)
for tract, s in stu.items():
    per_user = "absent (no devices)" if s.per_user is None else f"{s.per_user[ALL]:.2f} min/device"
    print(tract, "per user:", per_user, "| per visit:", f"{s.per_visit[ALL]:.2f} min/visit")

# Co-located POIs report the same place-level record; splitting every count by
# the group size keeps the place's total unchanged
mall = [PoiRecord(f"shop{i}", "448140", (0, 0), "mall-1", "06001000100") for i in range(3)]
copies = [WeeklyPattern(p.poi_id, week, 30, (30, 0, 0, 0, 0, 0, 0), {"060010001001": 30}) for p in mall]
print("after split:", [p.raw_visits for p in measures.dedup_colocated(copies, mall)])
