"""Exception types raised across the pipeline."""


class StuError(Exception):
    """Base class for all pipeline errors."""


class IngestError(StuError):
    """A malformed input row.

    ``row`` is the 1-based data row index (header excluded), or None when the
    problem is not tied to a row.
    """

    def __init__(self, reason, row=None):
        self.reason = reason
        self.row = row
        where = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}{reason}")


class MissingColumn(IngestError):
    pass


class MalformedBucketObject(IngestError):
    pass


class NonMondayWeekStart(IngestError):
    pass


class NegativeCount(IngestError):
    pass


class MalformedValue(IngestError):
    pass


class BadGeoidLength(IngestError):
    pass


class DuplicateNaicsMapping(IngestError):
    pass


class CrosswalkWeightSumViolation(IngestError):
    def __init__(self, source_geoid, total):
        self.source_geoid = source_geoid
        self.total = total
        super().__init__(f"crosswalk weights for {source_geoid} sum to {total!r}, not 1")


class NonNestedHierarchy(IngestError):
    pass


class MixedWeeksInGroup(StuError):
    pass


class UnknownPoi(StuError):
    pass


class MissingPanelMonth(StuError):
    pass


class EmptyProfile(StuError):
    pass


class DegenerateRegion(StuError):
    pass


class EmptyUnit(StuError):
    pass


class UnmappedSource(StuError):
    pass


class InsufficientSamples(StuError):
    pass


class DegenerateSample(StuError):
    pass


class SupportViolation(StuError):
    pass


class ZeroVariance(StuError):
    pass


class TooFewUnits(StuError):
    pass


class ConstantInput(StuError):
    pass


class TooFewPoints(StuError):
    pass
