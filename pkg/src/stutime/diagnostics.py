"""Structured side-channel for non-fatal pipeline events."""

import csv
import io
import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

HEADER = ("kind", "key", "detail")


@dataclass(frozen=True, order=True)
class Diagnostic:
    kind: str
    key: str
    detail: str = ""


@dataclass
class Diagnostics:
    events: list = field(default_factory=list)

    def emit(self, kind, key, detail=""):
        event = Diagnostic(kind, str(key), str(detail))
        log.debug("%s %s %s", event.kind, event.key, event.detail)
        self.events.append(event)

    def extend(self, other):
        self.events.extend(other.events)

    def count(self, kind=None):
        if kind is None:
            return len(self.events)
        return sum(1 for e in self.events if e.kind == kind)

    def of_kind(self, kind):
        return [e for e in self.events if e.kind == kind]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(HEADER)
        for e in sorted(self.events):
            writer.writerow((e.kind, e.key, e.detail))
        return buf.getvalue()

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)
