"""Named condition reports shared by solvers, checkers and the batch runner."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Entry:
    name: str
    anchor: str
    residual: float
    threshold: float

    def __post_init__(self) -> None:
        if not self.anchor:
            raise ValueError(f"entry {self.name!r} needs a nonempty anchor")

    @property
    def passed(self) -> bool:
        return self.residual <= self.threshold


@dataclass
class ConditionReport:
    title: str
    entries: list[Entry] = field(default_factory=list)

    def add(self, name: str, anchor: str, residual: float, threshold: float) -> None:
        self.entries.append(Entry(name, anchor, float(residual), float(threshold)))

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failed(self) -> list[str]:
        return [e.name for e in self.entries if not e.passed]

    def __getitem__(self, name: str) -> Entry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "anchor", "residual", "threshold", "pass"])
        for e in self.entries:
            w.writerow([e.name, e.anchor, f"{e.residual:.12e}", f"{e.threshold:.12e}", int(e.passed)])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"[{self.title}] {'PASS' if self.passed else 'FAIL'}"]
        for e in self.entries:
            flag = "ok " if e.passed else "BAD"
            lines.append(f"  {flag} {e.name}: {e.residual:.3e} <= {e.threshold:.3e}  ({e.anchor})")
        return "\n".join(lines)


class CompatibilityError(RuntimeError):
    """Raised when input data fail a compatibility list; carries the report."""

    def __init__(self, report: ConditionReport):
        self.report = report
        super().__init__(f"{report.title}: failed {report.failed()}")
