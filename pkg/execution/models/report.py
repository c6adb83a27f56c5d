"""
Report model shared by every check-style operation.

Validation and consistency checks never raise on a failed check: they collect
entries into a Report, and callers decide what a failure means (the CLI turns
it into exit code 1).
"""

from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Tuple


@dataclass(frozen=True)
class ReportEntry:
    """One named check with its verdict and the offending location, if any."""

    check: str
    passed: bool
    detail: str = ""
    location: Tuple[Any, ...] = ()

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        where = f" at {self.location}" if self.location else ""
        detail = f": {self.detail}" if self.detail else ""
        return f"{status} {self.check}{where}{detail}"


@dataclass
class Report:
    """
    Ordered collection of check results.

    Usage:
        report = Report("flowcat.validate")
        report.add("unique_ids", True)
        if not report.passed:
            for entry in report.failures():
                print(entry)
    """

    title: str
    entries: List[ReportEntry] = field(default_factory=list)

    def add(self, check: str, passed: bool, detail: str = "", location: Tuple[Any, ...] = ()) -> ReportEntry:
        entry = ReportEntry(check, bool(passed), detail, tuple(location))
        self.entries.append(entry)
        return entry

    def extend(self, other: "Report") -> None:
        """Append every entry of another report."""
        self.entries.extend(other.entries)

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def failures(self) -> List[ReportEntry]:
        return [entry for entry in self.entries if not entry.passed]

    def checks(self, name: str) -> List[ReportEntry]:
        """All entries for a given check name."""
        return [entry for entry in self.entries if entry.check == name]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'title': self.title,
            'passed': self.passed,
            'entries': [
                {**asdict(entry), 'location': [str(part) for part in entry.location]}
                for entry in self.entries
            ],
        }

    def __str__(self) -> str:
        lines = [f"{self.title}: {'PASS' if self.passed else 'FAIL'}"]
        lines.extend(f"  {entry}" for entry in self.entries)
        return "\n".join(lines)


# Validation operations return the same structure under the name the
# ⟨k⟩-complex and category validators use.
ValidationReport = Report
