"""
Verification reports: per-check records with an expected value and its
provenance, a config echo and timings kept outside the deterministic section.
"""
import json
import math
from enum import StrEnum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from lagland.__about__ import __version__

REPORT_SCHEMA_VERSION = "1.0"


class Status(StrEnum):
    PASS = "pass"
    FAIL = "fail"
    # a computed value that differs from a published claim without failing the run
    FINDING = "finding"


class Provenance(StrEnum):
    PAPER = "PAPER"
    TRIVIAL = "TRIVIAL"
    DERIVED = "DERIVED"


def _finite(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    return value


class Record(BaseModel):
    """
    Result of one check.

    Attributes:
        name: dotted check name, e.g. ``involution.nodal.pullback``.
        claim: the statement the check exercises.
        status: pass, fail or finding.
        value: residual, count or structured value.
        expected: expected value or bound.
        provenance: where the expected value comes from.
        details: extra context (seed, sample size, tolerance, error message).
    """
    model_config = ConfigDict(frozen=True, use_enum_values=True)

    name: str
    claim: str
    status: Status
    value: Any = None
    expected: Any = None
    provenance: Provenance = Provenance.DERIVED
    details: dict[str, Any] = Field(default_factory=dict)

    @field_validator("value", "expected", "details", mode="before")
    @classmethod
    def _json_safe(cls, value: Any) -> Any:
        return _finite(value)


class VerificationReport(BaseModel):
    """A run's records (sorted by name) with the config echo; timings are reported separately."""
    schema_version: str = REPORT_SCHEMA_VERSION
    tool_version: str = __version__
    config: dict[str, Any] = Field(default_factory=dict)
    records: list[Record] = Field(default_factory=list)
    timings: dict[str, float] = Field(default_factory=dict)

    def model_post_init(self, __context):
        self.records.sort(key=lambda r: r.name)

    @property
    def failed(self) -> list[Record]:
        return [r for r in self.records if r.status == Status.FAIL]

    @property
    def exit_status(self) -> int:
        return 1 if self.failed else 0

    def deterministic(self) -> dict[str, Any]:
        """Everything except timings, in canonical order."""
        return self.model_dump(mode="json", exclude={"timings"})

    def to_json(self, include_timings: bool = True) -> str:
        payload = self.deterministic()
        if include_timings:
            payload["timings"] = {k: round(v, 3) for k, v in sorted(self.timings.items())}
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.model_validate_json(text)

    def to_table(self) -> str:
        rows = [("check", "status", "value", "expected", "source")]
        for r in self.records:
            rows.append((r.name, str(r.status), _short(r.value), _short(r.expected), str(r.provenance)))
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        summary = {s: sum(r.status == s for r in self.records) for s in Status}
        lines.append("")
        lines.append(", ".join(f"{count} {status}" for status, count in summary.items()))
        return "\n".join(lines)


def _short(value: Any, width: int = 40) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.3e}"
    text = json.dumps(value) if not isinstance(value, str) else value
    return text if len(text) <= width else text[: width - 3] + "..."


def bound_record(name: str, claim: str, value: float, bound: float, provenance: Provenance,
                 details: Optional[dict[str, Any]] = None) -> Record:
    """A pass/fail record for value <= bound."""
    status = Status.PASS if value <= bound else Status.FAIL
    return Record(name=name, claim=claim, status=status, value=float(value), expected=f"<= {bound:.1e}",
                  provenance=provenance, details=details or {})


def equal_record(name: str, claim: str, value: Any, expected: Any, provenance: Provenance,
                 details: Optional[dict[str, Any]] = None, finding: bool = False) -> Record:
    """
    A record comparing a count or value with an expected one; mismatches are
    findings instead of failures when ``finding`` is set.
    """
    if value == expected:
        status = Status.PASS
    else:
        status = Status.FINDING if finding else Status.FAIL
    return Record(name=name, claim=claim, status=status, value=value, expected=expected, provenance=provenance,
                  details=details or {})


def error_record(name: str, claim: str, error: Exception, provenance: Provenance = Provenance.DERIVED) -> Record:
    return Record(name=name, claim=claim, status=Status.FAIL, value=None, provenance=provenance,
                  details={"error": f"{type(error).__name__}: {error}"})


def report_schema() -> dict[str, Any]:
    """JSON schema of the report, versioned by REPORT_SCHEMA_VERSION."""
    schema = VerificationReport.model_json_schema()
    schema["$id"] = f"lagland-report-{REPORT_SCHEMA_VERSION}"
    return schema
