"""Tests for verification report records, serialization and exit status."""
import json

import pytest

from lagland.core.report import (
    Provenance,
    Record,
    Status,
    VerificationReport,
    bound_record,
    equal_record,
    error_record,
    report_schema,
)


@pytest.fixture
def records():
    return [
        bound_record("semiflat.minus_id", "-id is an involution", 0.0, 1e-12, Provenance.TRIVIAL),
        equal_record("census.nodal.components", "three components", 3, 3, Provenance.PAPER),
        equal_record("census.generic_singular.components", "seven components", 6, 7, Provenance.PAPER,
                     finding=True),
    ]


class TestRecords:
    def test_bound(self):
        assert bound_record("a", "c", 1e-13, 1e-12, Provenance.DERIVED).status == Status.PASS
        failed = bound_record("a", "c", 1e-3, 1e-12, Provenance.DERIVED)
        assert failed.status == Status.FAIL
        assert failed.expected == "<= 1.0e-12"

    def test_mismatch_is_a_failure_unless_marked_as_finding(self):
        assert equal_record("a", "c", 2, 3, Provenance.PAPER).status == Status.FAIL
        assert equal_record("a", "c", 2, 3, Provenance.PAPER, finding=True).status == Status.FINDING

    def test_non_finite_values_become_strings(self):
        record = bound_record("a", "c", float("inf"), 1e-12, Provenance.DERIVED)
        assert record.value == "inf"
        assert record.status == Status.FAIL
        assert Record(name="b", claim="c", status=Status.PASS, value=[1.0, float("nan")]).value == [1.0, "nan"]

    def test_error_record_keeps_the_message(self):
        record = error_record("a", "c", ValueError("boom"))
        assert record.status == Status.FAIL
        assert record.details["error"] == "ValueError: boom"


class TestVerificationReport:
    def test_records_are_sorted_by_name(self, records):
        report = VerificationReport(records=records)
        assert [r.name for r in report.records] == sorted(r.name for r in records)

    def test_findings_do_not_fail_the_run(self, records):
        assert VerificationReport(records=records).exit_status == 0

    def test_any_failure_fails_the_run(self, records):
        failing = records + [equal_record("census.toric.components", "one component", 2, 1, Provenance.TRIVIAL)]
        report = VerificationReport(records=failing)
        assert report.exit_status == 1
        assert [r.name for r in report.failed] == ["census.toric.components"]

    def test_json_round_trip(self, records):
        report = VerificationReport(config={"seed": 0}, records=records, timings={"census": 1.23456})
        restored = VerificationReport.from_json(report.to_json())
        assert restored.deterministic() == report.deterministic()
        assert json.loads(report.to_json())["timings"] == {"census": 1.235}

    def test_timings_are_not_deterministic(self, records):
        fast = VerificationReport(records=records, timings={"census": 0.1})
        slow = VerificationReport(records=records, timings={"census": 9.0})
        assert fast.deterministic() == slow.deterministic()
        assert "timings" not in json.loads(fast.to_json(include_timings=False))

    def test_table_has_a_summary_line(self, records):
        table = VerificationReport(records=records).to_table()
        lines = table.splitlines()
        assert lines[0].split() == ["check", "status", "value", "expected", "source"]
        assert lines[-1] == "2 pass, 0 fail, 1 finding"

    def test_schema_is_versioned(self):
        schema = report_schema()
        assert schema["$id"] == "lagland-report-1.0"
        assert "records" in schema["properties"]
