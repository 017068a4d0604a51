"""Run the self-verification suite once and check its reporting contract."""
import pytest

from ablasim.validation import (
    CheckResult,
    all_passed,
    format_report,
    run_validation_suite,
)


@pytest.fixture(scope="module")
def suite():
    return run_validation_suite()


def test_suite_all_green(suite):
    failed = [c.name for c in suite if not c.passed]
    assert not failed, f"failed checks: {failed}"
    assert all_passed(suite)


def test_suite_has_nine_independent_checks(suite):
    assert len(suite) == 9
    assert len({c.name for c in suite}) == 9


def test_measured_values_respect_comparators(suite):
    for c in suite:
        if c.comparator == "<=":
            assert c.measured <= c.bound, c.name
        else:
            assert c.comparator == ">="
            assert c.measured >= c.bound, c.name


def test_report_format(suite):
    report = format_report(suite)
    lines = report.splitlines()
    assert len(lines) == 10
    for line in lines[:-1]:
        assert line.startswith("PASS  ")
        assert "measured" in line
    assert lines[-1] == "9/9 checks passed"


def test_report_marks_failures():
    fake = [
        CheckResult("good", 0.0, 1.0, "<=", True),
        CheckResult("bad", 2.0, 1.0, "<=", False, detail="synthetic"),
    ]
    report = format_report(fake)
    assert not all_passed(fake)
    assert "FAIL  bad" in report
    assert "[synthetic]" in report
    assert report.splitlines()[-1] == "1/2 checks passed"
