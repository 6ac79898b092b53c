import pytest

from hagprop.validation import format_report, run_checks


@pytest.fixture(scope="module")
def clean():
    return run_checks()


def test_all_checks_pass(clean):
    assert clean and all(c.passed for c in clean), format_report(clean)
    assert {c.module for c in clean} >= {"multiindex", "wavepacket", "classical_flow", "electronic",
                                         "ansatz_assembler", "reference_solver", "truncation_lab"}


def test_report_lists_bound_margin(clean):
    report = format_report(clean)
    assert "bound margin" in report
    assert report.splitlines()[-1] == f"{len(clean)} passed, 0 failed"


def test_injected_fixture_only_breaks_wavepacket_checks():
    checks = run_checks("cond1")
    failed = {c.module for c in checks if not c.passed}
    assert failed == {"wavepacket"}


def test_unknown_fixture():
    with pytest.raises(ValueError):
        run_checks("nope")
