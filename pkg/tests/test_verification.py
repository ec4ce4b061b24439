"""The built-in property suites behind the verify subcommand."""
from viouter import run_checks
from viouter.verification import CheckResult


def test_fast_checks_all_pass():
    results = run_checks(fast=True)
    failures = [r for r in results if not r.passed]
    assert failures == []


def test_check_results_are_well_formed():
    results = run_checks(fast=True)
    assert len(results) >= 10
    names = [r.name for r in results]
    assert len(names) == len(set(names))
    for r in results:
        assert isinstance(r, CheckResult)
        assert r.name
        assert r.detail
