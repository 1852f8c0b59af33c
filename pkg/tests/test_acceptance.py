"""Acceptance suite: every criterion at its stated budget and tolerance.

One full ``verify_all`` run is shared by criteria 1 to 11; criterion 12 runs
the suite a second time with 16 workers and compares the report bytes.
Roughly ten minutes on one core.
"""

import pytest

from merws.harness import CRITERIA, FULL_SUITE, env_seed, verify_all

from conftest import ACCEPTANCE_LINES

SEED = env_seed(20241016)


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify-all-1")
    return verify_all(SEED, 1, FULL_SUITE, out_dir=out), out


def _record(key, passed, detail):
    line = f"criterion {key:>2} [{'PASS' if passed else 'FAIL'}] {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _check(suite_result, key):
    reports = suite_result.criteria[key]
    passed = bool(reports) and all(r.passed for r in reports)
    _record(key, passed, CRITERIA[key])
    for rep in reports:
        print("   ", rep.line())
    failing = [r.line() for r in reports if not r.passed]
    assert reports and not failing, failing


@pytest.mark.parametrize("key", [str(k) for k in range(1, 12)])
def test_criterion(suite, key):
    _check(suite[0], key)


def test_criterion_12_determinism(suite, tmp_path):
    first = (suite[1] / "report.json").read_bytes()
    verify_all(SEED, 16, FULL_SUITE, out_dir=tmp_path)
    same = first == (tmp_path / "report.json").read_bytes()
    _record("12", same, "engineering determinism (repeat run, workers 1 vs 16)")
    assert same
