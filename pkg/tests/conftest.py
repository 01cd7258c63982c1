from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS_DIR))

FIXTURE_CORPUS = TESTS_DIR / "fixtures" / "corpus"
CSV_CORPUS = TESTS_DIR / "fixtures" / "csv_corpus"
GOLDEN_DIR = TESTS_DIR / "golden"


@pytest.fixture(scope="session")
def fixture_corpus_root() -> Path:
    return FIXTURE_CORPUS


@pytest.fixture(scope="session")
def fixture_manifest() -> dict:
    return json.loads((FIXTURE_CORPUS / "expected_manifest.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def corpus():
    from fablegen.corpus import load_corpus

    return load_corpus(FIXTURE_CORPUS)


@pytest.fixture(scope="session")
def reference_backend():
    from fablegen.lingann import ReferenceAnnotationBackend

    return ReferenceAnnotationBackend()


def golden_path(name: str) -> Path:
    return GOLDEN_DIR / name


def read_golden(name: str) -> str:
    return golden_path(name).read_text(encoding="utf-8")


# -- acceptance criterion reporting ------------------------------------------


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): marks a test as one acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        report._acceptance_name = marker.args[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail/skip line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "skipped"):
        for report in terminalreporter.stats.get(outcome, []):
            name = getattr(report, "_acceptance_name", None)
            if name:
                lines.append((name, outcome.upper()))
    if lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for name, outcome in sorted(lines):
            terminalreporter.write_line(f"  [{outcome:>7}] {name}")
