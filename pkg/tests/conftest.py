from __future__ import annotations

import pytest

from dsqa.fixtures import build_demo_pipeline, load_fixture_index
from dsqa.synth import SynthConfig, generate_synthetic_corpus


def pytest_runtest_logreport(report):
    """One pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].removeprefix("test_")
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {name.replace('_', '-')}: {outcome}")


@pytest.fixture(scope="session")
def demo_pipeline():
    """Small trained pipeline over the fixture KB; built once per session."""
    return build_demo_pipeline(corpus_size=400, seed=7)


@pytest.fixture(scope="session")
def fixture_index():
    return load_fixture_index()


@pytest.fixture(scope="session")
def synth_corpus_500():
    return generate_synthetic_corpus(SynthConfig(size=500), seed=1)
