import pytest

from quickdraw.features import ResampleConfig
from quickdraw.pipeline import resample_corpus, simulate_corpus
from quickdraw.synth import default_scenario


@pytest.fixture(scope="session")
def corpus48():
    """The default 48-climb synthetic corpus, simulated once per test session."""
    return simulate_corpus(default_scenario(), 48, jitter=0.2)


@pytest.fixture(scope="session")
def climbs48(corpus48):
    return resample_corpus(corpus48.sessions, ResampleConfig())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
