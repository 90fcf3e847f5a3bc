import pytest
from hypothesis import HealthCheck, settings

from glucosindy.synth import SynthConfig, generate

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def clean_patient():
    """48 h noise-free synthetic patient with the default schedule."""
    return generate(SynthConfig())


def write_csv(path, rows, header="timestamp,kind,value"):
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
