import pytest

from inference_energy.benchmark_data import load_benchmarks
from inference_energy.scenario import BASELINE_MODELS, build_members
from inference_energy.tps_model import fit_models

_acceptance_lines = []


@pytest.fixture(scope="session")
def records():
    return load_benchmarks()


@pytest.fixture(scope="session")
def models(records):
    return fit_models(records)


@pytest.fixture(scope="session")
def gpu_counts(records):
    return {r.model_name: r.tp_size for r in records}


@pytest.fixture(scope="session")
def baseline_members(models, gpu_counts):
    return build_members(models, BASELINE_MODELS, gpu_counts=gpu_counts)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and report.when == "call":
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _acceptance_lines.append((item.name, doc, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, doc, outcome in _acceptance_lines:
        terminalreporter.write_line(f"{outcome.upper():7s} {name}: {doc}")
