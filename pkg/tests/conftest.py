import pytest

from gshp_potential import pipeline as pl
from gshp_potential.synthetic import write_synthetic_region

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def synthetic_manifest(tmp_path_factory):
    return write_synthetic_region(tmp_path_factory.mktemp("region"), seed=0)


@pytest.fixture(scope="session")
def synthetic_run(synthetic_manifest):
    """(region, model, {label: ScenarioResult}) for every scenario of the synthetic region."""
    region = pl.load_region(synthetic_manifest)
    model = pl.SiteModel(region)
    results = {spec.label: pl.run_scenario(spec, region, model) for spec in region.scenarios()}
    return region, model, results


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
