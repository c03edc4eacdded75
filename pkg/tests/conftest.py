import numpy as np
import pytest

from tsunamisense.geo import BathymetryGrid, GeoPoint, GridSpec, SensorNetwork, synth_bathymetry


@pytest.fixture
def spec():
    return GridSpec(130.0, 160.0, 20.0, 50.0, 32, 32)


@pytest.fixture
def flat(spec):
    return synth_bathymetry(spec, "flat")


@pytest.fixture
def island(spec):
    """Flat ocean with a 4 x 4 block of land in the middle."""
    z = np.full(spec.shape, -4000.0)
    z[14:18, 14:18] = 100.0
    return BathymetryGrid(spec, z)


@pytest.fixture
def sensors():
    pts = [(137.0, 27.0), (145.0, 26.0), (153.0, 27.0), (136.0, 35.0),
           (154.0, 35.0), (137.0, 43.0), (145.0, 44.0), (153.0, 43.0)]
    return SensorNetwork(tuple((f"S{k}", GeoPoint(lo, la)) for k, (lo, la) in enumerate(pts)))



ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Call with (ok, detail); logs a PASS/FAIL line and fails the test when not ok."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])
    name = request.node.name.removeprefix("test_")

    def record(ok, detail):
        line = f"{name}: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
