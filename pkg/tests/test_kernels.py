import numpy as np
import pytest

from tsunamisense import _accel, _swe_kernels
from tsunamisense.geo import GeoPoint, synth_bathymetry, GridSpec
from tsunamisense.swe import EpicenterSource, GridMetrics, PhysicalConstants, default_nu4, initial_condition, simulate

pytestmark = pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")


def _args(boundary):
    spec = GridSpec(130.0, 160.0, 20.0, 50.0, 40, 36)
    bathy = synth_bathymetry(spec, "shelf")
    consts = PhysicalConstants()
    m = GridMetrics(bathy, consts, boundary)
    s = initial_condition(EpicenterSource(GeoPoint(138.0, 33.0)), bathy)
    rng = np.random.default_rng(3)
    u = rng.normal(scale=0.1, size=s.u.shape) * m.umask
    v = rng.normal(scale=0.1, size=s.v.shape) * m.vmask
    dt = 30.0
    return (s.h, u, v, m.zb, m.ocean, m.umask, m.vmask, m.dx_c, m.dx_v, m.dy, m.area, m.f_u, m.f_v,
            m.w_c * 0.06, m.w_u * 0.06, m.w_v * 0.06, 0.985 * consts.g, consts.c_d, default_nu4(m, dt), dt)


@pytest.mark.parametrize("boundary", ["closed", "sponge"])
def test_numba_matches_numpy(boundary):
    args = _args(boundary)
    a = _swe_kernels.step_numpy(*args)
    b = _swe_kernels.step_numba(*args)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)


def test_simulations_agree_across_paths():
    bathy = synth_bathymetry(GridSpec(130.0, 160.0, 20.0, 50.0, 32, 32), "seamount")
    src = EpicenterSource(GeoPoint(140.0, 30.0))
    a = simulate(src, bathy, duration=3600, out_interval=600, use_numba=False)
    b = simulate(src, bathy, duration=3600, out_interval=600, use_numba=True)
    np.testing.assert_allclose(a.eta_frames, b.eta_frames, rtol=0, atol=1e-10)


def test_env_flag(monkeypatch):
    monkeypatch.setenv(_accel.ENV_FLAG, "0")
    assert not _accel.numba_enabled()
    monkeypatch.setenv(_accel.ENV_FLAG, "1")
    assert _accel.numba_enabled()
