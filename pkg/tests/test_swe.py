import math

import numpy as np
import pytest

from tsunamisense.errors import BlowUpError, OnLandError
from tsunamisense.geo import EARTH_RADIUS, BathymetryGrid, GeoPoint, GridSpec, synth_bathymetry
from tsunamisense.swe import (
    EpicenterSource,
    FrameSeries,
    GridMetrics,
    PhysicalConstants,
    SWEState,
    coriolis_parameter,
    initial_condition,
    read_frame_series,
    simulate,
    stable_dt,
    staggered_energy,
    step,
    surface_elevation,
    total_volume,
    write_frame_series,
)


def test_coriolis_examples():
    assert coriolis_parameter(0.0) == 0.0
    assert coriolis_parameter(90.0) == pytest.approx(1.4584e-4, rel=1e-12)
    assert coriolis_parameter(45.0) == pytest.approx(1.0312e-4, abs=1e-8)


def test_initial_condition_profile():
    # place a cell center exactly 1/sqrt(250) rad north of the epicenter cell
    d = math.degrees(1.0 / math.sqrt(250.0)) / 4
    spec = GridSpec(140.0, 140.0 + 16 * d, 20.0, 20.0 + 16 * d, 16, 16)
    bathy = synth_bathymetry(spec, "flat")
    src = EpicenterSource(spec.cell_center(4, 8))
    eta = surface_elevation(initial_condition(src, bathy), bathy)
    assert eta[4, 8] == pytest.approx(5.0, rel=1e-12)
    assert eta[8, 8] == pytest.approx(5.0 * math.exp(-1.0), rel=1e-9)
    assert eta[8, 8] == pytest.approx(1.8394, abs=1e-4)


def test_initial_condition_matches_independent_formula(spec, flat):
    src = EpicenterSource(GeoPoint(143.3, 37.1), amplitude=2.0, width_param=120.0)
    eta = surface_elevation(initial_condition(src, flat), flat)
    lon2, lat2 = np.meshgrid(spec.lon_centers, spec.lat_centers)
    p = np.stack([np.cos(np.radians(lat2)) * np.cos(np.radians(lon2)),
                  np.cos(np.radians(lat2)) * np.sin(np.radians(lon2)), np.sin(np.radians(lat2))], -1)
    r = np.arccos(np.clip(p @ src.x0.unit_vector(), -1, 1))
    assert np.allclose(eta, 2.0 * np.exp(-((120.0 * r * r) ** 4)), atol=1e-9)


def test_epicenter_on_land(island):
    with pytest.raises(OnLandError):
        initial_condition(EpicenterSource(island.spec.cell_center(15, 15)), island)
    with pytest.raises(OnLandError):
        simulate(EpicenterSource(GeoPoint(0.0, 0.0)), island, duration=0)


def test_frame_count_and_zero_duration(flat):
    src = EpicenterSource(GeoPoint(145.0, 35.0))
    fs = simulate(src, flat, duration=14400, out_interval=50)
    assert len(fs) == 289 and fs.times[-1] == 14400.0
    zero = simulate(src, flat, duration=0)
    assert len(zero) == 1
    assert np.array_equal(zero.eta_frames[0], surface_elevation(initial_condition(src, flat), flat))
    with pytest.raises(ValueError):
        simulate(src, flat, duration=100, out_interval=30)


@pytest.mark.parametrize("use_numba", [False, True])
@pytest.mark.parametrize("boundary", ["closed", "sponge"])
def test_rest_state_is_fixed_point(island, use_numba, boundary):
    consts = PhysicalConstants()
    m = GridMetrics(island, consts, boundary)
    nlat, nlon = island.spec.shape
    h = np.where(island.ocean, -island.z_b, 0.0)
    s = SWEState(h, np.zeros((nlat, nlon + 1)), np.zeros((nlat + 1, nlon)))
    dt = stable_dt(island, consts, 50.0, m)
    for _ in range(20):
        s = step(s, island, consts, dt, metrics=m, use_numba=use_numba)
    assert np.max(np.abs(surface_elevation(s, island))) < 1e-12
    assert np.max(np.abs(s.u)) < 1e-12 and np.max(np.abs(s.v)) < 1e-12


def test_mass_conserved_closed(island):
    consts = PhysicalConstants()
    fs = simulate(EpicenterSource(GeoPoint(140.0, 30.0)), island, consts, 14400, 50, boundary="closed")
    m = GridMetrics(island, consts, "closed")
    area = m.cell_area()
    vols = [np.sum(np.where(island.ocean, e - island.z_b, 0.0) * area) for e in fs.eta_frames]
    assert max(abs(v - vols[0]) for v in vols) / vols[0] < 1e-9


def test_volume_exactly_conserved_per_step(flat):
    consts = PhysicalConstants()
    m = GridMetrics(flat, consts, "closed")
    s = initial_condition(EpicenterSource(GeoPoint(145.0, 35.0)), flat)
    v0 = total_volume(s, m)
    for _ in range(10):
        s = step(s, flat, consts, 60.0, metrics=m)
    assert abs(total_volume(s, m) - v0) / v0 < 1e-13


def test_energy_non_increasing_closed(island):
    consts = PhysicalConstants()
    m = GridMetrics(island, consts, "closed")
    dt = stable_dt(island, consts, 50.0, m)
    prev = initial_condition(EpicenterSource(GeoPoint(140.0, 30.0)), island)
    cur = step(prev, island, consts, dt, metrics=m)
    energies = [staggered_energy(prev, cur, island, consts, m)]
    for _ in range(150):
        prev, cur = cur, step(cur, island, consts, dt, metrics=m)
        energies.append(staggered_energy(prev, cur, island, consts, m))
    e = np.array(energies)
    assert np.all(np.diff(e) <= 1e-6 * e[:-1])
    assert e[-1] < e[0]


@pytest.mark.parametrize("boundary", ["closed", "sponge"])
def test_reflection_symmetry(boundary):
    spec = GridSpec(130.0, 160.0, -15.0, 15.0, 32, 32)
    bathy = synth_bathymetry(spec, "flat")
    consts = PhysicalConstants(Omega=0.0)
    fs = simulate(EpicenterSource(GeoPoint(145.0, 0.0)), bathy, consts, 3000, 500, boundary=boundary)
    for eta in fs.eta_frames:
        assert np.max(np.abs(eta - eta[:, ::-1])) < 1e-9
        assert np.max(np.abs(eta - eta[::-1, :])) < 1e-9


def test_blow_up_reports_cell(flat):
    consts = PhysicalConstants(c_d=0.0, nu4=0.0)
    s = initial_condition(EpicenterSource(GeoPoint(145.0, 35.0)), flat)
    m = GridMetrics(flat, consts)
    with pytest.raises(BlowUpError, match=r"cell \(i=\d+, j=\d+\)"):
        for _ in range(200):
            s = step(s, flat, consts, 5000.0, metrics=m)


def test_sponge_absorbs(flat):
    src = EpicenterSource(GeoPoint(145.0, 35.0))
    closed = simulate(src, flat, duration=14400, out_interval=3600, boundary="closed")
    sponge = simulate(src, flat, duration=14400, out_interval=3600, boundary="sponge")
    assert np.sum(sponge.eta_frames[-1] ** 2) < 0.5 * np.sum(closed.eta_frames[-1] ** 2)


def test_stable_dt_divides_interval(flat):
    consts = PhysicalConstants()
    m = GridMetrics(flat, consts)
    dt = stable_dt(flat, consts, 50.0, m)
    assert dt <= 0.5 * m.min_dx / math.sqrt(consts.g * 4000.0) + 1e-12
    assert 50.0 / dt == pytest.approx(round(50.0 / dt), abs=1e-9)


def test_frame_series_round_trip(tmp_path, island):
    fs = simulate(EpicenterSource(GeoPoint(140.0, 30.0)), island, duration=200, out_interval=50,
                  store_velocity=True)
    d = write_frame_series(fs, tmp_path / "run", extra_meta={"epicenter_id": "X"})
    raw = np.fromfile(d / "frames.bin", dtype="<f4")
    assert raw.size == 5 * 32 * 32
    back = read_frame_series(d)
    assert back.spec == fs.spec and np.array_equal(back.times, fs.times)
    assert np.array_equal(back.eta_frames, fs.eta_frames.astype(np.float32))
    assert back.has_velocity
    assert np.array_equal(back.v_frames, fs.v_frames.astype(np.float32))
    assert back.meta["epicenter_id"] == "X" and back.meta["epicenter"]["lon"] == 140.0


def test_frame_series_validates_times(spec):
    with pytest.raises(ValueError):
        FrameSeries(spec, np.array([0.0, 1.0, 3.0]), np.zeros((3, *spec.shape)))


def test_metric_terms(spec):
    m = GridMetrics(synth_bathymetry(spec, "flat"), PhysicalConstants())
    assert m.dy == pytest.approx(EARTH_RADIUS * math.radians(spec.dlat))
    assert m.dx_c[0] > m.dx_c[-1]  # cos(lat) shrinks zonal widths poleward
    assert not m.umask[:, 0].any() and not m.vmask[-1].any()
