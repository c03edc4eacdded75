"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is echoed in the terminal summary.
Criteria 9 and 10 share one full desk-config pipeline run; 10 adds a second.
"""

import json
import math
import time

import numpy as np
import pytest

from tsunamisense.geo import EARTH_RADIUS, BathymetryGrid, GeoPoint, GridSpec, SensorNetwork, synth_bathymetry
from tsunamisense.lihfp import VirtualPointSpec, lihfp_virtual_waveform
from tsunamisense.metrics import (
    FrameError,
    arrival_time,
    continuity_residual,
    mean_defined,
    median_filter,
    recon_error_frame,
    trigger_time,
)
from tsunamisense.pipeline import STAGES, load_config
from tsunamisense.senseiver import (
    Batch,
    ModelConfig,
    Reconstructor,
    TrainSchedule,
    decode,
    encode,
    encode_positions,
    forward,
    gradients,
    init_params,
    train,
)
from tsunamisense.swe import (
    EpicenterSource,
    FrameSeries,
    GridMetrics,
    PhysicalConstants,
    SWEState,
    simulate,
    stable_dt,
    step,
    surface_elevation,
)
from tsunamisense.waveform import WaveformSeries

pytestmark = pytest.mark.acceptance

DESK = GridSpec(130.0, 160.0, 20.0, 50.0, 96, 96)


# 1 -------------------------------------------------------------------------------------------


def _front_positions(frames, x, threshold=0.03):
    fronts = np.full(len(frames), np.nan)
    for k, row in enumerate(frames):
        idx = np.flatnonzero(np.abs(row) >= threshold)
        if idx.size == 0 or idx.max() + 1 >= row.size:
            continue
        j = idx.max()
        a1, a2 = abs(row[j]), abs(row[j + 1])
        fronts[k] = x[j] + (a1 - threshold) / (a1 - a2) * (x[j + 1] - x[j])
    return fronts


def test_c01_dispersion(verdict):
    # a meridional ridge near the equator gives a plane wave travelling east
    spec = GridSpec(-15.0, 15.0, -15.0, 15.0, 96, 96)
    bathy = synth_bathymetry(spec, "flat")
    consts = PhysicalConstants(Omega=0.0, c_d=0.0, nu4=0.0)
    lon2, _ = np.meshgrid(spec.lon_centers, spec.lat_centers)
    eta0 = 0.5 * np.exp(-((lon2 + 8.0) ** 2) / 2.0)
    state = SWEState(h=-bathy.z_b + eta0, u=np.zeros((96, 97)), v=np.zeros((97, 96)))
    t0 = time.perf_counter()
    fs = simulate(EpicenterSource(GeoPoint(0.0, 0.0)), bathy, consts, 5000, 50, boundary="closed",
                  initial_state=state)
    elapsed = time.perf_counter() - t0
    row = 48
    x = EARTH_RADIUS * np.radians(spec.lon_centers) * math.cos(math.radians(spec.lat_centers[row]))
    fronts = _front_positions(fs.eta_frames[:, row, :], x)
    k1, k2 = 20, 90
    speed = (fronts[k2] - fronts[k1]) / (fs.times[k2] - fs.times[k1])
    ok = abs(speed - 198.045) <= 0.02 * 198.045 and elapsed < 60
    verdict(ok, f"front speed {speed:.2f} m/s vs 198.045, {elapsed:.1f} s")


# 2 -------------------------------------------------------------------------------------------


def test_c02_conservation(verdict):
    bathy = synth_bathymetry(DESK, "seamount")
    consts = PhysicalConstants()
    fs = simulate(EpicenterSource(GeoPoint(142.0, 38.0)), bathy, consts, 14400, 50, boundary="closed")
    area = GridMetrics(bathy, consts, "closed").cell_area()
    vols = np.array([np.sum(np.where(bathy.ocean, e - bathy.z_b, 0.0) * area) for e in fs.eta_frames])
    drift = float(np.max(np.abs(vols - vols[0])) / vols[0])

    rest_err = 0.0
    for use_numba in (False, True):
        m = GridMetrics(bathy, consts, "closed")
        s = SWEState(np.where(bathy.ocean, -bathy.z_b, 0.0), np.zeros((96, 97)), np.zeros((97, 96)))
        dt = stable_dt(bathy, consts, 50.0, m)
        for _ in range(50):
            s = step(s, bathy, consts, dt, metrics=m, use_numba=use_numba)
        rest_err = max(rest_err, float(np.max(np.abs(surface_elevation(s, bathy)))),
                       float(np.max(np.abs(s.u))), float(np.max(np.abs(s.v))))
    ok = len(fs) == 289 and drift < 1e-9 and rest_err < 1e-12
    verdict(ok, f"{len(fs)} frames, volume drift {drift:.2e}, rest state {rest_err:.1e}")


# 3 -------------------------------------------------------------------------------------------


def test_c03_gradient_oracle(verdict):
    cfg = ModelConfig(num_freq_bands=2, max_freq=4.0, latent_rows=4, latent_dim=8, num_encoder_blocks=1,
                      num_heads=2, mlp_hidden=16, seed=3)
    dt = np.longdouble
    params = init_params(cfg, dtype=dt)
    rng = np.random.default_rng(0)
    p = cfg.encoding_dim
    b = Batch(rng.uniform(-1, 1, (2, 5)).astype(dt), rng.uniform(-1, 1, (5, p)).astype(dt),
              rng.uniform(-1, 1, (2, 7, p)).astype(dt), rng.uniform(-1, 1, (2, 7)).astype(dt))

    def objective():
        pred, _ = forward(params, b.values, b.a_s, b.a_q)
        return np.mean((pred - b.truth) ** 2)

    t0 = time.perf_counter()
    _, grads = gradients(params, b)
    h = dt(1e-4)
    worst, checked = 0.0, 0
    for name in params:
        arr = params.arrays[name]
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = objective()
            arr[idx] = old - h
            dn = objective()
            arr[idx] = old
            fd = (up - dn) / (2 * h)
            an = grads[name][idx]
            worst = max(worst, float(abs(fd - an) / max(abs(fd), abs(an), 1e-12)))
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = params.count() <= 10_000 and worst < 1e-4 and elapsed < 300
    verdict(ok, f"{checked} parameters, worst relative error {worst:.2e}, {elapsed:.0f} s")


# 4 -------------------------------------------------------------------------------------------


def test_c04_overfit(verdict):
    spec = GridSpec(130.0, 160.0, 20.0, 50.0, 48, 48)
    bathy = synth_bathymetry(spec, "seamount")
    fs = simulate(EpicenterSource(GeoPoint(142.0, 36.0)), bathy, PhysicalConstants(), 14400, 50)
    sel = np.arange(8) * 30 + 20
    frames = FrameSeries(spec, fs.times[sel], fs.eta_frames[sel])
    rng = np.random.default_rng(0)
    pts = zip(rng.uniform(135, 155, 8), rng.uniform(25, 45, 8))
    net = SensorNetwork(tuple((f"S{i}", GeoPoint(float(lo), float(la))) for i, (lo, la) in enumerate(pts)))
    sch = TrainSchedule(steps=2000, batch_frames=8, queries_per_frame=256, lr=1e-3, train_fraction=1.0,
                        lr_final_fraction=0.05)
    t0 = time.perf_counter()
    res = train([frames], net, bathy, ModelConfig(), sch)
    rec = Reconstructor(res.params, bathy, net)
    pred = rec.fields(rec.sample_sensors(frames.eta_frames))
    elapsed = time.perf_counter() - t0
    errs = [recon_error_frame(frames.eta_frames[k], pred[k], ocean=bathy.ocean).value for k in range(8)]
    mean = float(np.mean(errs))
    ok = mean < 5e-2 and elapsed < 600
    verdict(ok, f"mean error {mean:.4f}, worst frame {max(errs):.4f}, {elapsed:.0f} s")


# 5 -------------------------------------------------------------------------------------------


def test_c05_invariances(verdict):
    cfg = ModelConfig(seed=1)
    params = init_params(cfg, dtype=np.float64)
    rng = np.random.default_rng(2)
    n = 8
    s, a = rng.normal(size=n), rng.uniform(-1, 1, (n, cfg.encoding_dim))
    worst_perm = 0.0
    for _ in range(5):
        perm = rng.permutation(n)
        z1, z2 = encode(s, a, params), encode(s[perm], a[perm], params)
        worst_perm = max(worst_perm, float(np.max(np.abs(z1 - z2)) / np.max(np.abs(z1))))

    z = encode(s, a, params)
    q = rng.uniform(-1, 1, (50, cfg.encoding_dim))
    whole = decode(z, q, params)
    worst_part = 0.0
    for cut in (1, 17, 33, 49):
        parts = np.concatenate([decode(z, q[:cut], params), decode(z, q[cut:], params)])
        worst_part = max(worst_part, float(np.max(np.abs(whole - parts)) / np.max(np.abs(whole))))

    bathy = synth_bathymetry(DESK, "seamount")
    pts = [GeoPoint(float(lo), float(la)) for lo, la in zip(rng.uniform(130, 160, 500), rng.uniform(20, 50, 500))]
    enc = encode_positions(pts, bathy, cfg)
    bound = float(np.max(np.abs(enc)))
    ok = worst_perm < 1e-6 and worst_part < 1e-6 and bound <= 1.0 and enc.shape[1] == 195
    verdict(ok, f"permutation {worst_perm:.1e}, query partition {worst_part:.1e}, max |encoding| {bound:.3f}")


# 6 -------------------------------------------------------------------------------------------


def _pulse(center, amp=0.5, n=160):
    k = np.arange(n)
    return amp * np.exp(-0.5 * ((k - center) / 4.0) ** 2)


def _station(sid, lon, lat, eta):
    return WaveformSeries(np.arange(len(eta)) * 50.0, eta, GeoPoint(lon, lat), sid)


def test_c06_lihfp_oracles(verdict):
    flat = synth_bathymetry(GridSpec(130.0, 160.0, 20.0, 50.0, 32, 32), "flat")
    a = _station("A", 140.0, 30.0, _pulse(40))
    b = _station("B", 150.0, 40.0, _pulse(70, amp=0.8))
    coincident = all(
        np.array_equal(lihfp_virtual_waveform([a, b], VirtualPointSpec(s.location, ("A", "B")), flat).eta, s.eta)
        for s in (a, b)
    )

    spec = GridSpec(130.0, 160.0, 20.0, 50.0, 30, 30)
    z = np.full(spec.shape, -4000.0)
    z[:, 15:] = -250.0
    step_bathy = BathymetryGrid(spec, z)
    s = _station("A", spec.lon_centers[3], spec.lat_centers[10], _pulse(50))
    out = lihfp_virtual_waveform([s], VirtualPointSpec(spec.cell_center(10, 25), ("A",)), step_bathy)
    green = (4000.0 / 250.0) ** 0.25
    green_ok = green == 2.0 and np.array_equal(out.eta, 2.0 * s.eta)

    recs = [("A", 138.0, 35.0, 40, 0.5), ("B", 152.0, 38.0, 70, 0.9), ("C", 145.0, 45.0, 55, 0.4)]
    v = VirtualPointSpec(GeoPoint(144.0, 37.0), ("A", "B", "C"))
    base = lihfp_virtual_waveform([_station(i, lo, la, _pulse(c, amp)) for i, lo, la, c, amp in recs], v, flat)
    worst_shift = 0
    for lag in (1, 7, 20):
        lagged = lihfp_virtual_waveform([_station(i, lo, la, _pulse(c + lag, amp)) for i, lo, la, c, amp in recs],
                                        v, flat)
        worst_shift = max(worst_shift, abs(round((arrival_time(lagged) - arrival_time(base)) * 60 / 50) - lag))
    ok = coincident and green_ok and worst_shift <= 1
    verdict(ok, f"coincidence exact {coincident}, Green factor {green}, shift error {worst_shift} samples")


# 7 -------------------------------------------------------------------------------------------


def test_c07_metric_oracles(verdict):
    p = GeoPoint(140.0, 30.0)
    med = median_filter(WaveformSeries(np.arange(3) * 50.0, np.array([1.0, 9.0, 2.0]), p), 3).eta.tolist()
    truth = np.random.default_rng(0).normal(size=(12, 12))
    offset = recon_error_frame(truth, truth + 0.1 * np.max(np.abs(truth))).value
    errs = [FrameError(k * 50.0, v, 1) for k, v in enumerate([0.5, 0.09, 0.2, 0.05, 0.04])]
    trig = trigger_time(errs)
    ok = med == [1.0, 2.0, 2.0] and offset == pytest.approx(0.1, rel=1e-12) and trig == 2.5
    verdict(ok, f"median {med}, offset error {offset!r}, trigger {trig} min")


# 8 -------------------------------------------------------------------------------------------


def test_c08_physics_residual(verdict):
    bathy = synth_bathymetry(DESK, "seamount")
    fs = simulate(EpicenterSource(GeoPoint(142.0, 38.0)), bathy, PhysicalConstants(), 14400, 50,
                  boundary="closed", store_velocity=True)
    mean = mean_defined(continuity_residual(fs, bathy))
    n = 5
    rest = FrameSeries(DESK, np.arange(n) * 50.0, np.zeros((n, 96, 96)), np.zeros((n, 96, 97)),
                       np.zeros((n, 97, 96)))
    rest_vals = [r for r in continuity_residual(rest, bathy) if r is not None]
    ok = mean is not None and mean < 5e-2 and rest_vals and all(r == 0.0 for r in rest_vals)
    verdict(ok, f"mean normalised residual {mean:.3e}, rest state {max(rest_vals)}")


# 9 and 10 ------------------------------------------------------------------------------------


def _run_pipeline(cfg, out):
    t0 = time.perf_counter()
    for fn in STAGES.values():
        fn(cfg, out)
    return time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    cfg = load_config().seeded()
    out = tmp_path_factory.mktemp("desk_a")
    return cfg, out, _run_pipeline(cfg, out)


def test_c09_directional_comparison(verdict, desk_run):
    cfg, out, elapsed = desk_run
    rows = json.loads((out / "compare" / "report.json").read_text())["rows"]
    by = {(r["epicenter_id"], r["virtual_id"], r["method"]): r for r in rows}
    cells = sorted({(e, v) for e, v, _ in by})
    arr_wins = sum(by[c + ("senseiver",)]["arrival_mae_min"] < by[c + ("lihfp",)]["arrival_mae_min"] for c in cells)
    wf_wins = sum(by[c + ("senseiver",)]["waveform_mae_m"] < by[c + ("lihfp",)]["waveform_mae_m"] for c in cells)
    ok = len(cells) == 8 and arr_wins >= 5 and wf_wins >= 5 and elapsed < 1800
    verdict(ok, f"arrival wins {arr_wins}/{len(cells)}, waveform wins {wf_wins}/{len(cells)}, "
                f"pipeline {elapsed / 60:.1f} min")


def test_c10_determinism(verdict, desk_run, tmp_path):
    cfg, first, _ = desk_run
    _run_pipeline(cfg, tmp_path)
    files = ["model/checkpoint.bin", "model/checkpoint.json", "compare/report.csv"]
    for e in list(cfg.train_epicenters) + list(cfg.test_epicenters):
        files.append(f"dataset/{e.id}/frames.bin")
    for e in cfg.test_epicenters:
        files += [f"recon/{e.id}/frames.bin", f"recon/{e.id}/errors.csv"]
    files += [str(p.relative_to(first)) for p in sorted((first / "compare" / "waveforms").rglob("*.csv"))]
    differing = [f for f in files if (first / f).read_bytes() != (tmp_path / f).read_bytes()]
    verdict(not differing, f"{len(files)} files compared, {len(differing)} differ")
