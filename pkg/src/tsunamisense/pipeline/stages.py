"""Pipeline stages.  Each stage reads files written by earlier stages and
records what it wrote in ``<out>/manifests/<stage>.json``.

Layout under the output directory::

    inputs/     bathymetry.json/.bin, sensors.json
    dataset/    index.json, <epicenter id>/{meta.json, frames.bin}
    model/      checkpoint.json/.bin, loss.csv, context.json
    recon/      <epicenter id>/{meta.json, frames.bin, errors.csv, summary.json}
    compare/    report.csv, report.json, waveforms/<epicenter>/<virtual>_<method>.csv
    render/     <epicenter id>/f<frame>_{truth,recon,diff}.pgm
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import BlowUpError, GridMismatchError
from ..geo import (
    BathymetryGrid,
    GridSpec,
    SensorNetwork,
    apply_stencil,
    interp_stencil,
    load_sensor_network,
    read_bathymetry,
    save_sensor_network,
    write_bathymetry,
)
from ..lihfp import VirtualPointSpec, lihfp_virtual_waveform
from ..metrics import (
    ComparisonRow,
    EvalReport,
    arrival_time,
    max_amplitude,
    median_filter,
    read_frame_errors_csv,
    recon_error_frame,
    trigger_time,
    waveform_mae,
    write_frame_errors_csv,
)
from ..senseiver.train import Reconstructor, read_checkpoint, train, write_checkpoint, write_loss_history
from ..swe import EpicenterSource, FrameSeries, read_frame_series, simulate, write_frame_series
from ..waveform import WaveformSeries, write_waveform
from .config import ExperimentConfig

log = logging.getLogger(__name__)

TOOL_VERSION = "0.1.0"


@dataclass
class RunManifest:
    stage: str
    config_hash: str
    artifacts: dict[str, str] = field(default_factory=dict)  # name -> path relative to out
    started: float = 0.0
    finished: float = 0.0
    version: str = TOOL_VERSION

    def add(self, name: str, path: Path, root: Path) -> None:
        self.artifacts[name] = Path(path).relative_to(root).as_posix()

    def write(self, root: Path) -> Path:
        missing = [p for p in self.artifacts.values() if not (root / p).exists()]
        if missing:
            raise FileNotFoundError(f"manifest for {self.stage} references missing files: {missing}")
        self.finished = time.time()
        d = root / "manifests"
        d.mkdir(parents=True, exist_ok=True)
        path = d / f"{self.stage}.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def _manifest(stage: str, cfg: ExperimentConfig) -> RunManifest:
    return RunManifest(stage, cfg.hash(), started=time.time())


# shared inputs ---------------------------------------------------------------


def _inputs(out: Path) -> tuple[BathymetryGrid, SensorNetwork]:
    bathy = read_bathymetry(out / "inputs" / "bathymetry.json")
    return bathy, load_sensor_network(out / "inputs" / "sensors.json", bathy)


def _index(out: Path) -> dict:
    return json.loads((out / "dataset" / "index.json").read_text())


def _check_grid(spec: GridSpec, expected: GridSpec, what: str) -> None:
    if spec != expected:
        raise GridMismatchError(f"{what} grid {spec.to_dict()} differs from {expected.to_dict()}")


# simulate ---------------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig, out) -> Path:
    """One frame series per epicenter (training then test) under ``dataset/``."""
    out = Path(out)
    man = _manifest("simulate", cfg)
    inputs = out / "inputs"
    inputs.mkdir(parents=True, exist_ok=True)
    bathy = cfg.build_bathymetry()
    sensors = cfg.build_sensors(bathy)
    bpath = write_bathymetry(bathy, inputs / "bathymetry.json")
    man.add("bathymetry", bpath, out)
    man.add("bathymetry_bin", bpath.with_suffix(".bin"), out)
    man.add("sensors", save_sensor_network(sensors, inputs / "sensors.json"), out)

    ddir = out / "dataset"
    ddir.mkdir(parents=True, exist_ok=True)
    for role, group in (("train", cfg.train_epicenters), ("test", cfg.test_epicenters)):
        for epi in group:
            try:
                series = simulate(EpicenterSource(epi.location), bathy, cfg.constants, cfg.duration,
                                  cfg.out_interval, boundary=cfg.boundary)
            except BlowUpError as exc:
                raise BlowUpError(f"epicenter {epi.id}: {exc.detail}") from exc
            sdir = write_frame_series(series, ddir / epi.id, extra_meta={"epicenter_id": epi.id, "role": role})
            man.add(f"{epi.id}/meta", sdir / "meta.json", out)
            man.add(f"{epi.id}/frames", sdir / "frames.bin", out)
            log.info("simulated %s (%s): %d frames", epi.id, role, len(series))
    index = {
        "grid": cfg.grid.to_dict(),
        "train": [e.id for e in cfg.train_epicenters],
        "test": [e.id for e in cfg.test_epicenters],
    }
    ipath = ddir / "index.json"
    ipath.write_text(json.dumps(index, indent=2) + "\n")
    man.add("index", ipath, out)
    man.write(out)
    return ddir


def _load_series(out: Path, ids: Sequence[str], spec: GridSpec) -> list[FrameSeries]:
    series = [read_frame_series(out / "dataset" / i) for i in ids]
    for i, s in zip(ids, series):
        _check_grid(s.spec, spec, f"dataset {i}")
    return series


# train ------------------------------------------------------------------------------


def cmd_train(cfg: ExperimentConfig, out) -> Path:
    """Fit on the training epicenters' frames; writes the checkpoint and loss history."""
    out = Path(out)
    man = _manifest("train", cfg)
    bathy, sensors = _inputs(out)
    ids = _index(out)["train"]
    dataset = _load_series(out, ids, bathy.spec)
    res = train(dataset, sensors, bathy, cfg.model, cfg.schedule)
    mdir = out / "model"
    mdir.mkdir(parents=True, exist_ok=True)
    ck = write_checkpoint(res.params, mdir / "checkpoint.json")
    man.add("checkpoint", ck, out)
    man.add("checkpoint_bin", ck.with_suffix(".bin"), out)
    man.add("loss", write_loss_history(res.history, mdir / "loss.csv"), out)
    context = {
        "grid": bathy.spec.to_dict(),
        "sensors": [{"id": sid, "lon": p.lon, "lat": p.lat} for sid, p in sensors.sensors],
        "train_epicenters": ids,
        "train_frames": int(res.train_frames.size),
        "held_frames": int(res.held_frames.size),
    }
    cpath = mdir / "context.json"
    cpath.write_text(json.dumps(context, indent=2) + "\n")
    man.add("context", cpath, out)
    man.write(out)
    return ck


def _reconstructor(out: Path, bathy: BathymetryGrid, sensors: SensorNetwork) -> Reconstructor:
    mdir = out / "model"
    context = json.loads((mdir / "context.json").read_text())
    _check_grid(GridSpec.from_dict(context["grid"]), bathy.spec, "checkpoint")
    trained_ids = [s["id"] for s in context["sensors"]]
    if trained_ids != sensors.ids:
        raise GridMismatchError(f"checkpoint was trained on sensors {trained_ids}, network has {sensors.ids}")
    return Reconstructor(read_checkpoint(mdir / "checkpoint.json"), bathy, sensors)


# reconstruct -------------------------------------------------------------------------


def cmd_reconstruct(cfg: ExperimentConfig, out, epicenter_ids: Sequence[str] | None = None) -> Path:
    """Full-field reconstructions, per-frame errors and trigger times (test epicenters by default)."""
    out = Path(out)
    man = _manifest("reconstruct", cfg)
    bathy, sensors = _inputs(out)
    rec = _reconstructor(out, bathy, sensors)
    ids = list(_index(out)["test"] if epicenter_ids is None else epicenter_ids)
    rdir = out / "recon"
    for epi_id, truth in zip(ids, _load_series(out, ids, bathy.spec)):
        pred = rec.fields(rec.sample_sensors(truth.eta_frames))
        errors = [
            recon_error_frame(truth.eta_frames[k], pred[k], ocean=bathy.ocean, time=float(truth.times[k]))
            for k in range(len(truth))
        ]
        edir = rdir / epi_id
        write_frame_series(FrameSeries(truth.spec, truth.times, pred), edir,
                           extra_meta={"epicenter_id": epi_id, "kind": "reconstruction"})
        epath = write_frame_errors_csv(errors, edir / "errors.csv")
        defined = [e.value for e in errors if e.value is not None]
        summary = {
            "epicenter_id": epi_id,
            "frames": len(errors),
            "mean_error": float(np.mean(defined)) if defined else None,
            "trigger_time_min": trigger_time(errors),
        }
        spath = edir / "summary.json"
        spath.write_text(json.dumps(summary, indent=2) + "\n")
        for name, p in (("meta", edir / "meta.json"), ("frames", edir / "frames.bin"), ("errors", epath), ("summary", spath)):
            man.add(f"{epi_id}/{name}", p, out)
        log.info("reconstructed %s: mean error %s", epi_id, summary["mean_error"])
    man.write(out)
    return rdir


# compare ------------------------------------------------------------------------------


def _arrival_or_end(w: WaveformSeries) -> float:
    """Arrival in minutes; a record that never crosses counts as one interval past its end."""
    t = arrival_time(w)
    if t is None:
        return float(w.times[-1] + w.interval) / 60.0
    return t


def compare_waveforms(truth: WaveformSeries, est: WaveformSeries) -> tuple[float, float, float]:
    """Absolute arrival (min), max-amplitude (m) and mean waveform (m) errors."""
    return (
        abs(_arrival_or_end(est) - _arrival_or_end(truth)),
        abs(max_amplitude(est) - max_amplitude(truth)),
        waveform_mae(truth, est),
    )


def cmd_compare(cfg: ExperimentConfig, out) -> Path:
    """Truth, Senseiver and LIHFP waveforms at every virtual midpoint for each test epicenter."""
    out = Path(out)
    man = _manifest("compare", cfg)
    bathy, sensors = _inputs(out)
    rec = _reconstructor(out, bathy, sensors)
    ids = _index(out)["test"]
    vpoints = sorted({VirtualPointSpec.from_pair(sensors, a, b) for a, b in cfg.virtual_pairs}, key=lambda v: v.id)
    vstencil = interp_stencil(bathy, [v.location for v in vpoints]) if vpoints else None

    cdir = out / "compare"
    wdir = cdir / "waveforms"
    report = EvalReport()
    for epi_id, truth in zip(ids, _load_series(out, ids, bathy.spec)):
        errs_path = out / "recon" / epi_id / "errors.csv"
        if errs_path.exists():
            report.frame_errors[epi_id] = read_frame_errors_csv(errs_path)
        readings = rec.sample_sensors(truth.eta_frames)
        stations = [WaveformSeries(truth.times, readings[:, k], loc, sid)
                    for k, (sid, loc) in enumerate(sensors.sensors)]
        if not vpoints:
            continue
        true_v = apply_stencil(truth.eta_frames, vstencil)
        model_v = rec.at_points(readings, [v.location for v in vpoints])
        for k, v in enumerate(vpoints):
            w_true = WaveformSeries(truth.times, true_v[:, k], v.location, v.id)
            methods = {
                "senseiver": median_filter(WaveformSeries(truth.times, model_v[:, k], v.location, v.id)),
                "lihfp": lihfp_virtual_waveform(stations, v, bathy),
            }
            if cfg.control_rows:
                methods["truth"] = w_true
            vdir = wdir / epi_id
            vdir.mkdir(parents=True, exist_ok=True)
            p = write_waveform(w_true, vdir / f"{v.id}_truth")
            man.add(f"{epi_id}/{v.id}/truth", p, out)
            for method, w in methods.items():
                if method != "truth":
                    p = write_waveform(w, vdir / f"{v.id}_{method}")
                    man.add(f"{epi_id}/{v.id}/{method}", p, out)
                report.rows.append(ComparisonRow(epi_id, v.id, method, *compare_waveforms(w_true, w)))
    cdir.mkdir(parents=True, exist_ok=True)
    man.add("report_csv", report.write_csv(cdir / "report.csv"), out)
    man.add("report_json", report.write_json(cdir / "report.json"), out)
    man.write(out)
    return cdir


# render ----------------------------------------------------------------------------------

LAND_SHADE = 255


def gray_levels(field: np.ndarray, land: np.ndarray, vmax: float, signed: bool = True) -> np.ndarray:
    """Map a field to 0..254 (land -> 255), north row first.

    Signed fields span ``[-vmax, vmax]`` with zero at 127; unsigned fields
    span ``[0, vmax]`` with zero black.
    """
    f = np.nan_to_num(np.asarray(field, dtype=np.float64), nan=0.0)
    if signed:
        x = 127.0 + 127.0 * np.clip(f / vmax, -1.0, 1.0)
    else:
        x = 254.0 * np.clip(f / vmax, 0.0, 1.0)
    img = np.rint(x).astype(np.uint8)
    img[land] = LAND_SHADE
    return img[::-1]


def write_pgm(img: np.ndarray, path) -> Path:
    """Binary 8-bit PGM (P5)."""
    path = Path(path)
    h, w = img.shape
    with path.open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def cmd_render(cfg: ExperimentConfig, out) -> Path:
    """Truth / reconstruction / |difference| rasters for ``cfg.render_frames``."""
    out = Path(out)
    man = _manifest("render", cfg)
    bathy = read_bathymetry(out / "inputs" / "bathymetry.json")
    rdir = out / "render"
    recon_root = out / "recon"
    ids = sorted(p.name for p in recon_root.iterdir() if (p / "frames.bin").exists()) if recon_root.exists() else []
    vmax = cfg.render_range
    for epi_id in ids:
        truth = read_frame_series(out / "dataset" / epi_id)
        pred = read_frame_series(recon_root / epi_id)
        edir = rdir / epi_id
        edir.mkdir(parents=True, exist_ok=True)
        for k in cfg.render_frames:
            if not 0 <= k < len(truth):
                continue
            t, r = truth.eta_frames[k], pred.eta_frames[k]
            imgs = {
                "truth": gray_levels(t, bathy.mask, vmax),
                "recon": gray_levels(r, bathy.mask, vmax),
                "diff": gray_levels(np.abs(t - r), bathy.mask, vmax, signed=False),
            }
            for name, img in imgs.items():
                p = write_pgm(img, edir / f"f{k:04d}_{name}.pgm")
                man.add(f"{epi_id}/{k}/{name}", p, out)
    rdir.mkdir(parents=True, exist_ok=True)
    man.write(out)
    return rdir


STAGES = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "reconstruct": cmd_reconstruct,
    "compare": cmd_compare,
    "render": cmd_render,
}

