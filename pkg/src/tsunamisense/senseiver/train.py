"""Training loop, full-field reconstruction and checkpoint files."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DivergenceError
from ..geo import BathymetryGrid, GeoPoint, SensorNetwork, apply_stencil, interp_stencil
from ..swe import FrameSeries
from .config import ModelConfig, TrainSchedule
from .encoding import encode_ocean_cells, encode_positions
from .model import Batch, ModelParams, _decode, _encode, gradients, init_params
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass
class FramePool:
    """All frames of a dataset flattened to ocean cells, plus sensor readings."""

    ocean_eta: np.ndarray  # (F, n_ocean) metres
    readings: np.ndarray  # (F, N) metres
    times: np.ndarray  # (F,) seconds
    source: list[tuple[int, int]]  # (series index, frame index) per pooled frame

    @classmethod
    def build(cls, dataset: Sequence[FrameSeries], sensors: SensorNetwork, bathy: BathymetryGrid) -> "FramePool":
        idx = bathy.ocean_indices()
        stencil = interp_stencil(bathy, sensors.locations)
        eta, reads, times, source = [], [], [], []
        for s, series in enumerate(dataset):
            flat = series.eta_frames.reshape(len(series), -1)
            eta.append(flat[:, idx])
            reads.append(apply_stencil(series.eta_frames, stencil))
            times.append(series.times)
            source.extend((s, k) for k in range(len(series)))
        if not eta:
            n = idx.size
            return cls(np.zeros((0, n)), np.zeros((0, len(sensors))), np.zeros(0), [])
        return cls(np.concatenate(eta), np.concatenate(reads), np.concatenate(times), source)

    def __len__(self):
        return self.ocean_eta.shape[0]


def split_frames(nframes: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform random partition of frame indices (sorted within each part)."""
    perm = np.random.default_rng(seed).permutation(nframes)
    ntrain = int(round(train_fraction * nframes))
    return np.sort(perm[:ntrain]), np.sort(perm[ntrain:])


@dataclass
class TrainResult:
    params: ModelParams
    history: list[float]
    train_frames: np.ndarray
    held_frames: np.ndarray
    extra: dict = field(default_factory=dict)


def _sample_queries(rng, frame_eta, m, threshold):
    n_uniform = m - m // 2
    uni = rng.integers(0, frame_eta.size, size=n_uniform)
    wave = np.flatnonzero(np.abs(frame_eta) > threshold)
    if wave.size:
        biased = wave[rng.integers(0, wave.size, size=m // 2)]
    else:
        biased = rng.integers(0, frame_eta.size, size=m // 2)
    return np.concatenate([uni, biased])


def train(
    dataset: Sequence[FrameSeries],
    sensors: SensorNetwork,
    bathy: BathymetryGrid,
    cfg: ModelConfig,
    schedule: TrainSchedule,
    *,
    pool: FramePool | None = None,
    dtype=np.float32,
    log_every: int = 0,
) -> TrainResult:
    """Fit the encoder/decoder with Adam on a random 80% frame split.

    Each step draws ``batch_frames`` training frames; per frame half the
    queries are uniform over ocean cells and half over cells where
    ``|eta|`` exceeds ``schedule.wave_threshold``.  Fully determined by the
    seeds in ``cfg`` and ``schedule``.
    """
    pool = pool if pool is not None else FramePool.build(dataset, sensors, bathy)
    if len(pool) == 0:
        raise ValueError("training needs at least one frame")
    train_idx, held_idx = split_frames(len(pool), schedule.train_fraction, schedule.frame_split_seed)
    if train_idx.size == 0:
        raise ValueError("training split is empty")
    scale = float(np.max(np.abs(pool.ocean_eta[train_idx])))
    if not scale > 0:
        scale = 1.0
    params = init_params(cfg, dtype=dtype, scale=scale)
    history: list[float] = []
    if schedule.steps == 0:
        return TrainResult(params, history, train_idx, held_idx)

    a_s = encode_positions(sensors.locations, bathy, cfg).astype(dtype)
    a_ocean = encode_ocean_cells(bathy, cfg).astype(dtype)
    opt = AdamState.fresh(params, lr=schedule.lr)
    rng = np.random.default_rng(schedule.sample_seed)
    bsz = schedule.batch_frames
    m = schedule.queries_per_frame
    replace = train_idx.size < bsz
    for it in range(schedule.steps):
        frames = rng.choice(train_idx, size=bsz, replace=replace)
        q = np.stack([_sample_queries(rng, pool.ocean_eta[f], m, schedule.wave_threshold) for f in frames])
        truth = np.take_along_axis(pool.ocean_eta[frames], q, axis=1) / scale
        batch = Batch(
            values=(pool.readings[frames] / scale).astype(dtype),
            a_s=a_s,
            a_q=a_ocean[q],
            truth=truth.astype(dtype),
        )
        value, grads = gradients(params, batch)
        if not math.isfinite(value):
            raise DivergenceError(f"loss became non-finite at step {it}")
        history.append(value)
        lr = _lr_at(schedule, it)
        params, opt = adam_step(params, grads, opt, lr=lr)
        if log_every and (it % log_every == 0 or it == schedule.steps - 1):
            log.info("step %d loss %.6g lr %.3g", it, value, lr)
    return TrainResult(params, history, train_idx, held_idx)


def _lr_at(schedule: TrainSchedule, it: int) -> float:
    if schedule.lr_final_fraction >= 1.0 or schedule.steps <= 1:
        return schedule.lr
    frac = it / (schedule.steps - 1)
    lo = schedule.lr * schedule.lr_final_fraction
    return lo + 0.5 * (schedule.lr - lo) * (1.0 + math.cos(math.pi * frac))


# inference -----------------------------------------------------------------------


class Reconstructor:
    """Caches sensor and ocean-cell encodings for repeated inference."""

    def __init__(self, params: ModelParams, bathy: BathymetryGrid, sensors: SensorNetwork | Sequence[GeoPoint]):
        self.params = params
        self.bathy = bathy
        cfg = params.cfg
        locs = sensors.locations if isinstance(sensors, SensorNetwork) else list(sensors)
        self.sensor_stencil = interp_stencil(bathy, locs)
        self.a_s = encode_positions(locs, bathy, cfg).astype(params.dtype)
        self._a_ocean = None

    @property
    def a_ocean(self):
        if self._a_ocean is None:
            self._a_ocean = encode_ocean_cells(self.bathy, self.params.cfg).astype(self.params.dtype)
        return self._a_ocean

    def sample_sensors(self, eta_frames) -> np.ndarray:
        return apply_stencil(eta_frames, self.sensor_stencil)

    def latents(self, readings) -> np.ndarray:
        readings = np.atleast_2d(np.asarray(readings, dtype=np.float64))
        p = self.params
        return _encode(p.arrays, p.cfg, (readings / p.scale).astype(p.dtype), self.a_s)

    def at_queries(self, readings, a_q, *, frame_chunk: int = 16, query_chunk: int = 4096) -> np.ndarray:
        """Wave heights ``(B, M)`` in metres for readings ``(B, N)``."""
        readings = np.atleast_2d(np.asarray(readings, dtype=np.float64))
        p = self.params
        a_q = np.asarray(a_q, dtype=p.dtype)
        out = np.empty((readings.shape[0], a_q.shape[0]))
        for f0 in range(0, readings.shape[0], frame_chunk):
            z = self.latents(readings[f0:f0 + frame_chunk])
            for q0 in range(0, a_q.shape[0], query_chunk):
                out[f0:f0 + frame_chunk, q0:q0 + query_chunk] = _decode(p.arrays, p.cfg, z, a_q[q0:q0 + query_chunk])
        return out * p.scale

    def at_points(self, readings, points: Sequence[GeoPoint]) -> np.ndarray:
        a_q = encode_positions(points, self.bathy, self.params.cfg)
        return self.at_queries(readings, a_q)

    def fields(self, readings) -> np.ndarray:
        """Full grids ``(B, nlat, nlon)``; land cells are NaN."""
        readings = np.atleast_2d(np.asarray(readings, dtype=np.float64))
        vals = self.at_queries(readings, self.a_ocean)
        nlat, nlon = self.bathy.spec.shape
        out = np.full((readings.shape[0], nlat * nlon), np.nan)
        out[:, self.bathy.ocean_indices()] = vals
        return out.reshape(-1, nlat, nlon)


def reconstruct_field(params: ModelParams, readings, bathy: BathymetryGrid, sensors: SensorNetwork) -> np.ndarray:
    """Decode every ocean cell from one set of readings; land is NaN."""
    return Reconstructor(params, bathy, sensors).fields(np.asarray(readings)[None, :])[0]


# files ---------------------------------------------------------------------------


def write_checkpoint(params: ModelParams, path) -> Path:
    """JSON manifest at ``path`` plus LE float32 blocks in ``path.with_suffix('.bin')``."""
    path = Path(path)
    blocks = [{"name": k, "shape": list(v.shape)} for k, v in params.arrays.items()]
    manifest = {"config": params.cfg.to_dict(), "scale": params.scale, "dtype": "<f4", "blocks": blocks}
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    with path.with_suffix(".bin").open("wb") as fh:
        for v in params.arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())
    return path


def read_checkpoint(path, dtype=np.float32) -> ModelParams:
    path = Path(path)
    manifest = json.loads(path.read_text())
    cfg = ModelConfig.from_dict(manifest["config"])
    raw = np.fromfile(path.with_suffix(".bin"), dtype="<f4")
    arrays, off = {}, 0
    for blk in manifest["blocks"]:
        shape = tuple(blk["shape"])
        n = int(np.prod(shape))
        arrays[blk["name"]] = raw[off:off + n].reshape(shape).astype(dtype)
        off += n
    if off != raw.size:
        raise ValueError(f"{path}: checkpoint holds {raw.size} values, manifest describes {off}")
    return ModelParams(cfg, arrays, float(manifest["scale"]))


def write_loss_history(history: Sequence[float], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "loss"])
        for i, v in enumerate(history):
            wr.writerow([i, repr(float(v))])
    return path
