"""Experiment configuration (JSON) and the seed plumbing derived from it."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..geo import BathymetryGrid, GeoPoint, GridSpec, SensorNetwork, read_bathymetry, sensor_network_from_records, synth_bathymetry
from ..senseiver.config import ModelConfig, TrainSchedule
from ..swe import PhysicalConstants


@dataclass(frozen=True)
class Epicenter:
    id: str
    location: GeoPoint

    def to_dict(self) -> dict:
        return {"id": self.id, "lon": self.location.lon, "lat": self.location.lat}


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec
    bathymetry: dict  # {"profile": name} or {"path": header.json}
    constants: PhysicalConstants
    train_epicenters: tuple[Epicenter, ...]
    test_epicenters: tuple[Epicenter, ...]
    sensors: tuple[dict, ...]  # [{"id", "lon", "lat"}]
    virtual_pairs: tuple[tuple[str, str], ...]
    model: ModelConfig = ModelConfig()
    schedule: TrainSchedule = TrainSchedule()
    out_dir: str = "out"
    seed: int = 0
    duration: float = 14400.0
    out_interval: float = 50.0
    boundary: str = "sponge"
    control_rows: bool = False
    render_frames: tuple[int, ...] = (60, 120, 180)
    render_range: float = 1.0  # m; eta in [-r, r] spans the gray scale
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        ids = [e.id for e in self.train_epicenters + self.test_epicenters]
        if len(set(ids)) != len(ids):
            raise ConfigError("epicenter ids must be unique")
        train_locs = {(e.location.lon, e.location.lat) for e in self.train_epicenters}
        for e in self.test_epicenters:
            if (e.location.lon, e.location.lat) in train_locs:
                raise ConfigError(f"test epicenter {e.id} coincides with a training epicenter")
        sensor_ids = {str(s["id"]) for s in self.sensors}
        for a, b in self.virtual_pairs:
            if a not in sensor_ids or b not in sensor_ids:
                raise ConfigError(f"virtual pair ({a}, {b}) references an unknown sensor")
            if a == b:
                raise ConfigError(f"virtual pair ({a}, {b}) repeats one sensor")
        if self.boundary not in ("closed", "sponge"):
            raise ConfigError(f"unknown boundary {self.boundary!r}")

    # seeds -----------------------------------------------------------------

    def seeded(self, seed: int | None = None) -> "ExperimentConfig":
        """Copy whose model and schedule seeds derive from the master seed."""
        seed = self.seed if seed is None else int(seed)
        init, split, sample = (int(s) for s in np.random.SeedSequence(seed).generate_state(3))
        return replace(
            self,
            seed=seed,
            model=replace(self.model, seed=init),
            schedule=replace(self.schedule, frame_split_seed=split, sample_seed=sample),
        )

    # materialisation ---------------------------------------------------------

    def build_bathymetry(self) -> BathymetryGrid:
        if "path" in self.bathymetry:
            bathy = read_bathymetry(Path(self.base_dir) / self.bathymetry["path"])
            if bathy.spec != self.grid:
                raise ConfigError("bathymetry raster grid differs from the configured grid")
            return bathy
        return synth_bathymetry(self.grid, self.bathymetry.get("profile", "flat"))

    def build_sensors(self, bathy: BathymetryGrid) -> SensorNetwork:
        return sensor_network_from_records(self.sensors, bathy)

    # serialisation ------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "bathymetry": dict(self.bathymetry),
            "constants": self.constants.to_dict(),
            "train_epicenters": [e.to_dict() for e in self.train_epicenters],
            "test_epicenters": [e.to_dict() for e in self.test_epicenters],
            "sensors": [dict(s) for s in self.sensors],
            "virtual_pairs": [list(p) for p in self.virtual_pairs],
            "model": self.model.to_dict(),
            "schedule": self.schedule.to_dict(),
            "out_dir": self.out_dir,
            "seed": self.seed,
            "duration": self.duration,
            "out_interval": self.out_interval,
            "boundary": self.boundary,
            "control_rows": self.control_rows,
            "render_frames": list(self.render_frames),
            "render_range": self.render_range,
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentConfig":
        base = Path(base_dir)
        try:
            sensors = d["sensors"]
            if isinstance(sensors, str):
                sensors = json.loads((base / sensors).read_text())
            return cls(
                grid=GridSpec.from_dict(d["grid"]),
                bathymetry=dict(d.get("bathymetry", {"profile": "flat"})),
                constants=PhysicalConstants.from_dict(d.get("constants", {})),
                train_epicenters=_epicenters(d.get("train_epicenters", [])),
                test_epicenters=_epicenters(d.get("test_epicenters", [])),
                sensors=tuple({"id": str(s["id"]), "lon": float(s["lon"]), "lat": float(s["lat"])} for s in sensors),
                virtual_pairs=tuple((str(a), str(b)) for a, b in d.get("virtual_pairs", [])),
                model=ModelConfig.from_dict(d.get("model", {})),
                schedule=TrainSchedule.from_dict(d.get("schedule", {})),
                out_dir=str(d.get("out_dir", "out")),
                seed=int(d.get("seed", 0)),
                duration=float(d.get("duration", 14400.0)),
                out_interval=float(d.get("out_interval", 50.0)),
                boundary=str(d.get("boundary", "sponge")),
                control_rows=bool(d.get("control_rows", False)),
                render_frames=tuple(int(k) for k in d.get("render_frames", (60, 120, 180))),
                render_range=float(d.get("render_range", 1.0)),
                base_dir=str(base),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc


def _epicenters(recs) -> tuple[Epicenter, ...]:
    return tuple(Epicenter(str(r["id"]), GeoPoint(float(r["lon"]), float(r["lat"]))) for r in recs)


def load_config(path=None) -> ExperimentConfig:
    """Read a JSON config; ``None`` loads the packaged desk-scale default."""
    if path is None:
        ref = resources.files("tsunamisense") / "configs" / "desk.json"
        with resources.as_file(ref) as p:
            return ExperimentConfig.from_dict(json.loads(Path(p).read_text()), Path(p).parent)
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data, path.parent)
