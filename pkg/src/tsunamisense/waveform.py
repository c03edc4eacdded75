"""Point time series of surface elevation and their CSV/JSON file format."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geo import GeoPoint


@dataclass(eq=False)
class WaveformSeries:
    times: np.ndarray  # s, uniform
    eta: np.ndarray  # m
    location: GeoPoint
    id: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.eta = np.asarray(self.eta, dtype=np.float64)
        if self.times.shape != self.eta.shape or self.times.ndim != 1:
            raise ValueError("times and eta must be 1-D and equally long")
        if not np.all(np.isfinite(self.eta)):
            raise ValueError("eta must be finite")
        if self.times.size > 1:
            d = np.diff(self.times)
            if not (np.all(d > 0) and np.allclose(d, d[0], rtol=1e-9, atol=0)):
                raise ValueError("waveform times must be uniform")

    def __len__(self):
        return self.eta.size

    @property
    def interval(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def with_eta(self, eta) -> "WaveformSeries":
        return WaveformSeries(self.times.copy(), eta, self.location, self.id)


def write_waveform(w: WaveformSeries, path) -> Path:
    """``<path>.csv`` with ``time_s,eta_m`` rows and a ``.json`` sidecar."""
    path = Path(path).with_suffix(".csv")
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["time_s", "eta_m"])
        for t, e in zip(w.times, w.eta):
            wr.writerow([repr(float(t)), repr(float(e))])
    sidecar = {"id": w.id, "lon": w.location.lon, "lat": w.location.lat}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return path


def read_waveform(path) -> WaveformSeries:
    path = Path(path).with_suffix(".csv")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    side = json.loads(path.with_suffix(".json").read_text())
    return WaveformSeries(data[:, 0], data[:, 1], GeoPoint(side["lon"], side["lat"]), str(side["id"]))
