"""Virtual waveforms by time-aligned, depth-corrected station interpolation.

The estimate at an unsensed point blends nearby station records:

1. arrival time of each station at a fixed threshold,
2. inverse-distance interpolation of those arrivals to the virtual point,
3. a whole-sample shift of every record onto the interpolated arrival,
4. Green's-law amplitude correction ``(H_station / H_virtual) ** 0.25``,
5. an inverse-distance weighted average with weights ``1 / max(d, d_floor)``.

``d_floor`` is one grid-cell diagonal at the virtual point.  Stations closer
than ``d_floor`` form a coincident set that is used on its own, so a
virtual point placed on a station reproduces that station's record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AntipodalError, NoSignalError, OnLandError
from .geo import BathymetryGrid, GeoPoint, SensorNetwork, haversine_distance
from .metrics import ARRIVAL_THRESHOLD, arrival_time
from .waveform import WaveformSeries


def midpoint(a: GeoPoint, b: GeoPoint) -> GeoPoint:
    """Great-circle midpoint; symmetric in its arguments."""
    if a == b:
        return a
    s = a.unit_vector() + b.unit_vector()
    n = float(np.linalg.norm(s))
    if n < 1e-12:
        raise AntipodalError(f"({a.lon}, {a.lat}) and ({b.lon}, {b.lat}) are antipodal")
    m = GeoPoint.from_unit_vector(s / n)
    # keep the 0-360 convention when the inputs use it
    if max(a.lon, b.lon) > 180.0 and m.lon < 0.0:
        m = GeoPoint(m.lon + 360.0, m.lat)
    return m


@dataclass(frozen=True)
class VirtualPointSpec:
    location: GeoPoint
    station_ids: tuple[str, ...]
    id: str = ""

    def __post_init__(self):
        ids = tuple(str(s) for s in self.station_ids)
        if not ids:
            raise ValueError("a virtual point needs at least one contributing station")
        object.__setattr__(self, "station_ids", ids)

    @classmethod
    def from_pair(cls, network: SensorNetwork, a: str, b: str) -> "VirtualPointSpec":
        """Midpoint of two sensors; the pair order does not matter."""
        a, b = sorted((str(a), str(b)))
        loc = midpoint(network.location(a), network.location(b))
        return cls(loc, (a, b), f"{a}-{b}")


def _shift(eta: np.ndarray, k: int) -> np.ndarray:
    """``out[n] = eta[n - k]``; samples shifted in from outside are 0."""
    out = np.zeros_like(eta)
    n = eta.size
    if k >= 0:
        if k < n:
            out[k:] = eta[: n - k]
    elif -k < n:
        out[: n + k] = eta[-k:]
    return out


def lihfp_virtual_waveform(
    stations: Sequence[WaveformSeries],
    v: VirtualPointSpec,
    bathy: BathymetryGrid,
    arrival_threshold: float = ARRIVAL_THRESHOLD,
) -> WaveformSeries:
    """Estimate the waveform at ``v.location`` from the records in ``stations``.

    ``stations`` are matched to ``v.station_ids`` by their ``id`` when every
    contributing id is present; otherwise all given records are used.
    """
    if not bathy.is_ocean(v.location):
        raise OnLandError(f"virtual point {v.id or v.location} is on land")
    by_id = {s.id: s for s in stations}
    if all(i in by_id for i in v.station_ids):
        chosen = [by_id[i] for i in sorted(v.station_ids)]
    else:
        chosen = sorted(stations, key=lambda s: s.id)
    if not chosen:
        raise NoSignalError("no station records supplied")
    times = chosen[0].times
    for s in chosen[1:]:
        if s.times.shape != times.shape or not np.array_equal(s.times, times):
            raise ValueError("station records must share one time axis")

    live = [(s, arrival_time(s, arrival_threshold)) for s in chosen]
    live = [(s, t) for s, t in live if t is not None]
    if not live:
        raise NoSignalError(f"no station detects an arrival at {arrival_threshold} m")

    d_floor = bathy.cell_diagonal(v.location.lat)
    dist = np.array([haversine_distance(s.location, v.location) for s, _ in live])
    near = dist <= d_floor
    if near.any():
        live = [x for x, keep in zip(live, near) if keep]
        dist = dist[near]
    w = 1.0 / np.maximum(dist, d_floor)
    w = w / w.sum()

    arrivals = np.array([t for _, t in live])  # minutes
    t_v = float(np.dot(w, arrivals))
    dt = chosen[0].interval
    h_v = bathy.local_depth(v.location)

    out = np.zeros_like(times)
    for wi, (s, t_i) in zip(w, live):
        k = int(round((t_v - t_i) * 60.0 / dt)) if dt > 0 else 0
        green = (bathy.local_depth(s.location) / h_v) ** 0.25
        out += wi * green * _shift(s.eta, k)
    return WaveformSeries(times.copy(), out, v.location, v.id)

