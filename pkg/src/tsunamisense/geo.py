"""Spatial substrate: lat-lon grid, bathymetry, sensors, distances.

Arrays are stored ``(nlat, nlon)`` with row 0 at the southern edge.  Cell
``(i, j)`` has its center at ``(lon_min + (j + 0.5) * dlon,
lat_min + (i + 0.5) * dlat)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NoWetPathError, OffGridError, OnLandError, SensorOnLandError

log = logging.getLogger(__name__)

EARTH_RADIUS = 6_371_000.0  # m
GRAVITY = 9.80665  # m s^-2
MIN_DEPTH_CLAMP = 10.0  # m; shallower cells are land


@dataclass(frozen=True)
class GeoPoint:
    """A point on the sphere, degrees.

    ``wrap`` picks the longitude convention applied at construction:
    ``None`` keeps the value (must lie in [-180, 360)), ``"pm180"`` maps into
    [-180, 180) and ``"0-360"`` into [0, 360).
    """

    lon: float
    lat: float
    wrap: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        lon, lat = float(self.lon), float(self.lat)
        if not -90.0 <= lat <= 90.0 or not math.isfinite(lat):
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if self.wrap == "pm180":
            lon = (lon + 180.0) % 360.0 - 180.0
        elif self.wrap == "0-360":
            lon = lon % 360.0
        elif self.wrap is not None:
            raise ValueError(f"unknown wrap convention {self.wrap!r}")
        if not -180.0 <= lon < 360.0:
            raise ValueError(f"longitude {lon} outside [-180, 360)")
        object.__setattr__(self, "lon", lon)
        object.__setattr__(self, "lat", lat)

    def unit_vector(self) -> np.ndarray:
        lam, phi = math.radians(self.lon), math.radians(self.lat)
        return np.array([math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi)])

    @classmethod
    def from_unit_vector(cls, xyz) -> "GeoPoint":
        x, y, z = (float(c) for c in xyz)
        lat = math.degrees(math.atan2(z, math.hypot(x, y)))
        lon = math.degrees(math.atan2(y, x))
        return cls(lon, lat)


@dataclass(frozen=True)
class GridSpec:
    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float
    nlon: int
    nlat: int

    def __post_init__(self):
        if self.nlon < 8 or self.nlat < 8:
            raise ValueError("grid needs at least 8 cells per axis")
        if not (self.lon_max > self.lon_min and self.lat_max > self.lat_min):
            raise ValueError("grid bounds must be increasing")
        if self.lat_min < -90.0 or self.lat_max > 90.0:
            raise ValueError("latitude bounds outside [-90, 90]")

    @property
    def dlon(self) -> float:
        return (self.lon_max - self.lon_min) / self.nlon

    @property
    def dlat(self) -> float:
        return (self.lat_max - self.lat_min) / self.nlat

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nlat, self.nlon)

    @property
    def lon_centers(self) -> np.ndarray:
        return self.lon_min + (np.arange(self.nlon) + 0.5) * self.dlon

    @property
    def lat_centers(self) -> np.ndarray:
        return self.lat_min + (np.arange(self.nlat) + 0.5) * self.dlat

    @property
    def lat_edges(self) -> np.ndarray:
        return self.lat_min + np.arange(self.nlat + 1) * self.dlat

    def contains(self, p: GeoPoint) -> bool:
        return self.lon_min <= p.lon <= self.lon_max and self.lat_min <= p.lat <= self.lat_max

    def cell_of(self, p: GeoPoint) -> tuple[int, int]:
        if not self.contains(p):
            raise OffGridError(f"point ({p.lon}, {p.lat}) outside grid")
        j = min(int((p.lon - self.lon_min) / self.dlon), self.nlon - 1)
        i = min(int((p.lat - self.lat_min) / self.dlat), self.nlat - 1)
        return i, j

    def cell_center(self, i: int, j: int) -> GeoPoint:
        return GeoPoint(self.lon_min + (j + 0.5) * self.dlon, self.lat_min + (i + 0.5) * self.dlat)

    def to_dict(self) -> dict:
        return {
            "nlon": self.nlon,
            "nlat": self.nlat,
            "lon_min": self.lon_min,
            "lon_max": self.lon_max,
            "lat_min": self.lat_min,
            "lat_max": self.lat_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            lon_min=float(d["lon_min"]),
            lon_max=float(d["lon_max"]),
            lat_min=float(d["lat_min"]),
            lat_max=float(d["lat_max"]),
            nlon=int(d["nlon"]),
            nlat=int(d["nlat"]),
        )


@dataclass(frozen=True, eq=False)
class BathymetryGrid:
    spec: GridSpec
    z_b: np.ndarray
    min_depth_clamp: float = MIN_DEPTH_CLAMP

    def __post_init__(self):
        z = np.array(self.z_b, dtype=np.float64)
        if z.shape != self.spec.shape:
            raise ValueError(f"z_b shape {z.shape} != grid shape {self.spec.shape}")
        if not np.all(np.isfinite(z)):
            raise ValueError("z_b must be finite")
        z.setflags(write=False)
        mask = z >= -self.min_depth_clamp
        mask.setflags(write=False)
        object.__setattr__(self, "z_b", z)
        object.__setattr__(self, "mask", mask)

    mask: np.ndarray = field(init=False, repr=False)

    @property
    def ocean(self) -> np.ndarray:
        return ~self.mask

    @property
    def depth(self) -> np.ndarray:
        """Clamped still-water depth ``max(-z_b, min_depth_clamp)``."""
        return np.maximum(-self.z_b, self.min_depth_clamp)

    @property
    def max_depth(self) -> float:
        return float(self.depth.max())

    def ocean_indices(self) -> np.ndarray:
        """Flat (row-major) indices of ocean cells, ascending."""
        return np.flatnonzero(self.ocean.ravel())

    def ocean_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Lon and lat arrays of all ocean cell centers in flat order."""
        lon2, lat2 = np.meshgrid(self.spec.lon_centers, self.spec.lat_centers)
        idx = self.ocean_indices()
        return lon2.ravel()[idx], lat2.ravel()[idx]

    def is_ocean(self, p: GeoPoint) -> bool:
        i, j = self.spec.cell_of(p)
        return bool(self.ocean[i, j])

    def local_depth(self, p: GeoPoint) -> float:
        """Clamped depth at ``p`` by bilinear interpolation over wet cells."""
        return max(sample_field(self.depth, self, p), self.min_depth_clamp)

    def snap_to_ocean(self, p: GeoPoint) -> GeoPoint:
        """Nearest ocean cell center (by great-circle distance)."""
        lon, lat = self.ocean_points()
        if lon.size == 0:
            raise OnLandError("grid has no ocean cells")
        d = _haversine_arrays(p.lon, p.lat, lon, lat)
        k = int(np.argmin(d))
        return GeoPoint(float(lon[k]), float(lat[k]))

    def cell_diagonal(self, lat: float) -> float:
        """Length of one cell diagonal at latitude ``lat``, meters."""
        dx = EARTH_RADIUS * math.cos(math.radians(lat)) * math.radians(self.spec.dlon)
        dy = EARTH_RADIUS * math.radians(self.spec.dlat)
        return math.hypot(dx, dy)


@dataclass(frozen=True)
class SensorNetwork:
    sensors: tuple[tuple[str, GeoPoint], ...]

    def __post_init__(self):
        ids = [s[0] for s in self.sensors]
        if len(set(ids)) != len(ids):
            raise ValueError("sensor ids must be unique")
        object.__setattr__(self, "sensors", tuple((str(i), p) for i, p in self.sensors))

    def __len__(self):
        return len(self.sensors)

    @property
    def ids(self) -> list[str]:
        return [s[0] for s in self.sensors]

    @property
    def locations(self) -> list[GeoPoint]:
        return [s[1] for s in self.sensors]

    def location(self, sensor_id: str) -> GeoPoint:
        for sid, p in self.sensors:
            if sid == sensor_id:
                return p
        raise KeyError(sensor_id)


# distances ------------------------------------------------------------------


def _haversine_arrays(lon1, lat1, lon2, lat2):
    lam1, phi1, lam2, phi2 = map(np.radians, (lon1, lat1, lon2, lat2))
    a = np.sin((phi2 - phi1) / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin((lam2 - lam1) / 2) ** 2
    return EARTH_RADIUS * 2 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def angular_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle angle between ``a`` and ``b`` in radians."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    # symmetric in (a, b): both sin terms are squared
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2.0 * math.asin(math.sqrt(min(max(h, 0.0), 1.0)))


def angular_distance_deg(a: GeoPoint, b: GeoPoint) -> float:
    return math.degrees(angular_distance(a, b))


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6371 km."""
    return EARTH_RADIUS * angular_distance(a, b)


def great_circle_points(a: GeoPoint, b: GeoPoint, fractions) -> tuple[np.ndarray, np.ndarray]:
    """Points at the given fractions of the arc from ``a`` to ``b``."""
    fractions = np.asarray(fractions, dtype=np.float64)
    omega = angular_distance(a, b)
    va, vb = a.unit_vector(), b.unit_vector()
    if omega < 1e-15:
        xyz = np.repeat(va[None, :], fractions.size, axis=0)
    else:
        s = math.sin(omega)
        wa = np.sin((1.0 - fractions) * omega) / s
        wb = np.sin(fractions * omega) / s
        xyz = wa[:, None] * va[None, :] + wb[:, None] * vb[None, :]
    lat = np.degrees(np.arctan2(xyz[:, 2], np.hypot(xyz[:, 0], xyz[:, 1])))
    lon = np.degrees(np.arctan2(xyz[:, 1], xyz[:, 0]))
    # keep the caller's longitude convention
    lon = np.where(lon < min(a.lon, b.lon) - 180.0, lon + 360.0, lon)
    return lon, lat


def travel_time(a: GeoPoint, b: GeoPoint, bathy: BathymetryGrid, nsamples: int = 256) -> float:
    """Long-wave travel time along the great circle, seconds.

    Midpoint rule over ``nsamples`` equal arc segments with local speed
    ``sqrt(g * H)``; land samples travel at the clamp depth.
    """
    if nsamples < 1:
        raise ValueError("nsamples must be >= 1")
    dist = haversine_distance(a, b)
    if dist == 0.0:
        return 0.0
    frac = (np.arange(nsamples) + 0.5) / nsamples
    lon, lat = great_circle_points(a, b, frac)
    depth = _bilinear_raw(bathy.depth, bathy.spec, lon, lat)
    wet = _bilinear_raw(bathy.ocean.astype(np.float64), bathy.spec, lon, lat) > 0.0
    if not np.any(wet):
        raise NoWetPathError(f"path ({a.lon}, {a.lat}) -> ({b.lon}, {b.lat}) is entirely over land")
    depth = np.maximum(depth, bathy.min_depth_clamp)
    slowness = 1.0 / np.sqrt(GRAVITY * depth)
    # pairwise sum of a reversed sample set matches to rounding
    return float(dist / nsamples * np.sum(np.sort(slowness)))


# bathymetry -------------------------------------------------------------------

PROFILES = ("flat", "shelf", "seamount")


def synth_bathymetry(
    spec: GridSpec,
    profile: str = "flat",
    *,
    base_depth: float = 4000.0,
    seamount_height: float = 3500.0,
    seamount_center: GeoPoint | None = None,
    seamount_sigma: float | None = None,
) -> BathymetryGrid:
    """Deterministic synthetic bathymetry.

    ``shelf`` ramps linearly west to east from ``-base_depth`` to +50 m.
    ``seamount`` adds a Gaussian bump (sigma in degrees, default a tenth of
    the shorter domain side) centred on the domain unless told otherwise.
    """
    lon2, lat2 = np.meshgrid(spec.lon_centers, spec.lat_centers)
    if profile == "flat":
        z = np.full(spec.shape, -base_depth)
    elif profile == "shelf":
        ramp = np.linspace(-base_depth, 50.0, spec.nlon)
        z = np.broadcast_to(ramp, spec.shape).copy()
    elif profile == "seamount":
        if seamount_center is None:
            seamount_center = GeoPoint(
                0.5 * (spec.lon_min + spec.lon_max), 0.5 * (spec.lat_min + spec.lat_max)
            )
        sigma = seamount_sigma or 0.1 * min(spec.lon_max - spec.lon_min, spec.lat_max - spec.lat_min)
        r2 = (lon2 - seamount_center.lon) ** 2 + (lat2 - seamount_center.lat) ** 2
        z = -base_depth + seamount_height * np.exp(-r2 / (2.0 * sigma**2))
    else:
        raise ValueError(f"unknown bathymetry profile {profile!r}; expected one of {PROFILES}")
    return BathymetryGrid(spec, z)


# interpolation ----------------------------------------------------------------


def _frac_index(spec: GridSpec, lon, lat):
    x = (np.asarray(lon, dtype=np.float64) - spec.lon_min) / spec.dlon - 0.5
    y = (np.asarray(lat, dtype=np.float64) - spec.lat_min) / spec.dlat - 0.5
    j0 = np.clip(np.floor(x).astype(np.int64), 0, spec.nlon - 2)
    i0 = np.clip(np.floor(y).astype(np.int64), 0, spec.nlat - 2)
    tx = np.clip(x - j0, 0.0, 1.0)
    ty = np.clip(y - i0, 0.0, 1.0)
    return i0, j0, tx, ty


def _bilinear_raw(field2d, spec, lon, lat):
    i0, j0, tx, ty = _frac_index(spec, lon, lat)
    f = field2d
    return (
        (1 - ty) * ((1 - tx) * f[i0, j0] + tx * f[i0, j0 + 1])
        + ty * ((1 - tx) * f[i0 + 1, j0] + tx * f[i0 + 1, j0 + 1])
    )


def interp_stencil(bathy: BathymetryGrid, points: Sequence[GeoPoint]) -> tuple[np.ndarray, np.ndarray]:
    """Flat cell indices ``(n, 4)`` and land-aware bilinear weights ``(n, 4)``.

    Weights of land cells are zeroed and the rest renormalised.  If only land
    cells carry nonzero bilinear weight the nearest wet stencil cell takes it
    all.  Apply to any field with ``(field.ravel()[idx] * w).sum(-1)``.
    """
    spec = bathy.spec
    n = len(points)
    idx = np.zeros((n, 4), dtype=np.int64)
    w = np.zeros((n, 4), dtype=np.float64)
    ocean = bathy.ocean.ravel()
    for k, p in enumerate(points):
        if not spec.contains(p):
            raise OffGridError(f"point ({p.lon}, {p.lat}) outside grid")
        i0, j0, tx, ty = (np.asarray(v).item() for v in _frac_index(spec, p.lon, p.lat))
        cells = np.array(
            [i0 * spec.nlon + j0, i0 * spec.nlon + j0 + 1, (i0 + 1) * spec.nlon + j0, (i0 + 1) * spec.nlon + j0 + 1]
        )
        bw = np.array([(1 - ty) * (1 - tx), (1 - ty) * tx, ty * (1 - tx), ty * tx])
        wet = ocean[cells]
        if not wet.any():
            raise SensorOnLandError(f"all stencil cells around ({p.lon}, {p.lat}) are land")
        ww = np.where(wet, bw, 0.0)
        total = ww.sum()
        if total <= 0.0:
            # bilinear weight sits entirely on land: fall back to the nearest wet corner
            corner_dist = np.array([tx**2 + ty**2, (1 - tx) ** 2 + ty**2, tx**2 + (1 - ty) ** 2, (1 - tx) ** 2 + (1 - ty) ** 2])
            corner_dist[~wet] = np.inf
            ww = np.zeros(4)
            ww[int(np.argmin(corner_dist))] = 1.0
            total = 1.0
        idx[k] = cells
        w[k] = ww / total
    return idx, w


def apply_stencil(fields: np.ndarray, stencil: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Interpolate one ``(nlat, nlon)`` field or a stack ``(..., nlat, nlon)``."""
    idx, w = stencil
    flat = np.asarray(fields).reshape(*np.shape(fields)[:-2], -1)
    return (flat[..., idx] * w).sum(-1)


def sample_field(field2d: np.ndarray, bathy: BathymetryGrid, p: GeoPoint) -> float:
    """Bilinear sample of a per-cell field at ``p`` ignoring land cells."""
    return float(apply_stencil(field2d, interp_stencil(bathy, [p]))[0])


# file formats -------------------------------------------------------------------


def write_bathymetry(bathy: BathymetryGrid, path) -> Path:
    """Write ``<path>`` (JSON header) and sibling ``.bin`` (LE float32)."""
    path = Path(path)
    header = bathy.spec.to_dict()
    path.write_text(json.dumps(header, indent=2) + "\n")
    bathy.z_b.astype("<f4").tofile(path.with_suffix(".bin"))
    return path


def read_bathymetry(path) -> BathymetryGrid:
    path = Path(path)
    spec = GridSpec.from_dict(json.loads(path.read_text()))
    z = np.fromfile(path.with_suffix(".bin"), dtype="<f4")
    if z.size != spec.nlon * spec.nlat:
        raise ValueError(f"{path.with_suffix('.bin')}: expected {spec.nlon * spec.nlat} values, got {z.size}")
    return BathymetryGrid(spec, z.reshape(spec.shape).astype(np.float64))


def sensor_network_from_records(records, bathy: BathymetryGrid) -> SensorNetwork:
    """Build a network, snapping sensors whose cell is land to the nearest ocean cell."""
    sensors = []
    for rec in records:
        p = GeoPoint(float(rec["lon"]), float(rec["lat"]))
        if not bathy.is_ocean(p):
            q = bathy.snap_to_ocean(p)
            log.warning("sensor %s at (%.3f, %.3f) is on land; snapped to (%.3f, %.3f)", rec["id"], p.lon, p.lat, q.lon, q.lat)
            p = q
        sensors.append((str(rec["id"]), p))
    return SensorNetwork(tuple(sensors))


def load_sensor_network(path, bathy: BathymetryGrid) -> SensorNetwork:
    return sensor_network_from_records(json.loads(Path(path).read_text()), bathy)


def save_sensor_network(net: SensorNetwork, path) -> Path:
    path = Path(path)
    recs = [{"id": sid, "lon": p.lon, "lat": p.lat} for sid, p in net.sensors]
    path.write_text(json.dumps(recs, indent=2) + "\n")
    return path
