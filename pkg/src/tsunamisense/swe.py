"""Nonlinear shallow water solver on a spherical lat-lon C-grid.

Momentum carries pressure gradient with a reduced-gravity factor
``(1 - beta)``, Coriolis ``f = 2 Omega sin(lat)``, first-order upwind
advection, quadratic bottom drag and biharmonic damping; continuity is in
flux form so the discrete volume telescopes exactly with closed walls.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _swe_kernels
from ._accel import numba_enabled
from .errors import BlowUpError, OnLandError
from .geo import EARTH_RADIUS, GRAVITY, BathymetryGrid, GeoPoint, GridSpec

CFL = 0.5
SPONGE_WIDTH = 10  # cells
SPONGE_TIMESCALE = 500.0  # s, relaxation at the outermost cell


@dataclass(frozen=True)
class PhysicalConstants:
    g: float = GRAVITY
    Omega: float = 7.292e-5
    beta: float = 0.015
    c_d: float = 2.5e-3
    nu4: float | None = None  # None -> 0.01 * dx**4 / dt, resolved in simulate

    def __post_init__(self):
        if self.g <= 0 or self.Omega < 0:
            raise ValueError("g must be positive and Omega non-negative")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.c_d < 0 or (self.nu4 is not None and self.nu4 < 0):
            raise ValueError("c_d and nu4 must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PhysicalConstants":
        return cls(**{k: d[k] for k in ("g", "Omega", "beta", "c_d", "nu4") if k in d})


@dataclass(frozen=True)
class EpicenterSource:
    x0: GeoPoint
    amplitude: float = 5.0
    width_param: float = 250.0  # 1/rad^2

    def __post_init__(self):
        if self.amplitude <= 0 or self.width_param <= 0:
            raise ValueError("amplitude and width_param must be positive")


@dataclass
class SWEState:
    h: np.ndarray  # (nlat, nlon); 0 on land
    u: np.ndarray  # (nlat, nlon + 1)
    v: np.ndarray  # (nlat + 1, nlon)
    t: float = 0.0


@dataclass
class FrameSeries:
    spec: GridSpec
    times: np.ndarray
    eta_frames: np.ndarray  # (nframes, nlat, nlon); 0 on land
    u_frames: np.ndarray | None = None
    v_frames: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.eta_frames.shape != (self.times.size, *self.spec.shape):
            raise ValueError("eta_frames shape does not match times x grid")
        if self.times.size > 1:
            dt = np.diff(self.times)
            if not (np.all(dt > 0) and np.allclose(dt, dt[0], rtol=1e-12, atol=0)):
                raise ValueError("frame times must be uniformly increasing")

    def __len__(self):
        return self.times.size

    @property
    def interval(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def has_velocity(self) -> bool:
        return self.u_frames is not None and self.v_frames is not None


def coriolis_parameter(lat, consts: PhysicalConstants = PhysicalConstants()):
    return 2.0 * consts.Omega * np.sin(np.radians(lat))


class GridMetrics:
    """Metric terms and masks for one bathymetry; built once per run."""

    def __init__(self, bathy: BathymetryGrid, consts: PhysicalConstants, boundary: str = "closed"):
        spec = bathy.spec
        nlat, nlon = spec.shape
        dlam, dphi = math.radians(spec.dlon), math.radians(spec.dlat)
        lat_c = spec.lat_centers
        lat_e = spec.lat_edges
        self.dy = EARTH_RADIUS * dphi
        self.dx_c = EARTH_RADIUS * np.cos(np.radians(lat_c)) * dlam
        self.dx_v = EARTH_RADIUS * np.cos(np.radians(lat_e)) * dlam
        self.area = self.dx_c * self.dy
        self.f_u = coriolis_parameter(lat_c, consts)
        self.f_v = coriolis_parameter(lat_e, consts)

        ocean = bathy.ocean
        self.ocean = ocean.copy()
        umask = np.zeros((nlat, nlon + 1), dtype=bool)
        umask[:, 1:-1] = ocean[:, :-1] & ocean[:, 1:]
        vmask = np.zeros((nlat + 1, nlon), dtype=bool)
        vmask[1:-1, :] = ocean[:-1, :] & ocean[1:, :]
        self.umask, self.vmask = umask, vmask
        self.zb = np.where(ocean, bathy.z_b, 0.0)

        if boundary not in ("closed", "sponge"):
            raise ValueError(f"boundary must be 'closed' or 'sponge', got {boundary!r}")
        self.boundary = boundary
        self.w_c = np.zeros((nlat, nlon))
        self.w_u = np.zeros((nlat, nlon + 1))
        self.w_v = np.zeros((nlat + 1, nlon))
        if boundary == "sponge":
            self.w_c = _ramp(nlat, nlon, 0.5, 0.5)
            self.w_u = _ramp(nlat, nlon + 1, 0.5, 0.0)
            self.w_v = _ramp(nlat + 1, nlon, 0.0, 0.5)

    @property
    def min_dx(self) -> float:
        return float(min(self.dx_c.min(), self.dy))

    def cell_area(self) -> np.ndarray:
        return np.broadcast_to(self.area[:, None], self.ocean.shape)


def _ramp(ny, nx, oy, ox):
    """Linear weight 1 at the outer edge falling to 0 ``SPONGE_WIDTH`` cells in."""
    # oy/ox: 0.5 for cell-centred points, 0 for face points
    yi = np.arange(ny) + oy
    xi = np.arange(nx) + ox
    ylen = ny - 1 + 2 * oy
    xlen = nx - 1 + 2 * ox
    dy = np.minimum(yi, ylen - yi)
    dx = np.minimum(xi, xlen - xi)
    d = np.minimum(dy[:, None], dx[None, :])
    return np.clip(1.0 - d / SPONGE_WIDTH, 0.0, 1.0)


def initial_condition(src: EpicenterSource, bathy: BathymetryGrid) -> SWEState:
    """Flat-topped solitary hump ``A exp(-(w r^2)^4)`` over still water.

    ``r`` is the great-circle angle (radians) from the epicenter to each
    cell center.
    """
    if not bathy.spec.contains(src.x0) or not bathy.is_ocean(src.x0):
        raise OnLandError(f"epicenter ({src.x0.lon}, {src.x0.lat}) is not on an ocean cell")
    spec = bathy.spec
    lon2, lat2 = np.meshgrid(np.radians(spec.lon_centers), np.radians(spec.lat_centers))
    lam0, phi0 = math.radians(src.x0.lon), math.radians(src.x0.lat)
    hav = np.sin((lat2 - phi0) / 2) ** 2 + np.cos(phi0) * np.cos(lat2) * np.sin((lon2 - lam0) / 2) ** 2
    r = 2.0 * np.arcsin(np.sqrt(np.clip(hav, 0.0, 1.0)))
    bump = src.amplitude * np.exp(-((src.width_param * r * r) ** 4))
    h = np.where(bathy.ocean, -bathy.z_b + bump, 0.0)
    nlat, nlon = spec.shape
    return SWEState(h=h, u=np.zeros((nlat, nlon + 1)), v=np.zeros((nlat + 1, nlon)), t=0.0)


def surface_elevation(state: SWEState, bathy: BathymetryGrid) -> np.ndarray:
    return np.where(bathy.ocean, state.h + bathy.z_b, 0.0)


def default_nu4(metrics: GridMetrics, dt: float) -> float:
    return 0.01 * metrics.min_dx**4 / dt


def step(
    state: SWEState,
    bathy: BathymetryGrid,
    consts: PhysicalConstants,
    dt: float,
    *,
    metrics: GridMetrics | None = None,
    use_numba: bool | None = None,
) -> SWEState:
    """Advance one forward-backward step; returns a new state."""
    if metrics is None:
        metrics = GridMetrics(bathy, consts)
    nu4 = default_nu4(metrics, dt) if consts.nu4 is None else consts.nu4
    if use_numba is None:
        use_numba = numba_enabled()
    kernel = _swe_kernels.step_numba if use_numba else _swe_kernels.step_numpy
    damp = dt / SPONGE_TIMESCALE
    m = metrics
    h, u, v = kernel(
        np.ascontiguousarray(state.h, dtype=np.float64),
        np.ascontiguousarray(state.u, dtype=np.float64),
        np.ascontiguousarray(state.v, dtype=np.float64),
        m.zb, m.ocean, m.umask, m.vmask, m.dx_c, m.dx_v, m.dy, m.area, m.f_u, m.f_v,
        m.w_c * damp, m.w_u * damp, m.w_v * damp,
        (1.0 - consts.beta) * consts.g, consts.c_d, nu4, dt,
    )
    _check_finite(h, u, v, state.t + dt)
    return SWEState(h=h, u=u, v=v, t=state.t + dt)


def _check_finite(h, u, v, t):
    for name, arr in (("h", h), ("u", u), ("v", v)):
        bad = ~np.isfinite(arr)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise BlowUpError(f"non-finite {name} at cell (i={i}, j={j}) at t={t:.1f}s")


def stable_dt(bathy: BathymetryGrid, consts: PhysicalConstants, out_interval: float, metrics: GridMetrics) -> float:
    """Largest ``out_interval / n`` not exceeding the CFL step."""
    dt_cfl = CFL * metrics.min_dx / math.sqrt(consts.g * bathy.max_depth)
    if out_interval <= 0:
        return dt_cfl
    nsub = max(1, math.ceil(out_interval / dt_cfl - 1e-12))
    return out_interval / nsub


def total_volume(state: SWEState, metrics: GridMetrics) -> float:
    return float(np.sum(np.where(metrics.ocean, state.h, 0.0) * metrics.area[:, None]))


def flux_divergence(h, u, v, metrics: GridMetrics) -> np.ndarray:
    """Discrete ``div(u h)`` at cell centers with face-averaged thickness."""
    hu = np.zeros(u.shape)
    hu[..., :, 1:-1] = 0.5 * (h[..., :, :-1] + h[..., :, 1:])
    hv = np.zeros(v.shape)
    hv[..., 1:-1, :] = 0.5 * (h[..., :-1, :] + h[..., 1:, :])
    flux_u = u * hu * metrics.dy
    flux_v = v * hv * metrics.dx_v[:, None]
    div = (flux_u[..., :, 1:] - flux_u[..., :, :-1]) + (flux_v[..., 1:, :] - flux_v[..., :-1, :])
    return np.where(metrics.ocean, div / metrics.area[:, None], 0.0)


def total_energy(state: SWEState, bathy: BathymetryGrid, consts: PhysicalConstants, metrics: GridMetrics) -> float:
    """Kinetic plus available potential energy, ``(1 - beta) g`` weighted."""
    u2 = 0.5 * (state.u[:, :-1] ** 2 + state.u[:, 1:] ** 2)
    v2 = 0.5 * (state.v[:-1, :] ** 2 + state.v[1:, :] ** 2)
    eta = surface_elevation(state, bathy)
    area = metrics.cell_area()
    ke = 0.5 * np.sum(np.where(metrics.ocean, state.h * (u2 + v2), 0.0) * area)
    pe = 0.5 * (1.0 - consts.beta) * consts.g * np.sum(eta**2 * area)
    return float(ke + pe)


def staggered_energy(prev: SWEState, state: SWEState, bathy: BathymetryGrid, consts: PhysicalConstants,
                     metrics: GridMetrics) -> float:
    """Energy carried by the forward-backward scheme.

    Kinetic part uses ``u(n) . u(n+1)`` on faces; in the linear inviscid
    limit this quantity is conserved exactly, while the instantaneous
    :func:`total_energy` oscillates at O(dt).
    """
    eta = surface_elevation(state, bathy)
    pe = 0.5 * (1.0 - consts.beta) * consts.g * np.sum(eta**2 * metrics.area[:, None])
    h = state.h
    hu = np.zeros_like(state.u)
    hu[:, 1:-1] = 0.5 * (h[:, :-1] + h[:, 1:])
    hv = np.zeros_like(state.v)
    hv[1:-1, :] = 0.5 * (h[:-1, :] + h[1:, :])
    ke = 0.5 * np.sum(hu * prev.u * state.u * (metrics.dx_c[:, None] * metrics.dy))
    ke += 0.5 * np.sum(hv * prev.v * state.v * (metrics.dx_v[:, None] * metrics.dy))
    return float(pe + ke)


def simulate(
    src: EpicenterSource,
    bathy: BathymetryGrid,
    consts: PhysicalConstants = PhysicalConstants(),
    duration: float = 14400.0,
    out_interval: float = 50.0,
    *,
    boundary: str = "sponge",
    store_velocity: bool = False,
    use_numba: bool | None = None,
    initial_state: SWEState | None = None,
) -> FrameSeries:
    """Integrate and emit surface elevation every ``out_interval`` seconds.

    Frames cover ``0, out_interval, ..., duration`` inclusive.  The internal
    step is the CFL step (cfl = 0.5 on the smallest cell width) shortened so
    it divides ``out_interval`` exactly.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    nout = 0
    if duration > 0:
        if out_interval <= 0:
            raise ValueError("out_interval must be positive")
        ratio = duration / out_interval
        nout = int(round(ratio))
        if abs(ratio - nout) > 1e-9:
            raise ValueError("duration must be a whole number of output intervals")
    metrics = GridMetrics(bathy, consts, boundary)
    dt = stable_dt(bathy, consts, out_interval, metrics)
    nsub = int(round(out_interval / dt)) if duration > 0 else 0
    if consts.nu4 is None:
        consts = replace(consts, nu4=default_nu4(metrics, dt))

    state = initial_state if initial_state is not None else initial_condition(src, bathy)
    nlat, nlon = bathy.spec.shape
    eta = np.empty((nout + 1, nlat, nlon))
    eta[0] = surface_elevation(state, bathy)
    uf = vf = None
    if store_velocity:
        uf = np.empty((nout + 1, nlat, nlon + 1))
        vf = np.empty((nout + 1, nlat + 1, nlon))
        uf[0], vf[0] = state.u, state.v
    for k in range(1, nout + 1):
        for _ in range(nsub):
            state = step(state, bathy, consts, dt, metrics=metrics, use_numba=use_numba)
        state.t = k * out_interval
        eta[k] = surface_elevation(state, bathy)
        if store_velocity:
            uf[k], vf[k] = state.u, state.v
    times = np.arange(nout + 1) * float(out_interval)
    meta = {
        "epicenter": {"lon": src.x0.lon, "lat": src.x0.lat, "amplitude": src.amplitude, "width_param": src.width_param},
        "constants": consts.to_dict(),
        "dt": dt,
        "boundary": boundary,
    }
    return FrameSeries(bathy.spec, times, eta, uf, vf, meta)


# on-disk format ------------------------------------------------------------------


def write_frame_series(series: FrameSeries, directory, *, extra_meta: dict | None = None) -> Path:
    """``meta.json`` + ``frames.bin`` (LE float32, frame-major, row-major).

    Velocities, when present, go to ``uv.bin``: per frame the u faces
    (nlat x nlon+1) followed by the v faces (nlat+1 x nlon).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "grid": series.spec.to_dict(),
        "times": [float(t) for t in series.times],
        **series.meta,
        "has_velocity": series.has_velocity,
    }
    if extra_meta:
        meta.update(extra_meta)
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    series.eta_frames.astype("<f4").tofile(directory / "frames.bin")
    if series.has_velocity:
        n = len(series)
        packed = np.concatenate([series.u_frames.reshape(n, -1), series.v_frames.reshape(n, -1)], axis=1)
        packed.astype("<f4").tofile(directory / "uv.bin")
    return directory


def read_frame_series(directory) -> FrameSeries:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    spec = GridSpec.from_dict(meta.pop("grid"))
    times = np.asarray(meta.pop("times"), dtype=np.float64)
    n = times.size
    eta = np.fromfile(directory / "frames.bin", dtype="<f4").astype(np.float64)
    eta = eta.reshape(n, *spec.shape)
    uf = vf = None
    if meta.get("has_velocity") and (directory / "uv.bin").exists():
        nlat, nlon = spec.shape
        nu, nv = nlat * (nlon + 1), (nlat + 1) * nlon
        packed = np.fromfile(directory / "uv.bin", dtype="<f4").astype(np.float64).reshape(n, nu + nv)
        uf = packed[:, :nu].reshape(n, nlat, nlon + 1)
        vf = packed[:, nu:].reshape(n, nlat + 1, nlon)
    return FrameSeries(spec, times, eta, uf, vf, meta)
