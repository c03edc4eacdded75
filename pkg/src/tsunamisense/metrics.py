"""Evaluation quantities for reconstructions and virtual waveforms."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import MissingVelocityError
from .geo import BathymetryGrid
from .swe import FrameSeries, GridMetrics, PhysicalConstants, flux_divergence
from .waveform import WaveformSeries

MASK_THRESHOLD = 1e-4  # m
TRIGGER_LEVEL = 0.1
ARRIVAL_THRESHOLD = 0.03  # m
MEDIAN_KERNEL = 13


@dataclass(frozen=True)
class FrameError:
    time: float
    value: float | None
    masked_pixel_count: int


def recon_error_frame(truth, pred, mask_threshold: float = MASK_THRESHOLD, *, ocean=None, time: float = 0.0) -> FrameError:
    """Masked normalised absolute error of one frame.

    Mean of ``|truth - pred| / max|truth|`` over wet pixels whose
    ``|truth|`` exceeds ``mask_threshold``.
    """
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape:
        raise ValueError(f"frame shapes differ: {truth.shape} vs {pred.shape}")
    wet = np.ones(truth.shape, dtype=bool) if ocean is None else np.asarray(ocean, dtype=bool)
    sel = wet & (np.abs(truth) > mask_threshold)
    n = int(sel.sum())
    if n == 0:
        return FrameError(time, None, 0)
    scale = np.max(np.abs(truth[wet]))
    value = float(np.mean(np.abs(truth[sel] - pred[sel])) / scale)
    return FrameError(time, value, n)


def trigger_time(errors: Sequence[FrameError], level: float = TRIGGER_LEVEL) -> float | None:
    """Minutes after which every defined frame error stays below ``level``."""
    defined = [e for e in errors if e.value is not None]
    if not errors:
        return None
    if defined and defined[-1].value >= level:
        return None
    t_star = errors[0].time
    for e in reversed(errors):
        if e.value is not None and e.value >= level:
            break
        t_star = e.time
    return t_star / 60.0


def arrival_time(w: WaveformSeries, threshold: float = ARRIVAL_THRESHOLD) -> float | None:
    """Minutes of the first sample with ``|eta| >= threshold``."""
    hit = np.flatnonzero(np.abs(w.eta) >= threshold)
    if hit.size == 0:
        return None
    return float(w.times[hit[0]]) / 60.0


def max_amplitude(w: WaveformSeries) -> float:
    if len(w) == 0:
        raise ValueError("empty waveform")
    return float(np.max(np.abs(w.eta)))


def median_filter(w: WaveformSeries, kernel: int = MEDIAN_KERNEL) -> WaveformSeries:
    """Sliding median with edge-value padding."""
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError(f"median kernel must be odd and >= 1, got {kernel}")
    if kernel == 1 or len(w) == 0:
        return w.with_eta(w.eta.copy())
    half = kernel // 2
    padded = np.pad(w.eta, half, mode="edge")
    return w.with_eta(np.median(sliding_window_view(padded, kernel), axis=-1))


def waveform_mae(a: WaveformSeries, b: WaveformSeries) -> float:
    if len(a) != len(b):
        raise ValueError(f"waveform lengths differ: {len(a)} vs {len(b)}")
    return float(np.mean(np.abs(a.eta - b.eta)))


# physics diagnostic ----------------------------------------------------------------


def continuity_residual_fields(series: FrameSeries, bathy: BathymetryGrid) -> tuple[np.ndarray, np.ndarray]:
    """Raw residual ``dh/dt + div(u h)`` and ``dh/dt`` for interior frames.

    Time derivative is the centred difference over neighbouring frames;
    the flux divergence uses the stored face velocities.  Returns arrays of
    shape ``(nframes - 2, nlat, nlon)``.
    """
    if not series.has_velocity:
        raise MissingVelocityError("continuity residual needs stored velocity frames")
    if len(series) < 3:
        raise ValueError("continuity residual needs at least 3 frames")
    metrics = GridMetrics(bathy, PhysicalConstants())
    h = np.where(bathy.ocean, series.eta_frames - bathy.z_b, 0.0)
    dhdt = (h[2:] - h[:-2]) / (2.0 * series.interval)
    div = flux_divergence(h[1:-1], series.u_frames[1:-1], series.v_frames[1:-1], metrics)
    dhdt = np.where(bathy.ocean, dhdt, 0.0)
    return dhdt + div, dhdt


def continuity_residual(series: FrameSeries, bathy: BathymetryGrid, mask_threshold: float = MASK_THRESHOLD) -> list[float | None]:
    """Per-frame normalised continuity residual; ``None`` for the end frames.

    Each interior frame reports mean ``|r|`` over wave pixels
    (``|eta| > mask_threshold``, all wet pixels if none) divided by the
    frame's max ``|dh/dt|``.
    """
    res, dhdt = continuity_residual_fields(series, bathy)
    out: list[float | None] = [None]
    for k in range(res.shape[0]):
        eta = series.eta_frames[k + 1]
        sel = bathy.ocean & (np.abs(eta) > mask_threshold)
        if not sel.any():
            sel = bathy.ocean
        num = float(np.mean(np.abs(res[k][sel])))
        den = float(np.max(np.abs(dhdt[k][bathy.ocean])))
        out.append(0.0 if num == 0.0 else num / den if den > 0 else float("inf"))
    out.append(None)
    return out


def mean_defined(values: Sequence[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


# reports ----------------------------------------------------------------------------

REPORT_COLUMNS = ("epicenter_id", "virtual_id", "method", "arrival_mae_min", "maxamp_mae_m", "waveform_mae_m")


@dataclass
class ComparisonRow:
    epicenter_id: str
    virtual_id: str
    method: str
    arrival_mae_min: float
    maxamp_mae_m: float
    waveform_mae_m: float


@dataclass
class EvalReport:
    frame_errors: dict[str, list[FrameError]] = field(default_factory=dict)
    rows: list[ComparisonRow] = field(default_factory=list)

    def mean_error(self, epicenter_id: str | None = None) -> float | None:
        keys = [epicenter_id] if epicenter_id else sorted(self.frame_errors)
        return mean_defined([e.value for k in keys for e in self.frame_errors[k]])

    def trigger_time(self, epicenter_id: str) -> float | None:
        return trigger_time(self.frame_errors[epicenter_id])

    def method_means(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for method in sorted({r.method for r in self.rows}):
            rows = [r for r in self.rows if r.method == method]
            out[method] = {
                col: float(np.mean([getattr(r, col) for r in rows]))
                for col in ("arrival_mae_min", "maxamp_mae_m", "waveform_mae_m")
            }
        return out

    def to_dict(self) -> dict:
        return {
            "global_mean_error": self.mean_error() if self.frame_errors else None,
            "epicenters": {
                k: {
                    "mean_error": self.mean_error(k),
                    "trigger_time_min": self.trigger_time(k),
                    "frame_errors": [asdict(e) for e in v],
                }
                for k, v in sorted(self.frame_errors.items())
            },
            "rows": [asdict(r) for r in self.rows],
            "method_means": self.method_means(),
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(REPORT_COLUMNS)
            for r in self.rows:
                wr.writerow([r.epicenter_id, r.virtual_id, r.method,
                             f"{r.arrival_mae_min:.6f}", f"{r.maxamp_mae_m:.6f}", f"{r.waveform_mae_m:.6f}"])
        return path


def write_frame_errors_csv(errors: Sequence[FrameError], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["time_s", "error", "masked_pixels"])
        for e in errors:
            wr.writerow([f"{e.time:.1f}", "" if e.value is None else f"{e.value:.8f}", e.masked_pixel_count])
    return path


def read_frame_errors_csv(path) -> list[FrameError]:
    out = []
    with Path(path).open() as fh:
        for rec in csv.DictReader(fh):
            val = float(rec["error"]) if rec["error"] else None
            out.append(FrameError(float(rec["time_s"]), val, int(rec["masked_pixels"])))
    return out
