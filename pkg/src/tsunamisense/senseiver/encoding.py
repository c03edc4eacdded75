"""Trigonometric encoding of (lon, lat, depth) locations."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import OffGridError
from ..geo import BathymetryGrid, GeoPoint, apply_stencil, interp_stencil
from .config import ModelConfig


def frequencies(cfg: ModelConfig) -> np.ndarray:
    if cfg.num_freq_bands == 1:
        return np.array([1.0])
    return np.geomspace(1.0, cfg.max_freq, cfg.num_freq_bands)


def normalized_coords(lon, lat, depth, bathy: BathymetryGrid) -> np.ndarray:
    """``(n, 3)`` coordinates: lon and lat mapped to [-1, 1], depth / max depth."""
    spec = bathy.spec
    lon = np.asarray(lon, dtype=np.float64)
    lat = np.asarray(lat, dtype=np.float64)
    if np.any((lon < spec.lon_min) | (lon > spec.lon_max) | (lat < spec.lat_min) | (lat > spec.lat_max)):
        raise OffGridError("encoding requested for a point outside the grid")
    x = 2.0 * (lon - spec.lon_min) / (spec.lon_max - spec.lon_min) - 1.0
    y = 2.0 * (lat - spec.lat_min) / (spec.lat_max - spec.lat_min) - 1.0
    z = np.asarray(depth, dtype=np.float64) / bathy.max_depth
    return np.stack([x, y, z], axis=-1)


def fourier_features(coords: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Per coordinate ``[c, sin(pi f_k c)..., cos(pi f_k c)...]`` concatenated."""
    freqs = frequencies(cfg)
    ang = np.pi * coords[..., :, None] * freqs  # (n, 3, F)
    parts = np.concatenate([coords[..., :, None], np.sin(ang), np.cos(ang)], axis=-1)
    return parts.reshape(*coords.shape[:-1], cfg.encoding_dim)


def encode_positions(points: Sequence[GeoPoint], bathy: BathymetryGrid, cfg: ModelConfig) -> np.ndarray:
    """Encode arbitrary ocean points; depth from land-aware bilinear sampling."""
    if len(points) == 0:
        return np.zeros((0, cfg.encoding_dim))
    lon = np.array([p.lon for p in points])
    lat = np.array([p.lat for p in points])
    depth = np.maximum(apply_stencil(bathy.depth, interp_stencil(bathy, points)), bathy.min_depth_clamp)
    return fourier_features(normalized_coords(lon, lat, depth, bathy), cfg)


def encode_ocean_cells(bathy: BathymetryGrid, cfg: ModelConfig) -> np.ndarray:
    """Encodings of every ocean cell center in flat (row-major) order."""
    lon, lat = bathy.ocean_points()
    depth = bathy.depth.ravel()[bathy.ocean_indices()]
    return fourier_features(normalized_coords(lon, lat, depth, bathy), cfg)
