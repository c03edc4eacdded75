"""Synthetic tsunami wavefields, sparse-sensor reconstruction and virtual waveforms."""

from .geo import BathymetryGrid, GeoPoint, GridSpec, SensorNetwork, synth_bathymetry
from .lihfp import VirtualPointSpec, lihfp_virtual_waveform
from .swe import EpicenterSource, FrameSeries, PhysicalConstants, simulate
from .waveform import WaveformSeries

__version__ = "0.1.0"

__all__ = [
    "BathymetryGrid",
    "EpicenterSource",
    "FrameSeries",
    "GeoPoint",
    "GridSpec",
    "PhysicalConstants",
    "SensorNetwork",
    "VirtualPointSpec",
    "WaveformSeries",
    "lihfp_virtual_waveform",
    "simulate",
    "synth_bathymetry",
]
