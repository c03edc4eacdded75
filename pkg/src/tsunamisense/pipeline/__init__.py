from .config import Epicenter, ExperimentConfig, load_config
from .stages import (
    STAGES,
    RunManifest,
    cmd_compare,
    cmd_reconstruct,
    cmd_render,
    cmd_simulate,
    cmd_train,
    compare_waveforms,
)

__all__ = [
    "STAGES",
    "Epicenter",
    "ExperimentConfig",
    "RunManifest",
    "cmd_compare",
    "cmd_reconstruct",
    "cmd_render",
    "cmd_simulate",
    "cmd_train",
    "compare_waveforms",
    "load_config",
]
