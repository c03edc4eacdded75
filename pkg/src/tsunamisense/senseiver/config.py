from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class ModelConfig:
    num_freq_bands: int = 32
    max_freq: float = 64.0
    latent_rows: int = 32
    latent_dim: int = 64
    num_encoder_blocks: int = 2
    num_heads: int = 4
    mlp_hidden: int = 128
    seed: int = 0

    def __post_init__(self):
        for name in ("num_freq_bands", "latent_rows", "latent_dim", "num_heads", "mlp_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.num_encoder_blocks < 0:
            raise ValueError("num_encoder_blocks must be >= 0")
        if self.max_freq < 1:
            raise ValueError("max_freq must be >= 1")
        if self.latent_dim % self.num_heads:
            raise ValueError("latent_dim must be divisible by num_heads")

    @property
    def encoding_dim(self) -> int:
        return 3 * (2 * self.num_freq_bands + 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class TrainSchedule:
    steps: int = 2000
    batch_frames: int = 8
    queries_per_frame: int = 256
    lr: float = 1e-3
    frame_split_seed: int = 0
    sample_seed: int = 1
    train_fraction: float = 0.8
    wave_threshold: float = 1e-4  # m; biases half the queries toward the wave
    lr_final_fraction: float = 0.05  # cosine decay to lr * this; 1.0 keeps lr constant

    def __post_init__(self):
        if self.steps < 0 or self.batch_frames < 1 or self.queries_per_frame < 1:
            raise ValueError("invalid training schedule")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainSchedule":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})
