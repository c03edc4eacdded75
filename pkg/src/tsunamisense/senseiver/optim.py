from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: ModelParams, **hyper) -> "AdamState":
        zeros = lambda: {k: np.zeros_like(a) for k, a in params.arrays.items()}  # noqa: E731
        return cls(m=zeros(), v=zeros(), **hyper)


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], opt: AdamState, lr: float | None = None) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    lr = opt.lr if lr is None else lr
    t = opt.step + 1
    b1, b2 = opt.beta1, opt.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_arrays, new_m, new_v = {}, {}, {}
    for name, p in params.arrays.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        m = b1 * opt.m[name] + (1.0 - b1) * g
        v = b2 * opt.v[name] + (1.0 - b2) * (g * g)
        upd = lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
        new_arrays[name] = (p - upd).astype(p.dtype, copy=False)
        new_m[name] = m.astype(p.dtype, copy=False)
        new_v[name] = v.astype(p.dtype, copy=False)
    state = AdamState(new_m, new_v, t, opt.lr, b1, b2, opt.eps)
    return ModelParams(params.cfg, new_arrays, params.scale), state
