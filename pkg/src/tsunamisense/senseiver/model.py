"""Latent cross-attention encoder and query decoder with exact gradients.

Encoder: a learned latent array cross-attends over sensor tokens
``[value, position encoding]`` and is refined by pre-norm self-attention
blocks.  Decoder: each encoded query location cross-attends over the
latent array, then an MLP head emits one scalar.  All values inside this
module are in standardised units (metres / ``ModelParams.scale``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NoObservationsError, NonFiniteGradientError
from . import layers as L
from .config import ModelConfig


def _attn_names(prefix):
    return [prefix + n for n in ("wq", "wk", "wv", "wo", "bo")]


def _mlp_names(prefix):
    return [prefix + n for n in ("w1", "b1", "w2", "b2")]


def param_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered parameter blocks; this order is the checkpoint order."""
    d, r, hm, p = cfg.latent_dim, cfg.latent_rows, cfg.mlp_hidden, cfg.encoding_dim
    t = p + 1
    shapes = [("latents", (r, d))]

    def ln(name, n):
        shapes.extend([(name + "g", (n,)), (name + "b", (n,))])

    def attn(prefix, dq, dkv):
        shapes.extend([(prefix + "wq", (dq, d)), (prefix + "wk", (dkv, d)), (prefix + "wv", (dkv, d)),
                       (prefix + "wo", (d, d)), (prefix + "bo", (d,))])

    def mlp(prefix):
        shapes.extend([(prefix + "w1", (d, hm)), (prefix + "b1", (hm,)), (prefix + "w2", (hm, d)), (prefix + "b2", (d,))])

    ln("enc.x.ln_lat.", d)
    ln("enc.x.tok.", t)  # per-feature gain/offset on raw tokens
    attn("enc.x.", d, t)
    ln("enc.x.ln_mlp.", d)
    mlp("enc.x.mlp.")
    for i in range(cfg.num_encoder_blocks):
        pre = f"enc.b{i}."
        ln(pre + "ln_attn.", d)
        attn(pre, d, d)
        ln(pre + "ln_mlp.", d)
        mlp(pre + "mlp.")
    ln("dec.ln_q.", p)
    ln("dec.ln_z.", d)
    attn("dec.", p, d)
    ln("dec.ln_mlp.", d)
    mlp("dec.mlp.")
    shapes.extend([("dec.out.w", (d, 1)), ("dec.out.b", (1,))])
    return shapes


@dataclass
class ModelParams:
    cfg: ModelConfig
    arrays: dict[str, np.ndarray]
    scale: float = 1.0

    def __getitem__(self, name):
        return self.arrays[name]

    def __iter__(self):
        return iter(self.arrays)

    @property
    def dtype(self):
        return self.arrays["latents"].dtype

    def count(self) -> int:
        return int(sum(a.size for a in self.arrays.values()))

    def copy(self) -> "ModelParams":
        return ModelParams(self.cfg, {k: v.copy() for k, v in self.arrays.items()}, self.scale)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.cfg, {k: v.astype(dtype) for k, v in self.arrays.items()}, self.scale)


def init_params(cfg: ModelConfig, dtype=np.float32, scale: float = 1.0) -> ModelParams:
    """Uniform fan-in initialisation from ``cfg.seed``; LN gains 1, biases 0."""
    rng = np.random.default_rng(cfg.seed)
    arrays = {}
    for name, shape in param_shapes(cfg):
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            a = np.ones(shape)
        elif leaf in ("b", "bo", "b1", "b2"):
            a = np.zeros(shape)
        else:
            fan_in = shape[0] if name != "latents" else shape[1]
            bound = 1.0 / np.sqrt(fan_in)
            a = rng.uniform(-bound, bound, size=shape)
        arrays[name] = a.astype(dtype)
    return ModelParams(cfg, arrays, float(scale))


# forward ---------------------------------------------------------------------


def _encode(p, cfg: ModelConfig, values, a_s, keep_cache=False):
    """values ``(B, N)``, a_s ``(N, P)`` or ``(B, N, P)`` -> Z ``(B, R, D)``."""
    values = np.asarray(values, dtype=p["latents"].dtype)
    b, n = values.shape
    if n == 0:
        raise NoObservationsError("encoder needs at least one observation")
    a_s = np.asarray(a_s, dtype=values.dtype)
    if a_s.ndim == 2:
        a_s = np.broadcast_to(a_s, (b, *a_s.shape))
    tokens = np.concatenate([values[..., None], a_s], axis=-1)
    lat = np.broadcast_to(p["latents"], (b, *p["latents"].shape))
    H = cfg.num_heads
    caches = {}

    ln_l, caches["ln_lat"] = L.layernorm_fwd(lat, p["enc.x.ln_lat.g"], p["enc.x.ln_lat.b"])
    # tokens are not layer-normalised: a single reading would be swamped by
    # the 6F+3 encoding features
    tok = tokens * p["enc.x.tok.g"] + p["enc.x.tok.b"]
    caches["tokens"] = tokens
    att, caches["xattn"] = L.attention_fwd(ln_l, tok, p, "enc.x.", H)
    x = lat + att
    y, caches["x.ln_mlp"] = L.layernorm_fwd(x, p["enc.x.ln_mlp.g"], p["enc.x.ln_mlp.b"])
    m, caches["x.mlp"] = L.mlp_fwd(y, p, "enc.x.mlp.")
    x = x + m
    for i in range(cfg.num_encoder_blocks):
        pre = f"enc.b{i}."
        y, caches[pre + "ln_attn"] = L.layernorm_fwd(x, p[pre + "ln_attn.g"], p[pre + "ln_attn.b"])
        att, caches[pre + "attn"] = L.attention_fwd(y, y, p, pre, H)
        x = x + att
        y, caches[pre + "ln_mlp"] = L.layernorm_fwd(x, p[pre + "ln_mlp.g"], p[pre + "ln_mlp.b"])
        m, caches[pre + "mlp"] = L.mlp_fwd(y, p, pre + "mlp.")
        x = x + m
    return (x, caches) if keep_cache else x


def _decode(p, cfg: ModelConfig, z, a_q, keep_cache=False):
    """z ``(B, R, D)``, a_q ``(M, P)`` or ``(B, M, P)`` -> ``(B, M)``."""
    a_q = np.asarray(a_q, dtype=z.dtype)
    if a_q.ndim == 2:
        a_q = np.broadcast_to(a_q, (z.shape[0], *a_q.shape))
    H = cfg.num_heads
    caches = {}
    lq, caches["ln_q"] = L.layernorm_fwd(a_q, p["dec.ln_q.g"], p["dec.ln_q.b"])
    lz, caches["ln_z"] = L.layernorm_fwd(z, p["dec.ln_z.g"], p["dec.ln_z.b"])
    x, caches["attn"] = L.attention_fwd(lq, lz, p, "dec.", H)
    y, caches["ln_mlp"] = L.layernorm_fwd(x, p["dec.ln_mlp.g"], p["dec.ln_mlp.b"])
    m, caches["mlp"] = L.mlp_fwd(y, p, "dec.mlp.")
    x = x + m
    caches["head_in"] = x
    out = (x @ p["dec.out.w"])[..., 0] + p["dec.out.b"][0]
    return (out, caches) if keep_cache else out


def forward(params: ModelParams, values, a_s, a_q):
    """Standardised predictions ``(B, M)`` plus the cache for :func:`backward`."""
    p, cfg = params.arrays, params.cfg
    z, enc_c = _encode(p, cfg, values, a_s, keep_cache=True)
    pred, dec_c = _decode(p, cfg, z, a_q, keep_cache=True)
    return pred, (enc_c, dec_c)


def backward(params: ModelParams, cache, dpred) -> dict[str, np.ndarray]:
    p, cfg = params.arrays, params.cfg
    enc_c, dec_c = cache
    H = cfg.num_heads
    g: dict[str, np.ndarray] = {}

    def acc(d):
        for k, v in d.items():
            g[k] = g[k] + v if k in g else v

    # decoder
    x = dec_c["head_in"]
    dout = dpred[..., None]
    g["dec.out.w"] = L._flat(x).T @ L._flat(dout)
    g["dec.out.b"] = np.array([dpred.sum()], dtype=dpred.dtype)
    dx = dout @ p["dec.out.w"].T
    dy, mg = L.mlp_bwd(dx, dec_c["mlp"], p, "dec.mlp.")
    acc(mg)
    dxa, dg_, db_ = L.layernorm_bwd(dy, dec_c["ln_mlp"])
    acc({"dec.ln_mlp.g": dg_, "dec.ln_mlp.b": db_})
    dx = dx + dxa
    _dlq, dlz, ag = L.attention_bwd(dx, dec_c["attn"], p, "dec.", H)
    acc(ag)
    _, dg_, db_ = L.layernorm_bwd(_dlq, dec_c["ln_q"])
    acc({"dec.ln_q.g": dg_, "dec.ln_q.b": db_})
    dz, dg_, db_ = L.layernorm_bwd(dlz, dec_c["ln_z"])
    acc({"dec.ln_z.g": dg_, "dec.ln_z.b": db_})

    # encoder blocks in reverse
    dx = dz
    for i in reversed(range(cfg.num_encoder_blocks)):
        pre = f"enc.b{i}."
        dy, mg = L.mlp_bwd(dx, enc_c[pre + "mlp"], p, pre + "mlp.")
        acc(mg)
        dxa, dg_, db_ = L.layernorm_bwd(dy, enc_c[pre + "ln_mlp"])
        acc({pre + "ln_mlp.g": dg_, pre + "ln_mlp.b": db_})
        dx = dx + dxa
        dyq, dykv, ag = L.attention_bwd(dx, enc_c[pre + "attn"], p, pre, H)
        acc(ag)
        dxa, dg_, db_ = L.layernorm_bwd(dyq + dykv, enc_c[pre + "ln_attn"])
        acc({pre + "ln_attn.g": dg_, pre + "ln_attn.b": db_})
        dx = dx + dxa

    dy, mg = L.mlp_bwd(dx, enc_c["x.mlp"], p, "enc.x.mlp.")
    acc(mg)
    dxa, dg_, db_ = L.layernorm_bwd(dy, enc_c["x.ln_mlp"])
    acc({"enc.x.ln_mlp.g": dg_, "enc.x.ln_mlp.b": db_})
    dx = dx + dxa
    dll, dlt, ag = L.attention_bwd(dx, enc_c["xattn"], p, "enc.x.", H)
    acc(ag)
    acc({"enc.x.tok.g": L._flat(dlt * enc_c["tokens"]).sum(axis=0), "enc.x.tok.b": L._flat(dlt).sum(axis=0)})
    dlat, dg_, db_ = L.layernorm_bwd(dll, enc_c["ln_lat"])
    acc({"enc.x.ln_lat.g": dg_, "enc.x.ln_lat.b": db_})
    g["latents"] = (dx + dlat).sum(axis=0)

    return {name: g[name].astype(p[name].dtype, copy=False).reshape(p[name].shape) for name in p}


# public surface ----------------------------------------------------------------


def _as_batch(values):
    values = np.asarray(values)
    return values[None, :] if values.ndim == 1 else values


def encode(values, a_s, params: ModelParams) -> np.ndarray:
    """Latent array from sensor readings in metres.

    ``values`` is ``(N,)`` or ``(B, N)``; returns ``(R, D)`` or ``(B, R, D)``.
    """
    v = np.asarray(values, dtype=np.float64)
    single = v.ndim == 1
    z = _encode(params.arrays, params.cfg, _as_batch(v) / params.scale, a_s)
    return z[0] if single else z


def decode(z, a_q, params: ModelParams) -> np.ndarray:
    """Wave heights in metres at encoded query locations."""
    z = np.asarray(z, dtype=params.dtype)
    single = z.ndim == 2
    out = _decode(params.arrays, params.cfg, z[None] if single else z, a_q)
    out = out.astype(np.float64) * params.scale
    return out[0] if single else out


def loss(pred, truth) -> float:
    """Mean squared error."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.size == 0 or pred.shape != truth.shape:
        raise ValueError("loss needs equal, non-empty prediction and truth arrays")
    d = pred - truth
    return float(np.mean(d * d))


@dataclass
class Batch:
    """Standardised training batch: ``values (B, N)``, ``a_s (N, P)``,
    ``a_q (B, M, P)``, ``truth (B, M)``."""

    values: np.ndarray
    a_s: np.ndarray
    a_q: np.ndarray
    truth: np.ndarray
    meta: dict = field(default_factory=dict)


def gradients(params: ModelParams, batch: Batch) -> tuple[float, dict[str, np.ndarray]]:
    """Mean-squared loss over the batch and its exact parameter gradients."""
    pred, cache = forward(params, batch.values, batch.a_s, batch.a_q)
    truth = np.asarray(batch.truth, dtype=pred.dtype)
    diff = pred - truth
    value = float(np.mean(diff * diff))
    dpred = (2.0 / diff.size) * diff
    grads = backward(params, cache, dpred)
    for name, gr in grads.items():
        if not np.all(np.isfinite(gr)):
            raise NonFiniteGradientError(f"non-finite gradient in block {name}")
    return value, grads
