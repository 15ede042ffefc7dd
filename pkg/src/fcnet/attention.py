"""Single-head causal attention stack with a sliding-window KV cache.

Latency comparator for FCNet: same encoder / LayerNorm / FFN / decoder shape,
with the CSC block swapped for attention over the last ``n`` positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import FcnetConfig, _layer_norm_vec, gelu, init_params, layer_norm

__all__ = [
    "AttnParams",
    "KVCache",
    "init_attn_params",
    "attn_forward_parallel",
    "new_kv_cache",
    "attn_forward_step",
]


@dataclass
class AttnParams:
    cfg: FcnetConfig
    tensors: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def init_attn_params(cfg: FcnetConfig, seed: int) -> AttnParams:
    base = init_params(cfg, seed)
    rng = np.random.default_rng(seed + 1)
    bound = 1.0 / math.sqrt(cfg.d_h)
    tensors = {}
    for name, arr in base.tensors.items():
        if ".csc." in name:
            continue
        tensors[name] = arr
    for l in range(cfg.layers):
        # query/key/value projections packed side by side: (d_h, 3 d_h)
        tensors[f"layers.{l}.attn.wqkv"] = rng.uniform(-bound, bound, (cfg.d_h, 3 * cfg.d_h))
        tensors[f"layers.{l}.attn.wo"] = rng.uniform(-bound, bound, (cfg.d_h, cfg.d_h))
    return AttnParams(cfg, tensors)


def _ffn(p, pre, y):
    if y.ndim == 1:
        b = _layer_norm_vec(y, p[pre + "ln2.scale"], p[pre + "ln2.shift"])
    else:
        b, _ = layer_norm(y, p[pre + "ln2.scale"], p[pre + "ln2.shift"])
    return gelu(b @ p[pre + "ffn.w1"] + p[pre + "ffn.b1"]) @ p[pre + "ffn.w2"] + p[pre + "ffn.b2"] + y


def attn_forward_parallel(x: np.ndarray, p: AttnParams) -> np.ndarray:
    """Whole-sequence pass; position ``t`` attends to ``t-n+1 .. t``."""
    cfg = p.cfg
    x = np.asarray(x, dtype=np.float64)
    T = x.shape[0]
    idx = np.arange(T)
    lag = idx[:, None] - idx[None, :]
    allowed = (lag >= 0) & (lag < cfg.n)
    scale = 1.0 / math.sqrt(cfg.d_h)
    h = x @ p["enc.w"] + p["enc.b"]
    for l in range(cfg.layers):
        pre = f"layers.{l}."
        a, _ = layer_norm(h, p[pre + "ln1.scale"], p[pre + "ln1.shift"])
        q, k, v = np.split(a @ p[pre + "attn.wqkv"], 3, axis=-1)
        s = np.where(allowed, (q @ k.T) * scale, -np.inf)
        s -= s.max(axis=1, keepdims=True)
        w = np.exp(s)
        w /= w.sum(axis=1, keepdims=True)
        y = (w @ v) @ p[pre + "attn.wo"] + h
        h = _ffn(p, pre, y)
    return gelu(h @ p["dec.w1"] + p["dec.b1"]) @ p["dec.w2"] + p["dec.b2"]


@dataclass
class KVCache:
    """Ring buffers of keys and values per layer; at most ``n`` entries live."""

    keys: list[np.ndarray]    # per layer (n, d_h)
    values: list[np.ndarray]
    length: int = 0
    pos: int = 0

    def reset(self) -> None:
        self.length = 0
        self.pos = 0


def new_kv_cache(cfg: FcnetConfig) -> KVCache:
    return KVCache(
        [np.zeros((cfg.n, cfg.d_h)) for _ in range(cfg.layers)],
        [np.zeros((cfg.n, cfg.d_h)) for _ in range(cfg.layers)],
    )


def attn_forward_step(x_new: np.ndarray, p: AttnParams, cache: KVCache) -> np.ndarray:
    """One token through the stack; the oldest key/value is evicted at ``n``."""
    cfg = p.cfg
    x_new = np.asarray(x_new, dtype=np.float64)
    if x_new.shape != (cfg.d_s,):
        raise ValueError(f"expected state of shape ({cfg.d_s},), got {x_new.shape}")
    if not np.all(np.isfinite(x_new)):
        raise ValueError("non-finite state rejected")
    d = cfg.d_h
    scale = 1.0 / math.sqrt(d)
    slot = cache.pos
    live = min(cache.length + 1, cfg.n)
    h = x_new @ p["enc.w"] + p["enc.b"]
    for l in range(cfg.layers):
        pre = f"layers.{l}."
        a = _layer_norm_vec(h, p[pre + "ln1.scale"], p[pre + "ln1.shift"])
        qkv = a @ p[pre + "attn.wqkv"]
        q = qkv[:d]
        K, V = cache.keys[l], cache.values[l]
        K[slot] = qkv[d : 2 * d]
        V[slot] = qkv[2 * d :]
        # softmax is order-invariant, so the live rows need no reordering
        s = (K[:live] @ q) * scale
        s -= s.max()
        w = np.exp(s)
        w /= w.sum()
        y = (w @ V[:live]) @ p[pre + "attn.wo"] + h
        h = _ffn(p, pre, y)
    cache.pos = (slot + 1) % cfg.n
    cache.length = live
    return gelu(h @ p["dec.w1"] + p["dec.b1"]) @ p["dec.w2"] + p["dec.b2"]
