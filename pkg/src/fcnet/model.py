"""FCNet layer stack: encoder, Fourier layers, decoder.

Per layer ``l``::

    Y = gelu(CSC(LN1(X))) + X
    X = FFN(LN2(Y)) + Y

with a single affine encoder ``P`` in front and a two-layer GELU decoder ``Q``
reading the output of the last layer. LayerNorm acts per position over the
hidden axis, so every operator except CSC is position-wise and the whole stack
stays causal with an ``n``-step receptive field.

Parameters live in a flat, ordered ``name -> ndarray`` mapping
(:class:`FcnetParams`); the order is the checkpoint order.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from scipy.special import erf

from . import csc
from .spectral import is_power_of_two, max_modes

__all__ = [
    "FcnetConfig",
    "FcnetParams",
    "StreamState",
    "suggest_modes",
    "init_params",
    "forward_parallel",
    "forward_with_tape",
    "backward",
    "new_stream",
    "forward_step",
    "reset_stream",
]

LN_EPS = 1e-5


def suggest_modes(n: int) -> int:
    """Mode-count heuristic ``min(floor(2.5 ln n), floor(n / 2) + 1)``."""
    if n < 2:
        raise ValueError(f"context length must be >= 2, got {n}")
    return max(1, min(int(math.floor(2.5 * math.log(n))), max_modes(n)))


@dataclass(frozen=True)
class FcnetConfig:
    d_s: int
    d_a: int
    d_h: int = 128
    d_q: int = 128
    layers: int = 4
    n: int = 64
    m: int | None = None
    ffn_mult: int = 2

    def __post_init__(self):
        if self.m is None:
            object.__setattr__(self, "m", suggest_modes(self.n))
        for name in ("d_s", "d_a", "d_h", "d_q", "layers", "n", "m", "ffn_mult"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        csc.CscConfig(self.n, self.m, self.d_h)  # validates the mode bound

    @cached_property
    def csc(self) -> csc.CscConfig:
        return csc.CscConfig(self.n, self.m, self.d_h)

    @property
    def d_ff(self) -> int:
        return self.ffn_mult * self.d_h

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(cfg: FcnetConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {
        "enc.w": (cfg.d_s, cfg.d_h),
        "enc.b": (cfg.d_h,),
    }
    for l in range(cfg.layers):
        p = f"layers.{l}."
        shapes.update({
            p + "ln1.scale": (cfg.d_h,),
            p + "ln1.shift": (cfg.d_h,),
            p + "csc.w_re": (cfg.m, cfg.m),
            p + "csc.w_im": (cfg.m, cfg.m),
            p + "ln2.scale": (cfg.d_h,),
            p + "ln2.shift": (cfg.d_h,),
            p + "ffn.w1": (cfg.d_h, cfg.d_ff),
            p + "ffn.b1": (cfg.d_ff,),
            p + "ffn.w2": (cfg.d_ff, cfg.d_h),
            p + "ffn.b2": (cfg.d_h,),
        })
    shapes.update({
        "dec.w1": (cfg.d_h, cfg.d_q),
        "dec.b1": (cfg.d_q,),
        "dec.w2": (cfg.d_q, cfg.d_a),
        "dec.b2": (cfg.d_a,),
    })
    return shapes


@dataclass
class FcnetParams:
    cfg: FcnetConfig
    tensors: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def num_parameters(self) -> int:
        return sum(int(a.size) for a in self.tensors.values())

    def copy(self) -> "FcnetParams":
        return FcnetParams(self.cfg, {k: v.copy() for k, v in self.tensors.items()})

    def csc_weights(self, layer: int) -> csc.CscWeights:
        p = f"layers.{layer}.csc."
        return csc.CscWeights(self.tensors[p + "w_re"], self.tensors[p + "w_im"])


def init_params(cfg: FcnetConfig, seed: int) -> FcnetParams:
    """Uniform(+-1/sqrt(fan_in)) affine weights, zero biases, unit LayerNorm.

    CSC matrices draw real and imaginary parts from U(-1/m, 1/m).
    """
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("w_re", "w_im"):
            bound = 1.0 / cfg.m
            tensors[name] = rng.uniform(-bound, bound, size=shape)
        elif leaf.startswith("w"):
            bound = 1.0 / math.sqrt(shape[0])
            tensors[name] = rng.uniform(-bound, bound, size=shape)
        elif leaf == "scale":
            tensors[name] = np.ones(shape)
        else:
            tensors[name] = np.zeros(shape)
    return FcnetParams(cfg, tensors)


# --------------------------------------------------------------------------
# position-wise pieces
# --------------------------------------------------------------------------

_SQRT_HALF = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x * _SQRT_HALF))


def gelu_fwd(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """GELU output plus the normal CDF, which the backward pass reuses."""
    cdf = 0.5 * (1.0 + erf(x * _SQRT_HALF))
    return x * cdf, cdf


def gelu_grad(x: np.ndarray, cdf: np.ndarray | None = None) -> np.ndarray:
    if cdf is None:
        cdf = 0.5 * (1.0 + erf(x * _SQRT_HALF))
    return cdf + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def layer_norm(x, scale, shift):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * rstd
    return xhat * scale + shift, (xhat, rstd)


def layer_norm_backward(dy, scale, saved):
    xhat, rstd = saved
    dxhat = dy * scale
    dx = rstd * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, _sum_rows(dy * xhat), _sum_rows(dy)


def _layer_norm_vec(x, scale, shift):
    # single-position LayerNorm for the streaming hot path
    xc = x - x.sum() / x.shape[0]
    rstd = 1.0 / math.sqrt(xc @ xc / x.shape[0] + LN_EPS)
    return xc * rstd * scale + shift


def _sum_rows(a: np.ndarray) -> np.ndarray:
    return a.reshape(-1, a.shape[-1]).sum(axis=0)


def _affine_grad(inp: np.ndarray, dout: np.ndarray) -> np.ndarray:
    return inp.reshape(-1, inp.shape[-1]).T @ dout.reshape(-1, dout.shape[-1])


def _check_states(x: np.ndarray, cfg: FcnetConfig) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[-1] != cfg.d_s:
        raise ValueError(f"expected states (..., T, {cfg.d_s}), got shape {x.shape}")
    if x.shape[-2] < 1:
        raise ValueError("sequence must contain at least one step")
    return x


# --------------------------------------------------------------------------
# parallel forward / backward
# --------------------------------------------------------------------------

def forward_with_tape(x: np.ndarray, p: FcnetParams, fused: bool = True):
    """Parallel forward pass that also returns the activations needed by
    :func:`backward`. ``x`` is ``(..., T, d_s)``."""
    cfg = p.cfg
    x = _check_states(x, cfg)
    ccfg = cfg.csc
    tape: dict = {"x": x, "layers": []}
    h = x @ p["enc.w"] + p["enc.b"]
    for l in range(cfg.layers):
        pre = f"layers.{l}."
        a, ln1 = layer_norm(h, p[pre + "ln1.scale"], p[pre + "ln1.shift"])
        c = csc.forward_parallel(a, p.csc_weights(l), ccfg, fused=fused)
        gc, c_cdf = gelu_fwd(c)
        y = gc + h
        b, ln2 = layer_norm(y, p[pre + "ln2.scale"], p[pre + "ln2.shift"])
        f1 = b @ p[pre + "ffn.w1"] + p[pre + "ffn.b1"]
        g1, f1_cdf = gelu_fwd(f1)
        h = g1 @ p[pre + "ffn.w2"] + p[pre + "ffn.b2"] + y
        tape["layers"].append(
            dict(a=a, ln1=ln1, c=c, c_cdf=c_cdf, ln2=ln2, b=b, f1=f1, f1_cdf=f1_cdf, g1=g1)
        )
    q1 = h @ p["dec.w1"] + p["dec.b1"]
    gq, q1_cdf = gelu_fwd(q1)
    out = gq @ p["dec.w2"] + p["dec.b2"]
    tape.update(h=h, q1=q1, q1_cdf=q1_cdf, gq=gq)
    return out, tape


def forward_parallel(x: np.ndarray, p: FcnetParams, fused: bool = True) -> np.ndarray:
    """Actions for every position of ``x`` (``(..., T, d_s)`` -> ``(..., T, d_a)``)."""
    return forward_with_tape(x, p, fused=fused)[0]


def backward(p: FcnetParams, tape: dict, d_out: np.ndarray) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of ``sum(d_out * out)`` for every parameter."""
    cfg = p.cfg
    ccfg = cfg.csc
    grads: dict[str, np.ndarray] = {}
    d_out = np.asarray(d_out, dtype=np.float64)

    grads["dec.w2"] = _affine_grad(tape["gq"], d_out)
    grads["dec.b2"] = _sum_rows(d_out)
    dq1 = (d_out @ p["dec.w2"].T) * gelu_grad(tape["q1"], tape["q1_cdf"])
    grads["dec.w1"] = _affine_grad(tape["h"], dq1)
    grads["dec.b1"] = _sum_rows(dq1)
    dh = dq1 @ p["dec.w1"].T

    for l in reversed(range(cfg.layers)):
        pre = f"layers.{l}."
        t = tape["layers"][l]
        # X_next = FFN(LN2(Y)) + Y
        grads[pre + "ffn.w2"] = _affine_grad(t["g1"], dh)
        grads[pre + "ffn.b2"] = _sum_rows(dh)
        df1 = (dh @ p[pre + "ffn.w2"].T) * gelu_grad(t["f1"], t["f1_cdf"])
        grads[pre + "ffn.w1"] = _affine_grad(t["b"], df1)
        grads[pre + "ffn.b1"] = _sum_rows(df1)
        db = df1 @ p[pre + "ffn.w1"].T
        dy_ln, grads[pre + "ln2.scale"], grads[pre + "ln2.shift"] = layer_norm_backward(
            db, p[pre + "ln2.scale"], t["ln2"]
        )
        dy = dh + dy_ln
        # Y = gelu(CSC(LN1(X))) + X
        dc = dy * gelu_grad(t["c"], t["c_cdf"])
        da, (gw_re, gw_im) = csc.backward(t["a"], p.csc_weights(l), ccfg, dc)
        grads[pre + "csc.w_re"] = gw_re
        grads[pre + "csc.w_im"] = gw_im
        dx_ln, grads[pre + "ln1.scale"], grads[pre + "ln1.shift"] = layer_norm_backward(
            da, p[pre + "ln1.scale"], t["ln1"]
        )
        dh = dy + dx_ln

    grads["enc.w"] = _affine_grad(tape["x"], dh)
    grads["enc.b"] = _sum_rows(dh)
    return {name: grads[name] for name in p.tensors}


# --------------------------------------------------------------------------
# streaming inference
# --------------------------------------------------------------------------

@dataclass
class StreamState:
    """Per-stream inference state.

    Holds one CSC cache per layer plus the folded kernels of the parameters
    the stream was opened with. Rebuild the stream after changing parameters.
    """

    caches: list[csc.CscStreamCache]
    kernels: list[np.ndarray]
    steps: int = 0


def new_stream(p: FcnetParams) -> StreamState:
    cfg = p.cfg
    ccfg = cfg.csc
    caches = [csc.new_cache(ccfg) for _ in range(cfg.layers)]
    kernels = [csc.fold_inference_kernel(p.csc_weights(l), ccfg) for l in range(cfg.layers)]
    return StreamState(caches, kernels)


def reset_stream(s: StreamState) -> None:
    for cache in s.caches:
        cache.reset()
    s.steps = 0


def forward_step(x_new: np.ndarray, p: FcnetParams, s: StreamState) -> np.ndarray:
    """One control step: state vector in, action vector out.

    Per layer the work is LayerNorm, an O(m d_h) sliding-DFT update, GELU and
    the FFN, evaluated in that fixed order; nothing scales with ``n``.
    """
    cfg = p.cfg
    x_new = np.asarray(x_new, dtype=np.float64)
    if x_new.shape != (cfg.d_s,):
        raise ValueError(f"expected state of shape ({cfg.d_s},), got {x_new.shape}")
    if not np.all(np.isfinite(x_new)):
        raise ValueError("non-finite state rejected")
    if len(s.caches) != cfg.layers:
        raise ValueError("stream was created for a different layer count")
    ccfg = cfg.csc
    t = p.tensors
    h = x_new @ t["enc.w"] + t["enc.b"]
    for l in range(cfg.layers):
        pre = f"layers.{l}."
        a = _layer_norm_vec(h, t[pre + "ln1.scale"], t[pre + "ln1.shift"])
        c = csc.forward_step(a, None, s.caches[l], ccfg, v=s.kernels[l])
        y = gelu(c) + h
        b = _layer_norm_vec(y, t[pre + "ln2.scale"], t[pre + "ln2.shift"])
        h = gelu(b @ t[pre + "ffn.w1"] + t[pre + "ffn.b1"]) @ t[pre + "ffn.w2"]
        h += t[pre + "ffn.b2"] + y
    s.steps += 1
    return gelu(h @ t["dec.w1"] + t["dec.b1"]) @ t["dec.w2"] + t["dec.b2"]
