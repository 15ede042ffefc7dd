"""Latency and scaling benchmarks for the streaming and parallel paths."""
from __future__ import annotations

import csv
import itertools
import os
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import attention, csc
from .model import FcnetConfig, forward_step, init_params, new_stream, suggest_modes

__all__ = [
    "LatencyRow",
    "LatencyReport",
    "bench_latency",
    "bench_parallel",
    "write_latency_csv",
    "LATENCY_CSV_HEADER",
]

LATENCY_CSV_HEADER = ("model", "n", "layers", "d_h", "mean_s", "p99_s", "samples")
WARMUP_STEPS = 500


@dataclass
class LatencyRow:
    model: str
    n: int
    layers: int
    d_h: int
    mean_s: float
    p99_s: float
    samples: int


@dataclass
class LatencyReport:
    rows: list[LatencyRow] = field(default_factory=list)

    def lookup(self, model: str, n: int, layers: int, d_h: int) -> LatencyRow:
        for r in self.rows:
            if (r.model, r.n, r.layers, r.d_h) == (model, n, layers, d_h):
                return r
        raise KeyError((model, n, layers, d_h))


def _time_steps(step, inputs: np.ndarray, warmup: int) -> np.ndarray:
    for x in inputs[:warmup]:
        step(x)
    clock = time.perf_counter_ns
    out = np.empty(len(inputs) - warmup)
    for i, x in enumerate(inputs[warmup:]):
        t0 = clock()
        step(x)
        out[i] = clock() - t0
    return out * 1e-9


def bench_latency(
    models: Sequence[str] = ("fcnet", "attn"),
    ns: Iterable[int] = (64, 2048),
    layers: Iterable[int] = (4,),
    d_hs: Iterable[int] = (256,),
    samples: int = 1000,
    warmup: int = WARMUP_STEPS,
    d_s: int = 16,
    d_a: int = 4,
    seed: int = 0,
) -> LatencyReport:
    """Per-step wall-clock latency of the streaming paths.

    The warmup runs for ``max(warmup, n)`` steps so every measured step sees a
    full context window (a full KV cache for the attention baseline). The hot
    loop is pinned to one BLAS thread.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    report = LatencyReport()
    rng = np.random.default_rng(seed)
    with threadpool_limits(limits=1):
        for model, n, L, d_h in itertools.product(models, ns, layers, d_hs):
            cfg = FcnetConfig(d_s=d_s, d_a=d_a, d_h=d_h, layers=L, n=n, m=suggest_modes(n))
            w = max(warmup, n)
            inputs = rng.standard_normal((w + samples, d_s))
            if model == "fcnet":
                p = init_params(cfg, seed)
                s = new_stream(p)
                step = lambda x, p=p, s=s: forward_step(x, p, s)  # noqa: E731
            elif model == "attn":
                p = attention.init_attn_params(cfg, seed)
                kv = attention.new_kv_cache(cfg)
                step = lambda x, p=p, kv=kv: attention.attn_forward_step(x, p, kv)  # noqa: E731
            else:
                raise ValueError(f"unknown model {model!r}")
            lat = _time_steps(step, inputs, w)
            report.rows.append(LatencyRow(
                model, n, L, d_h, float(lat.mean()), float(np.percentile(lat, 99)), len(lat)
            ))
    return report


def bench_parallel(
    lengths: Iterable[int] = (2048, 4096),
    n: int = 64,
    d: int = 32,
    m: int | None = None,
    repeats: int = 5,
    fused: bool = False,
    seed: int = 0,
) -> dict[int, float]:
    """Best-of-``repeats`` wall time of the parallel CSC forward for each length."""
    cfg = csc.CscConfig(n, m or suggest_modes(n), d)
    rng = np.random.default_rng(seed)
    w = csc.init_weights(cfg, rng)
    out = {}
    with threadpool_limits(limits=1):
        for T in lengths:
            x = rng.standard_normal((T, d))
            csc.forward_parallel(x, w, cfg, fused=fused)
            best = float("inf")
            for _ in range(repeats):
                t0 = time.perf_counter()
                csc.forward_parallel(x, w, cfg, fused=fused)
                best = min(best, time.perf_counter() - t0)
            out[int(T)] = best
    return out


def write_latency_csv(report: LatencyReport, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LATENCY_CSV_HEADER)
        for r in report.rows:
            w.writerow([r.model, r.n, r.layers, r.d_h, repr(r.mean_s), repr(r.p99_s), r.samples])
