"""Self-checks: dual-form agreement and finite-difference gradient checks.

Used by the ``verify`` subcommand and by the test suite.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import csc, model
from .model import FcnetConfig, FcnetParams, init_params
from .training import Batch, backward_full, mse_loss

__all__ = [
    "DualFormResult",
    "GradCheckResult",
    "random_csc_configs",
    "csc_dual_form",
    "stack_dual_form",
    "run_dual_form_suite",
    "grad_check",
    "randomize_params",
]


@dataclass
class DualFormResult:
    cases: int
    csc_max_err: float      # direct / parallel / fused / streaming CSC paths
    stack_max_err: float    # full stack, parallel vs streaming

    @property
    def max_err(self) -> float:
        return max(self.csc_max_err, self.stack_max_err)


@dataclass
class GradCheckResult:
    coords: int
    max_rel_err: float
    worst: str


def random_csc_configs(count: int, seed: int = 0,
                       ns=(4, 8, 16, 64), ds=(4, 32)) -> list[tuple[int, int, int, int]]:
    """``(n, m, d, T)`` tuples covering every ``n``, ``d`` and ``T in {1, n, 3n}``.

    The first pass walks the full grid once; the rest is drawn at random.
    """
    rng = np.random.default_rng(seed)
    out = []
    for n, d, k in itertools.product(ns, ds, (0, 1, 3)):
        out.append((n, int(rng.integers(1, n // 2 + 2)), d, max(1, k * n)))
    while len(out) < count:
        n = int(rng.choice(ns))
        d = int(rng.choice(ds))
        T = max(1, int(rng.choice((0, 1, 3))) * n)
        out.append((n, int(rng.integers(1, n // 2 + 2)), d, T))
    return out


def csc_dual_form(n: int, m: int, d: int, T: int, rng: np.random.Generator) -> float:
    cfg = csc.CscConfig(n, m, d)
    w = csc.init_weights(cfg, rng)
    x = rng.standard_normal((T, d))
    ref = csc.forward_direct(x, w, cfg)
    par = csc.forward_parallel(x, w, cfg)
    fused = csc.forward_parallel(x, w, cfg, fused=True)
    cache = csc.new_cache(cfg)
    stream = np.stack([csc.forward_step(xt, w, cache, cfg) for xt in x])
    return float(max(np.abs(par - ref).max(), np.abs(fused - ref).max(),
                     np.abs(stream - ref).max()))


def stack_dual_form(cfg: FcnetConfig, T: int, seed: int) -> float:
    p = randomize_params(init_params(cfg, seed), seed)
    rng = np.random.default_rng(seed + 7)
    x = rng.standard_normal((T, cfg.d_s))
    par = model.forward_parallel(x, p)
    s = model.new_stream(p)
    stream = np.stack([model.forward_step(xt, p, s) for xt in x])
    return float(np.abs(par - stream).max())


def run_dual_form_suite(count: int = 100, seed: int = 0, stack_cases: int = 6) -> DualFormResult:
    rng = np.random.default_rng(seed)
    csc_err = 0.0
    configs = random_csc_configs(count, seed)
    for n, m, d, T in configs:
        csc_err = max(csc_err, csc_dual_form(n, m, d, T, rng))
    stack_err = 0.0
    for i in range(stack_cases):
        n = (4, 8, 16, 64)[i % 4]
        cfg = FcnetConfig(d_s=3, d_a=2, d_h=(4, 32)[i % 2], d_q=8,
                          layers=2 + i % 3, n=n, m=int(rng.integers(1, n // 2 + 2)))
        stack_err = max(stack_err, stack_dual_form(cfg, 3 * n, seed + i))
    return DualFormResult(len(configs) + stack_cases, csc_err, stack_err)


def randomize_params(p: FcnetParams, seed: int, scale: float = 0.5) -> FcnetParams:
    """Copy of ``p`` with every tensor perturbed, so no gradient is trivially zero."""
    rng = np.random.default_rng(seed)
    q = p.copy()
    for arr in q.tensors.values():
        arr += scale * rng.standard_normal(arr.shape) / np.sqrt(max(arr.shape[0], 1))
    return q


def grad_check(cfg: FcnetConfig | None = None, T: int = 6, B: int = 2,
               seed: int = 0, h: float = 1e-6) -> GradCheckResult:
    """Central differences against :func:`backward_full` on every coordinate.

    The relative error is ``|a - f| / max(|a|, |f|, 1e-8)``; the floor keeps
    coordinates whose true gradient is zero from dividing by rounding noise.
    """
    cfg = cfg or FcnetConfig(d_s=2, d_a=1, d_h=4, d_q=5, layers=2, n=4, m=3)
    p = randomize_params(init_params(cfg, seed), seed + 1)
    rng = np.random.default_rng(seed + 2)
    batch = Batch(rng.standard_normal((B, T, cfg.d_s)), rng.standard_normal((B, T, cfg.d_a)))
    _, grads = backward_full(batch, p)

    def loss() -> float:
        return mse_loss(model.forward_parallel(batch.states, p), batch.target_actions)

    worst, where, coords = 0.0, "", 0
    for name, arr in p.items():
        flat = arr.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss()
            flat[i] = old - h
            down = loss()
            flat[i] = old
            fd = (up - down) / (2 * h)
            rel = abs(fd - g[i]) / max(abs(fd), abs(g[i]), 1e-8)
            coords += 1
            if rel > worst:
                worst, where = rel, f"{name}[{i}]"
    return GradCheckResult(coords, float(worst), where)
