"""Imitation training: MSE objective, Adam with warmup + cosine decay, epoch loop."""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .model import (
    FcnetConfig,
    FcnetParams,
    backward,
    forward_parallel,
    forward_with_tape,
    init_params,
)

log = logging.getLogger(__name__)

__all__ = [
    "Batch",
    "TrainConfig",
    "OptimState",
    "TrainResult",
    "mse_loss",
    "backward_full",
    "init_optimizer",
    "adam_step",
    "lr_schedule",
    "train",
    "evaluate",
    "write_loss_csv",
]

LOSS_CSV_HEADER = ("epoch", "train_loss", "val_loss", "lr")


@dataclass
class Batch:
    """``states`` is ``(B, T, d_s)``, ``target_actions`` is ``(B, T, d_a)``.

    ``mask`` (``(B, T)``, optional) marks real rows; front padding is 0.
    """

    states: np.ndarray
    target_actions: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        if self.states.ndim != 3 or self.target_actions.ndim != 3:
            raise ValueError("batch arrays must be (B, T, dim)")
        if self.states.shape[:2] != self.target_actions.shape[:2]:
            raise ValueError(
                f"states {self.states.shape} and actions {self.target_actions.shape} disagree"
            )
        if self.mask is not None and self.mask.shape != self.states.shape[:2]:
            raise ValueError("mask must be (B, T)")
        if not (np.isfinite(self.states).all() and np.isfinite(self.target_actions).all()):
            raise ValueError("batch contains non-finite values")

    def __len__(self) -> int:
        return self.states.shape[0]

    def take(self, idx) -> "Batch":
        return Batch(
            self.states[idx],
            self.target_actions[idx],
            None if self.mask is None else self.mask[idx],
        )


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    base_lr: float = 5e-3
    warmup_frac: float = 0.2
    weight_decay: float = 1e-4
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    grad_clip: float | None = None
    # stop once the validation loss is below this value
    target_val_loss: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass
class OptimState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    weight_decay: float = 0.0


def mse_loss(pred: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean squared error over all elements (or over masked-in rows)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    if mask is None:
        return float(np.mean(diff * diff))
    w = np.broadcast_to(np.asarray(mask, dtype=np.float64)[..., None], diff.shape)
    return float(np.sum(w * diff * diff) / np.sum(w))


def _loss_adjoint(pred, target, mask):
    diff = pred - target
    if mask is None:
        return 2.0 * diff / diff.size
    w = np.asarray(mask, dtype=np.float64)[..., None]
    return 2.0 * w * diff / (w.sum() * diff.shape[-1])


def backward_full(
    batch: Batch, p: FcnetParams, loss_scale: float = 1.0
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients for every parameter of ``p``."""
    if batch.states.shape[-1] != p.cfg.d_s or batch.target_actions.shape[-1] != p.cfg.d_a:
        raise ValueError("batch dimensions do not match the model config")
    pred, tape = forward_with_tape(batch.states, p)
    loss = mse_loss(pred, batch.target_actions, batch.mask)
    d_out = loss_scale * _loss_adjoint(pred, batch.target_actions, batch.mask)
    return loss_scale * loss, backward(p, tape, d_out)


def init_optimizer(p: FcnetParams, cfg: TrainConfig | None = None) -> OptimState:
    cfg = cfg or TrainConfig()
    zeros = lambda: {k: np.zeros_like(a) for k, a in p.items()}  # noqa: E731
    return OptimState(
        m=zeros(), v=zeros(), beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps,
        weight_decay=cfg.weight_decay,
    )


def adam_step(
    p: FcnetParams, grads: dict[str, np.ndarray], o: OptimState, lr_now: float
) -> tuple[FcnetParams, OptimState]:
    """Bias-corrected Adam with decoupled weight decay; updates in place."""
    o.step += 1
    b1, b2 = o.beta1, o.beta2
    c1 = 1.0 - b1 ** o.step
    c2 = 1.0 - b2 ** o.step
    for name, w in p.items():
        g = grads[name]
        m, v = o.m[name], o.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if o.weight_decay:
            w -= lr_now * o.weight_decay * w
        w -= lr_now * (m / c1) / (np.sqrt(v / c2) + o.eps)
    return p, o


def lr_schedule(step: int, total: int, base_lr: float, warmup_frac: float) -> float:
    """Linear warmup to ``base_lr`` then cosine decay to zero at ``total``."""
    if not 0 <= step <= total:
        raise ValueError(f"step {step} outside [0, {total}]")
    warmup = int(warmup_frac * total)
    if step < warmup:
        return base_lr * step / warmup
    if total == warmup:
        return base_lr
    progress = (step - warmup) / (total - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def _clip(grads: dict[str, np.ndarray], max_norm: float) -> None:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads.values():
            g *= scale


def evaluate(p: FcnetParams, data: Batch, batch_size: int = 256) -> float:
    """Masked MSE of the parallel forward pass over a whole dataset."""
    if len(data) == 0:
        return float("nan")
    num = den = 0.0
    for start in range(0, len(data), batch_size):
        chunk = data.take(slice(start, start + batch_size))
        pred = forward_parallel(chunk.states, p)
        diff = pred - chunk.target_actions
        w = np.ones(diff.shape[:2]) if chunk.mask is None else chunk.mask
        num += float(np.sum(w[..., None] * diff * diff))
        den += float(np.sum(w)) * diff.shape[-1]
    return num / den


@dataclass
class TrainResult:
    params: FcnetParams
    history: list[dict] = field(default_factory=list)

    @property
    def final_val_loss(self) -> float:
        return self.history[-1]["val_loss"] if self.history else float("nan")


def write_loss_csv(history: list[dict], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOSS_CSV_HEADER)
        for row in history:
            w.writerow([row["epoch"], repr(row["train_loss"]), repr(row["val_loss"]), repr(row["lr"])])


def train(
    train_data: Batch,
    cfg: TrainConfig,
    model_cfg: FcnetConfig,
    val_data: Batch | None = None,
    loss_csv: str | os.PathLike | None = None,
    params: FcnetParams | None = None,
) -> TrainResult:
    """Shuffled-minibatch training; one history row per epoch.

    Runs single-threaded over whole minibatches, so the reduction order (and
    therefore every bit of the result) is fixed by ``cfg.seed``.
    """
    if len(train_data) == 0:
        raise ValueError("empty training set")
    p = params.copy() if params is not None else init_params(model_cfg, cfg.seed)
    opt = init_optimizer(p, cfg)
    rng = np.random.default_rng(cfg.seed)
    n_batches = math.ceil(len(train_data) / cfg.batch_size)
    total = cfg.epochs * n_batches
    step = 0
    result = TrainResult(p)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_data))
        losses = []
        lr = 0.0
        for b in range(n_batches):
            idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            loss, grads = backward_full(train_data.take(idx), p)
            if cfg.grad_clip is not None:
                _clip(grads, cfg.grad_clip)
            # same indexing as transformers' get_cosine_schedule_with_warmup
            lr = lr_schedule(step, total, cfg.base_lr, cfg.warmup_frac)
            adam_step(p, grads, opt, lr)
            step += 1
            losses.append(loss)
        val = evaluate(p, val_data) if val_data is not None else float("nan")
        row = dict(epoch=epoch, train_loss=float(np.mean(losses)), val_loss=val, lr=lr)
        result.history.append(row)
        log.info("epoch %d train %.3e val %.3e lr %.2e", epoch, row["train_loss"], val, lr)
        if loss_csv is not None:
            write_loss_csv(result.history, loss_csv)
        if cfg.target_val_loss is not None and val < cfg.target_val_loss:
            break
    return result
