"""Synthetic trajectories, normalisation, windowing and the FCTRAJ text format."""
from __future__ import annotations

import io
import os
import re
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .training import Batch

__all__ = [
    "Trajectory",
    "NormStats",
    "TokenLayout",
    "Window",
    "TrajectoryGenerationError",
    "gen_harmonic",
    "gen_accel_rotor",
    "gen_masspring_imitation",
    "random_reference",
    "masspring_dataset",
    "fit_norm",
    "apply_norm",
    "invert_norm",
    "window_dataset",
    "windows_to_batch",
    "split_train_val",
    "serialize",
    "parse",
    "save_trajectories",
    "load_trajectories",
]


class TrajectoryGenerationError(RuntimeError):
    pass


@dataclass
class Trajectory:
    states: np.ndarray               # (T, d_s)
    actions: np.ndarray              # (T, d_a); d_a may be 0
    dt: float
    meta: dict[str, str] = field(default_factory=dict)
    rewards: np.ndarray | None = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.float64)
        if self.states.ndim != 2 or self.actions.ndim != 2:
            raise ValueError("states and actions must be 2-D")
        if len(self.states) < 1 or len(self.states) != len(self.actions):
            raise ValueError("states and actions need the same non-zero length")
        if not (np.all(np.isfinite(self.states)) and np.all(np.isfinite(self.actions))):
            raise ValueError("trajectory contains non-finite values")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def d_s(self) -> int:
        return self.states.shape[1]

    @property
    def d_a(self) -> int:
        return self.actions.shape[1]


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

def _times(n_steps: int, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    return np.arange(n_steps) * dt


def gen_harmonic(
    A: float,
    omega: float,
    phi: float,
    n_steps: int,
    dt: float,
    noise_std: float = 0.0,
    seed: int = 0,
    mirror_action: bool = False,
) -> Trajectory:
    """Simple harmonic motion ``x = A sin(omega t + phi)``; state ``[x, v]``."""
    t = _times(n_steps, dt)
    rng = np.random.default_rng(seed)
    x = A * np.sin(omega * t + phi)
    v = A * omega * np.cos(omega * t + phi)
    states = np.stack([x, v], axis=1)
    if noise_std:
        states = states + rng.normal(0.0, noise_std, size=states.shape)
    actions = states[:, :1].copy() if mirror_action else np.zeros((n_steps, 0))
    meta = {"kind": "harmonic", "A": repr(A), "omega": repr(omega), "phi": repr(phi)}
    return Trajectory(states, actions, dt, meta)


def gen_accel_rotor(
    theta0: float,
    omega0: float,
    alpha: float,
    n_steps: int,
    dt: float,
    noise_std: float = 0.0,
    seed: int = 0,
) -> Trajectory:
    """Rotation under constant angular acceleration; state ``[theta, omega]``."""
    t = _times(n_steps, dt)
    rng = np.random.default_rng(seed)
    theta = theta0 + omega0 * t + 0.5 * alpha * t * t
    omega = omega0 + alpha * t
    states = np.stack([theta, omega], axis=1)
    if noise_std:
        states = states + rng.normal(0.0, noise_std, size=states.shape)
    meta = {"kind": "accel_rotor"}
    return Trajectory(states, np.zeros((n_steps, 0)), dt, meta)


Reference = Callable[[np.ndarray], np.ndarray] | Sequence[tuple[float, float, float]] | None


def random_reference(rng: np.random.Generator, max_terms: int = 3) -> list[tuple[float, float, float]]:
    """A smooth target: 1..max_terms sinusoids ``(amplitude, omega, phase)``."""
    k = int(rng.integers(1, max_terms + 1))
    return [
        (float(rng.uniform(0.2, 1.0)), float(rng.uniform(0.3, 3.0)), float(rng.uniform(0, 2 * np.pi)))
        for _ in range(k)
    ]


def _reference_values(ref: Reference, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if ref is None:
        ref = random_reference(rng)
    if callable(ref):
        return np.asarray(ref(t), dtype=np.float64) * np.ones_like(t)
    terms = list(ref)
    if len(terms) > 3:
        raise ValueError("reference is limited to three sinusoids")
    out = np.zeros_like(t)
    for amp, omega, phase in terms:
        out += amp * np.sin(omega * t + phase)
    return out


def gen_masspring_imitation(
    kp: float,
    kd: float,
    ref_signal: Reference,
    n_steps: int,
    dt: float,
    seed: int = 0,
    x0: float = 0.0,
    v0: float = 0.0,
    stiffness: float = 1.0,
    damping: float = 0.1,
) -> Trajectory:
    """Unit mass-spring-damper tracking a reference under an expert PD law.

    ``u = -kp (x - x_ref) - kd v`` and ``a = u - stiffness x - damping v``,
    integrated with semi-implicit Euler. State is ``[x, v, x_ref]``, action
    ``[u]``. ``ref_signal`` is a list of up to three ``(A, omega, phase)``
    sinusoids, a callable of time, or ``None`` to draw one from ``seed``.
    """
    if kp <= 0 or kd <= 0:
        raise ValueError("PD gains must be positive")
    t = _times(n_steps, dt)
    rng = np.random.default_rng(seed)
    ref = _reference_values(ref_signal, t, rng)
    states = np.empty((n_steps, 3))
    actions = np.empty((n_steps, 1))
    x, v = float(x0), float(v0)
    for i in range(n_steps):
        u = -kp * (x - ref[i]) - kd * v
        states[i] = (x, v, ref[i])
        actions[i, 0] = u
        v += dt * (u - stiffness * x - damping * v)
        x += dt * v
        if abs(x) > 1e6 or not np.isfinite(x):
            raise TrajectoryGenerationError(f"integration diverged at step {i}")
    meta = {"kind": "masspring", "kp": repr(kp), "kd": repr(kd)}
    # tracking reward, used only by the return-to-go token layout
    rewards = -((states[:, 0] - states[:, 2]) ** 2)
    return Trajectory(states, actions, dt, meta, rewards)


def masspring_dataset(
    count: int,
    n_steps: int,
    dt: float = 0.01,
    kp: float = 20.0,
    kd: float = 6.0,
    seed: int = 0,
) -> list[Trajectory]:
    """Expert demonstrations with random references and initial conditions."""
    rng = np.random.default_rng(seed)
    trajs = []
    for i in range(count):
        ref = random_reference(rng)
        x0, v0 = rng.uniform(-0.5, 0.5, size=2)
        tr = gen_masspring_imitation(kp, kd, ref, n_steps, dt, x0=x0, v0=v0)
        tr.meta["id"] = str(i)
        trajs.append(tr)
    return trajs


# --------------------------------------------------------------------------
# normalisation
# --------------------------------------------------------------------------

STD_FLOOR = 1e-8


@dataclass
class NormStats:
    state_mean: np.ndarray
    state_std: np.ndarray
    action_mean: np.ndarray
    action_std: np.ndarray

    def to_dict(self) -> dict[str, list[float]]:
        return {k: getattr(self, k).tolist() for k in _NORM_FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        try:
            arrs = [np.asarray(d[k], dtype=np.float64).reshape(-1) for k in _NORM_FIELDS]
        except KeyError as exc:
            raise ValueError(f"normalisation record lacks {exc}") from None
        if np.any(arrs[1] <= 0) or np.any(arrs[3] <= 0):
            raise ValueError("normalisation std must be positive")
        return cls(*arrs)


_NORM_FIELDS = ("state_mean", "state_std", "action_mean", "action_std")


def fit_norm(trajs: Sequence[Trajectory]) -> NormStats:
    if not trajs:
        raise ValueError("cannot fit normalisation on an empty set")
    s = np.concatenate([t.states for t in trajs])
    a = np.concatenate([t.actions for t in trajs])
    return NormStats(
        s.mean(axis=0), np.maximum(s.std(axis=0), STD_FLOOR),
        a.mean(axis=0), np.maximum(a.std(axis=0), STD_FLOOR),
    )


def apply_norm(tr: Trajectory, stats: NormStats) -> Trajectory:
    return Trajectory(
        (tr.states - stats.state_mean) / stats.state_std,
        (tr.actions - stats.action_mean) / stats.action_std,
        tr.dt, dict(tr.meta), tr.rewards,
    )


def invert_norm(tr: Trajectory, stats: NormStats) -> Trajectory:
    return Trajectory(
        tr.states * stats.state_std + stats.state_mean,
        tr.actions * stats.action_std + stats.action_mean,
        tr.dt, dict(tr.meta), tr.rewards,
    )


# --------------------------------------------------------------------------
# windows
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TokenLayout:
    """``state_only`` feeds states as-is. ``rtg_action_state`` builds each token
    as ``[return_to_go / rtg_scale, previous action, state]``."""

    mode: str = "state_only"
    rtg_scale: float = 1.0

    def __post_init__(self):
        if self.mode not in ("state_only", "rtg_action_state"):
            raise ValueError(f"unknown token layout {self.mode!r}")
        if self.rtg_scale == 0:
            raise ValueError("rtg_scale must be non-zero")

    def token_dim(self, d_s: int, d_a: int) -> int:
        return d_s if self.mode == "state_only" else 1 + d_a + d_s


@dataclass
class Window:
    states: np.ndarray   # (n, token_dim)
    actions: np.ndarray  # (n, d_a)
    mask: np.ndarray     # (n,) 1 for real rows
    traj_index: int


def _tokens(tr: Trajectory, layout: TokenLayout) -> np.ndarray:
    if layout.mode == "state_only":
        return tr.states
    if tr.rewards is None:
        raise ValueError("return-to-go layout needs per-step rewards")
    rtg = np.cumsum(tr.rewards[::-1])[::-1] / layout.rtg_scale
    prev = np.vstack([np.zeros((1, tr.d_a)), tr.actions[:-1]])
    return np.hstack([rtg[:, None], prev, tr.states])


def window_dataset(
    trajs: Sequence[Trajectory],
    n: int,
    layout: TokenLayout | None = None,
    stats: NormStats | None = None,
    stride: int | None = None,
) -> Iterator[Window]:
    """Cut trajectories into length-``n`` training windows.

    Windows start every ``stride`` steps (default ``n``); a tail not reached by
    a full stride gets one extra window ending at the last step. Trajectories
    shorter than ``n`` give one window padded with zero rows at the front.
    """
    layout = layout or TokenLayout()
    stride = stride or n
    if n < 1 or stride < 1:
        raise ValueError("n and stride must be positive")
    dims = None
    for idx, tr in enumerate(trajs):
        if dims is None:
            dims = (tr.d_s, tr.d_a)
        elif (tr.d_s, tr.d_a) != dims:
            raise ValueError(f"trajectory {idx} has dims {(tr.d_s, tr.d_a)}, expected {dims}")
        if stats is not None:
            if len(stats.state_mean) != tr.d_s or len(stats.action_mean) != tr.d_a:
                raise ValueError("normalisation stats do not match trajectory dims")
            tr = apply_norm(tr, stats)
        tokens = _tokens(tr, layout)
        T = len(tr)
        if T < n:
            pad = n - T
            yield Window(
                np.vstack([np.zeros((pad, tokens.shape[1])), tokens]),
                np.vstack([np.zeros((pad, tr.d_a)), tr.actions]),
                np.concatenate([np.zeros(pad), np.ones(T)]),
                idx,
            )
            continue
        starts = list(range(0, T - n + 1, stride))
        if starts[-1] + n < T:
            starts.append(T - n)
        for s in starts:
            yield Window(tokens[s : s + n], tr.actions[s : s + n], np.ones(n), idx)


def windows_to_batch(windows: Iterable[Window]) -> Batch:
    ws = list(windows)
    if not ws:
        raise ValueError("no windows")
    return Batch(
        np.stack([w.states for w in ws]),
        np.stack([w.actions for w in ws]),
        np.stack([w.mask for w in ws]),
    )


def _traj_id(tr: Trajectory, index: int) -> str:
    return tr.meta.get("id", str(index))


def split_train_val(
    trajs: Sequence[Trajectory], val_frac: float = 0.1
) -> tuple[list[Trajectory], list[Trajectory]]:
    """Deterministic split on a CRC32 hash of each trajectory id."""
    buckets = int(round(val_frac * 1000))
    train, val = [], []
    for i, tr in enumerate(trajs):
        h = zlib.crc32(_traj_id(tr, i).encode()) % 1000
        (val if h < buckets else train).append(tr)
    return train, val


# --------------------------------------------------------------------------
# FCTRAJ v1 text format
# --------------------------------------------------------------------------

_HEADER = re.compile(r"^FCTRAJ v1 d_s=(\d+) d_a=(\d+) dt=(\S+)$")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def serialize(trajs: Iterable[Trajectory]) -> str:
    blocks = []
    for tr in trajs:
        lines = [f"FCTRAJ v1 d_s={tr.d_s} d_a={tr.d_a} dt={_fmt(tr.dt)}"]
        rows = np.hstack([tr.states, tr.actions])
        lines.extend(" ".join(_fmt(v) for v in row) for row in rows)
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def parse(text: str) -> list[Trajectory]:
    trajs = []
    block: list[str] = []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.rstrip("\n")
        if line.strip() == "":
            if block:
                trajs.append(_parse_block(block, lineno))
                block = []
            continue
        block.append(line)
    if block:
        trajs.append(_parse_block(block, lineno))
    return trajs


def _parse_block(lines: list[str], lineno: int) -> Trajectory:
    m = _HEADER.match(lines[0])
    if not m:
        raise ValueError(f"bad trajectory header near line {lineno}: {lines[0]!r}")
    d_s, d_a, dt = int(m.group(1)), int(m.group(2)), float(m.group(3))
    if len(lines) < 2:
        raise ValueError(f"trajectory without steps near line {lineno}")
    rows = []
    for line in lines[1:]:
        parts = line.split(" ")
        if len(parts) != d_s + d_a:
            raise ValueError(f"expected {d_s + d_a} values per step, got {len(parts)}")
        rows.append([float(p) for p in parts])
    arr = np.array(rows, dtype=np.float64)
    return Trajectory(arr[:, :d_s], arr[:, d_s:], dt)


def save_trajectories(trajs: Iterable[Trajectory], path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(serialize(trajs))


def load_trajectories(path: str | os.PathLike) -> list[Trajectory]:
    with open(path) as fh:
        return parse(fh.read())
