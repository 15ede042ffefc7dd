"""Causal spectral convolution (CSC).

For every time ``t`` the block looks at the last ``n`` inputs (samples before
the start of the sequence count as zeros), keeps the ``m`` lowest DFT modes,
mixes them with a complex ``m x m`` matrix ``W`` and reads the inverse DFT back
at the newest window position.

Three execution paths compute the same map:

* :func:`forward_direct` -- per-step window DFT, O(T n m d). Reference only.
* :func:`forward_parallel` -- the whole sequence at once through FFT
  convolution of the mode recurrence.
* :func:`forward_step` -- sliding-DFT streaming with an O(m d) cached update.

All three emit ``y_t = Re(v . X_t) / n`` where ``v = c^T W`` is the folded
inference kernel (see :func:`fold_inference_kernel`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import spectral

__all__ = [
    "CscConfig",
    "CscWeights",
    "CscStreamCache",
    "TwiddleTable",
    "twiddles",
    "init_weights",
    "fold_inference_kernel",
    "time_kernel",
    "spectra_parallel",
    "forward_direct",
    "forward_parallel",
    "new_cache",
    "forward_step",
    "cache_drift",
    "resync_cache",
    "backward",
]


@dataclass(frozen=True)
class CscConfig:
    n: int
    m: int
    d: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"window length n must be >= 2, got {self.n}")
        if not 1 <= self.m <= spectral.max_modes(self.n):
            raise ValueError(
                f"mode count m={self.m} outside [1, {spectral.max_modes(self.n)}]"
            )
        if self.d < 1:
            raise ValueError(f"channel count d must be >= 1, got {self.d}")


@dataclass
class CscWeights:
    """Complex mode-mixing matrix held as a real/imaginary pair."""

    w_re: np.ndarray
    w_im: np.ndarray
    folded: np.ndarray | None = None

    @property
    def w(self) -> np.ndarray:
        return self.w_re + 1j * self.w_im

    @classmethod
    def from_complex(cls, w: np.ndarray) -> "CscWeights":
        w = np.asarray(w, dtype=np.complex128)
        return cls(np.ascontiguousarray(w.real), np.ascontiguousarray(w.imag))

    def fold(self, cfg: CscConfig) -> np.ndarray:
        """Compute, store and return the folded kernel ``v = c^T W``."""
        self.folded = fold_inference_kernel(self, cfg)
        return self.folded


@dataclass(frozen=True)
class TwiddleTable:
    u: np.ndarray  # (m,)  exp(j 2 pi k / n)
    A: np.ndarray  # (n, m) row i holds u ** (i + 1)
    c: np.ndarray  # (m,)  IDFT-at-newest-position coefficients

    @property
    def u_col(self) -> np.ndarray:
        return self.u[:, None]

    def powers(self, length: int) -> np.ndarray:
        """``u ** (i + 1)`` for ``i < length`` using the period-``n`` extension."""
        n = self.A.shape[0]
        return self.A[np.arange(length) % n]


@lru_cache(maxsize=128)
def twiddles(n: int, m: int) -> TwiddleTable:
    k = np.arange(m)
    u = np.exp(2j * np.pi * k / n)
    # exact integer phase reduction keeps u**(i+1) on the unit circle
    i = np.arange(n)[:, None]
    A = np.exp(2j * np.pi * (((i + 1) * k[None, :]) % n) / n)
    c = 2.0 * np.exp(-2j * np.pi * k / n)
    c[0] = 1.0
    if n % 2 == 0 and m == n // 2 + 1:
        c[n // 2] = -1.0  # self-conjugate Nyquist bin counts once
    for arr in (u, A, c):
        arr.setflags(write=False)
    return TwiddleTable(u, A, c)


def init_weights(cfg: CscConfig, rng: np.random.Generator) -> CscWeights:
    bound = 1.0 / cfg.m
    w_re = rng.uniform(-bound, bound, size=(cfg.m, cfg.m))
    w_im = rng.uniform(-bound, bound, size=(cfg.m, cfg.m))
    return CscWeights(w_re, w_im)


def _check_weights(w: CscWeights, cfg: CscConfig) -> None:
    if w.w_re.shape != (cfg.m, cfg.m) or w.w_im.shape != (cfg.m, cfg.m):
        raise ValueError(
            f"W must be {cfg.m}x{cfg.m}, got {w.w_re.shape} / {w.w_im.shape}"
        )


def _check_input(x: np.ndarray, cfg: CscConfig) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[-1] != cfg.d:
        raise ValueError(f"expected input (..., T, {cfg.d}), got shape {x.shape}")
    if x.shape[-2] < 1:
        raise ValueError("sequence must contain at least one step")
    return x


def fold_inference_kernel(w: CscWeights, cfg: CscConfig) -> np.ndarray:
    """Fold mode mixing and the newest-position IDFT into one vector.

    Returns ``v = c^T W`` with ``c_0 = 1``, ``c_k = 2 exp(-j 2 pi k / n)`` and
    ``c_{n/2} = -1`` for the Nyquist bin when it is retained. For any mode
    matrix ``X``, ``Re(v . X) / n`` equals the real part of the inverse DFT at
    position ``n - 1`` of the conjugate extension of ``W X``.
    """
    _check_weights(w, cfg)
    return twiddles(cfg.n, cfg.m).c @ w.w


def time_kernel(w: CscWeights, cfg: CscConfig) -> np.ndarray:
    """Real length-``n`` impulse response of the block.

    ``y_t = sum_{i < n} g_i x_{t-i}``: collapsing the modes before convolving
    turns the block into a causal FIR filter shared by all channels.
    """
    v = fold_inference_kernel(w, cfg)
    tw = twiddles(cfg.n, cfg.m)
    return (tw.A @ v).real / cfg.n


# --------------------------------------------------------------------------
# forward paths
# --------------------------------------------------------------------------

def forward_direct(x: np.ndarray, w: CscWeights, cfg: CscConfig) -> np.ndarray:
    """Reference path: explicit DFT / mix / conjugate-extend / IDFT per step."""
    x = _check_input(x, cfg)
    _check_weights(w, cfg)
    if x.ndim > 2:
        return np.stack([forward_direct(xi, w, cfg) for xi in x])
    T = x.shape[0]
    n, m = cfg.n, cfg.m
    padded = np.concatenate((np.zeros((n - 1, cfg.d)), x))
    W = w.w
    y = np.empty_like(x)
    for t in range(T):
        spec = spectral.dft_window(padded[t : t + n], m)
        z = spectral.conjugate_extend(W @ spec, n)
        y[t] = spectral.idft_at(z, n - 1).real
    return y


def _increments(x: np.ndarray, n: int) -> np.ndarray:
    # f_t = x_t - x_{t-n} with zero history
    f = x.copy()
    f[..., n:, :] -= x[..., :-n, :]
    return f


def spectra_parallel(x: np.ndarray, cfg: CscConfig) -> np.ndarray:
    """Window spectra for every step, shape ``(..., T, m, d)``.

    Unrolling ``X_t = u * (X_{t-1} + f_t)`` from a zero start gives
    ``X_t = sum_{i<=t} u**(i+1) f_{t-i}``: one linear convolution per
    (mode, channel) pair.
    """
    x = _check_input(x, cfg)
    T = x.shape[-2]
    f = np.swapaxes(_increments(x, cfg.n), -1, -2)            # (..., d, T)
    A = twiddles(cfg.n, cfg.m).powers(T).T                     # (m, T)
    conv = spectral.fft_linear_convolve(
        A[:, None, :], f[..., None, :, :]                      # (..., m, d, T)
    )[..., :T]
    return np.moveaxis(conv, -1, -3)                           # (..., T, m, d)


def forward_parallel(
    x: np.ndarray, w: CscWeights, cfg: CscConfig, fused: bool = False
) -> np.ndarray:
    """Whole-sequence output via FFT convolution.

    The default path materialises every window spectrum with
    :func:`spectra_parallel` (O(m d T log T)). ``fused=True`` contracts the
    folded kernel into the convolution kernel first and runs a single real
    convolution per channel (FFT for long sequences, a banded Toeplitz
    matmul for short ones); the result is the same map.
    """
    x = _check_input(x, cfg)
    _check_weights(w, cfg)
    if fused:
        return _fir_forward(time_kernel(w, cfg), x)
    v = fold_inference_kernel(w, cfg)
    spec = spectra_parallel(x, cfg)
    return np.einsum("k,...tkd->...td", v, spec).real / cfg.n


# below this length a dense Toeplitz product beats FFT convolution
_TOEPLITZ_MAX_T = 256


def _toeplitz(g: np.ndarray, T: int) -> np.ndarray:
    # H[t, s] = g[t - s] for 0 <= t - s < len(g)
    lag = np.arange(T)[:, None] - np.arange(T)[None, :]
    ok = (lag >= 0) & (lag < len(g))
    return np.where(ok, g[np.clip(lag, 0, len(g) - 1)], 0.0)


def _fir_forward(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    T = x.shape[-2]
    if T <= _TOEPLITZ_MAX_T:
        return np.matmul(_toeplitz(g, T), x)
    xt = np.swapaxes(x, -1, -2)
    y = spectral.fft_linear_convolve(g, xt)[..., :T]
    return np.swapaxes(y, -1, -2)


# --------------------------------------------------------------------------
# streaming
# --------------------------------------------------------------------------

@dataclass
class CscStreamCache:
    """Per-stream sliding-DFT state: cached spectrum plus input ring buffer."""

    spectrum: np.ndarray  # (m, d) complex
    ring: np.ndarray      # (n, d) most recent inputs, slot ``pos`` is oldest
    pos: int = 0
    steps: int = 0

    def reset(self) -> None:
        self.spectrum[...] = 0.0
        self.ring[...] = 0.0
        self.pos = 0
        self.steps = 0

    def window(self) -> np.ndarray:
        """Ring contents in arrival order (oldest first)."""
        return np.roll(self.ring, -self.pos, axis=0)


def new_cache(cfg: CscConfig) -> CscStreamCache:
    return CscStreamCache(
        spectrum=np.zeros((cfg.m, cfg.d), dtype=np.complex128),
        ring=np.zeros((cfg.n, cfg.d)),
    )


def forward_step(
    x_new: np.ndarray,
    w: CscWeights,
    cache: CscStreamCache,
    cfg: CscConfig,
    v: np.ndarray | None = None,
) -> np.ndarray:
    """Consume one input vector and emit the block output for that step.

    ``v`` may carry a precomputed folded kernel; otherwise ``w.folded`` is used
    when present, else it is computed on the fly.
    """
    x_new = np.asarray(x_new, dtype=np.float64)
    if x_new.shape != (cfg.d,):
        raise ValueError(f"expected input of shape ({cfg.d},), got {x_new.shape}")
    # a finite sum is a cheap proof of finite entries; overflow falls through
    if not math.isfinite(x_new.sum()) and not np.all(np.isfinite(x_new)):
        raise ValueError("non-finite input rejected; stream cache left untouched")
    if v is None:
        v = w.folded if w.folded is not None else fold_inference_kernel(w, cfg)
    u_col = twiddles(cfg.n, cfg.m).u_col
    ring = cache.ring
    spec = cache.spectrum
    spec += x_new - ring[cache.pos]
    spec *= u_col
    ring[cache.pos] = x_new
    cache.pos = (cache.pos + 1) % cfg.n
    cache.steps += 1
    return (v @ spec).real / cfg.n


def cache_drift(cache: CscStreamCache, cfg: CscConfig) -> float:
    """Max-abs gap between the cached spectrum and a fresh DFT of the ring."""
    exact = spectral.dft_window(cache.window(), cfg.m)
    return float(np.max(np.abs(exact - cache.spectrum)))


def resync_cache(cache: CscStreamCache, cfg: CscConfig) -> None:
    """Recompute the cached spectrum from the ring (O(n m d), off the hot path)."""
    cache.spectrum[...] = spectral.dft_window(cache.window(), cfg.m)


# --------------------------------------------------------------------------
# backward
# --------------------------------------------------------------------------

def backward(
    x: np.ndarray, w: CscWeights, cfg: CscConfig, dL_dy: np.ndarray
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Gradients of a scalar loss through :func:`forward_parallel`.

    Returns ``(dL_dx, (dL_dW_re, dL_dW_im))``; the real and imaginary parts of
    ``W`` are independent real parameters. Leading batch axes of ``x`` are
    summed into the weight gradient.
    """
    x = _check_input(x, cfg)
    _check_weights(w, cfg)
    dy = np.asarray(dL_dy, dtype=np.float64)
    if dy.shape != x.shape:
        raise ValueError(f"dL_dy shape {dy.shape} does not match x shape {x.shape}")
    n, T = cfg.n, x.shape[-2]
    g = time_kernel(w, cfg)

    lags = min(n, T)
    G = np.zeros(n)
    if T <= _TOEPLITZ_MAX_T:
        # dL/dx = H^T dy; dL/dg_i sums the lag-i diagonal of dy x^T
        dx = np.matmul(_toeplitz(g, T).T, dy)
        xf = np.moveaxis(x, -2, 0).reshape(T, -1)
        dyf = np.moveaxis(dy, -2, 0).reshape(T, -1)
        M = dyf @ xf.T
        G[:lags] = [np.trace(M, offset=-i) for i in range(lags)]
    else:
        xt = np.swapaxes(x, -1, -2)                 # (..., d, T)
        dyt_rev = np.swapaxes(dy, -1, -2)[..., ::-1]
        # dL/dx_s = sum_t dy_t g_{t-s}: correlate dy with g
        dx = spectral.fft_linear_convolve(g, dyt_rev)[..., :T][..., ::-1]
        dx = np.swapaxes(dx, -1, -2)
        # dL/dg_i = sum_t dy_t . x_{t-i}
        corr = spectral.fft_linear_convolve(xt, dyt_rev)     # (..., d, 2T-1)
        G[:lags] = corr[..., T - 1 - np.arange(lags)].reshape(-1, lags).sum(axis=0)

    # g_i = Re(sum_k v_k A_ik) / n
    tw = twiddles(n, cfg.m)
    dv_re = (tw.A.real.T @ G) / n
    dv_im = -(tw.A.imag.T @ G) / n
    # v_k = sum_r c_r W_rk
    c = tw.c
    dW_re = np.outer(c.real, dv_re) + np.outer(c.imag, dv_im)
    dW_im = -np.outer(c.imag, dv_re) + np.outer(c.real, dv_im)
    return dx, (dW_re, dW_im)
