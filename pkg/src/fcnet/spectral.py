"""Numeric kernels: windowed DFT/IDFT, a radix-2 FFT, real FFT and FFT convolution.

Conventions
-----------
Time runs along axis 0 for window/mode arrays (``(n, d)`` windows, ``(m, d)``
mode matrices) and along the *last* axis for the FFT and convolution kernels,
which broadcast over any leading batch axes.

The DFT of a window is taken over relative positions: the oldest sample of
the window sits at index 0 and the newest at index ``n - 1``.
"""
from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from functools import lru_cache

import numpy as np

__all__ = [
    "max_modes",
    "is_power_of_two",
    "next_power_of_two",
    "fft",
    "ifft",
    "rfft",
    "irfft",
    "dft_window",
    "conjugate_extend",
    "idft_at",
    "fft_linear_convolve",
    "set_fft_backend",
    "fft_backend",
]


def max_modes(n: int) -> int:
    """Largest admissible mode count for a length-``n`` real window."""
    return 1 + n // 2


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


def _check_modes(n: int, m: int) -> None:
    if not 1 <= m <= max_modes(n):
        raise ValueError(f"mode count m={m} outside [1, {max_modes(n)}] for n={n}")


# --------------------------------------------------------------------------
# power-of-two complex FFT backends
# --------------------------------------------------------------------------

_BACKENDS = ("numpy", "radix2")
# context-local so concurrent callers never see each other's choice
_backend_var: ContextVar[str] = ContextVar("fcnet_fft_backend", default="numpy")


def set_fft_backend(name: str) -> str:
    """Select the power-of-two FFT engine; returns the previous one.

    ``"numpy"`` uses numpy's pocketfft, ``"radix2"`` the in-house Stockham
    radix-2 transform below. Both give identical results to ~1e-13.
    """
    if name not in _BACKENDS:
        raise ValueError(f"unknown FFT backend {name!r}; choose from {_BACKENDS}")
    prev = _backend_var.get()
    _backend_var.set(name)
    return prev


@contextmanager
def fft_backend(name: str):
    prev = set_fft_backend(name)
    try:
        yield
    finally:
        set_fft_backend(prev)


@lru_cache(maxsize=64)
def _stockham_twiddles(n: int) -> tuple[np.ndarray, ...]:
    out = []
    half = 1
    while half < n:
        tw = np.exp(-1j * np.pi * np.arange(half) / half)
        tw.setflags(write=False)
        out.append(tw)
        half *= 2
    return tuple(out)


def _fft_radix2(x: np.ndarray) -> np.ndarray:
    # Stockham autosort: each pass merges pairs of length-`half` transforms,
    # so no bit-reversal permutation is needed
    n = x.shape[-1]
    lead = x.shape[:-1]
    y = np.asarray(x, dtype=np.complex128)
    half = 1
    for tw in _stockham_twiddles(n):
        y = y.reshape(lead + (2, n // (2 * half), half))
        a = y[..., 0, :, :]
        b = y[..., 1, :, :] * tw
        y = np.stack((a + b, a - b), axis=-2)
        half *= 2
    return y.reshape(lead + (n,))


def _fft_pow2(x: np.ndarray) -> np.ndarray:
    if _backend_var.get() == "numpy":
        return np.fft.fft(x, axis=-1)
    return _fft_radix2(x)


def _dft_matrix(n: int, rows: int, sign: float) -> np.ndarray:
    k = np.arange(rows)[:, None]
    i = np.arange(n)[None, :]
    # reduce k*i mod n before scaling keeps the phase argument small
    return np.exp(sign * 2j * np.pi * ((k * i) % n) / n)


def fft(x: np.ndarray) -> np.ndarray:
    """Complex DFT along the last axis (radix-2 when possible, direct otherwise)."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if is_power_of_two(n):
        return _fft_pow2(x)
    return x @ _dft_matrix(n, n, -1.0).T


def ifft(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    n = z.shape[-1]
    return np.conj(fft(np.conj(z))) / n


# --------------------------------------------------------------------------
# real FFT via half-length complex packing
# --------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _rfft_twiddle(n: int) -> np.ndarray:
    tw = np.exp(-2j * np.pi * np.arange(n // 2 + 1) / n)
    tw.setflags(write=False)
    return tw


def rfft(x: np.ndarray, return_path: bool = False):
    """Non-negative-frequency half of the DFT of a real signal (last axis).

    Returns ``1 + n // 2`` bins. Power-of-two lengths take the fast path
    (numpy's ``rfft`` or a half-length packed radix-2 transform, per the
    active backend); any other length falls back to direct summation. With
    ``return_path=True`` a ``(spectrum, path)`` pair is returned where
    ``path`` is ``"numpy"``, ``"radix2"`` or ``"direct"``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n < 1:
        raise ValueError("rfft needs at least one sample")
    if not is_power_of_two(n):
        spec = x @ _dft_matrix(n, max_modes(n), -1.0).T
        return (spec, "direct") if return_path else spec
    backend = _backend_var.get()
    if backend == "numpy" or n == 1:
        spec = np.fft.rfft(x, axis=-1)
        return (spec, backend) if return_path else spec

    h = n // 2
    z = _fft_pow2(x[..., 0::2] + 1j * x[..., 1::2])
    # Z_{h-k} for k = 0..h, with Z_h == Z_0
    zr = np.conj(np.concatenate((z[..., :1], z[..., :0:-1], z[..., :1]), axis=-1))
    zk = np.concatenate((z, z[..., :1]), axis=-1)
    even = 0.5 * (zk + zr)
    odd = -0.5j * (zk - zr)
    spec = even + _rfft_twiddle(n) * odd
    return (spec, backend) if return_path else spec


def irfft(spec: np.ndarray, n: int | None = None) -> np.ndarray:
    """Inverse of :func:`rfft`. ``n`` defaults to ``2 * (bins - 1)``.

    The imaginary parts of the DC bin (and of the Nyquist bin for even ``n``)
    are ignored, as for any real-signal inverse transform.
    """
    spec = np.asarray(spec, dtype=np.complex128)
    bins = spec.shape[-1]
    if n is None:
        n = 2 * (bins - 1)
    if n < 1 or bins != max_modes(n):
        raise ValueError(f"{bins} bins do not describe a length-{n} real signal")
    if not is_power_of_two(n):
        full = conjugate_extend(np.moveaxis(spec, -1, 0), n)
        full = np.moveaxis(full, 0, -1)
        return (full @ _dft_matrix(n, n, 1.0).T).real / n
    if _backend_var.get() == "numpy" or n == 1:
        return np.fft.irfft(spec, n, axis=-1)

    h = n // 2
    xk = spec[..., :h]
    xr = np.conj(spec[..., h:0:-1])
    even = 0.5 * (xk + xr)
    odd = 0.5 * (xk - xr) * np.conj(_rfft_twiddle(n)[:h])
    z = ifft(even + 1j * odd)
    out = np.empty(spec.shape[:-1] + (n,), dtype=np.float64)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


# --------------------------------------------------------------------------
# windowed transforms on (n, d) / (m, d) arrays
# --------------------------------------------------------------------------

def dft_window(window: np.ndarray, m: int) -> np.ndarray:
    """Lowest ``m`` DFT modes of a real window.

    ``window`` has shape ``(n,)`` or ``(n, d)``; row 0 is the oldest sample.
    Returns a complex array of shape ``(m,)`` or ``(m, d)``.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim not in (1, 2):
        raise ValueError(f"window must be (n,) or (n, d), got shape {window.shape}")
    n = window.shape[0]
    _check_modes(n, m)
    if not np.all(np.isfinite(window)):
        raise ValueError("window contains non-finite values")
    if is_power_of_two(n):
        spec = rfft(np.moveaxis(window, 0, -1))
        return np.moveaxis(spec, -1, 0)[:m].copy()
    return _dft_matrix(n, m, -1.0) @ window


def conjugate_extend(y: np.ndarray, n: int) -> np.ndarray:
    """Full ``n``-bin spectrum from ``m`` retained modes using conjugate symmetry.

    Bins ``k < m`` copy ``y[k]``; bins ``n-m+1 <= k < n`` take ``conj(y[n-k])``;
    the rest are zero. If both rules reach the same bin (even ``n`` with
    ``m = n/2 + 1``) the direct copy is kept.
    """
    y = np.asarray(y, dtype=np.complex128)
    m = y.shape[0]
    _check_modes(n, m)
    z = np.zeros((n,) + y.shape[1:], dtype=np.complex128)
    z[:m] = y
    for k in range(max(m, n - m + 1), n):
        z[k] = np.conj(y[n - k])
    return z


def idft_at(z: np.ndarray, position: int) -> np.ndarray:
    """Inverse DFT of a full spectrum evaluated at a single time index."""
    z = np.asarray(z, dtype=np.complex128)
    n = z.shape[0]
    if not 0 <= position < n:
        raise ValueError(f"position {position} outside [0, {n})")
    k = np.arange(n)
    phase = np.exp(2j * np.pi * ((k * position) % n) / n)
    return np.tensordot(phase, z, axes=(0, 0)) / n


# --------------------------------------------------------------------------
# linear convolution
# --------------------------------------------------------------------------

def fft_linear_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full linear convolution along the last axis via zero-padded FFTs.

    Leading axes broadcast. Real inputs give a real result (packed real FFT);
    otherwise the result is complex. Output length is ``p + q - 1``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    p, q = a.shape[-1], b.shape[-1]
    if p < 1 or q < 1:
        raise ValueError("convolution operands must be non-empty")
    out_len = p + q - 1
    size = next_power_of_two(out_len)
    if np.iscomplexobj(a) or np.iscomplexobj(b):
        fa = fft(_pad(a.astype(np.complex128), size))
        fb = fft(_pad(b.astype(np.complex128), size))
        return ifft(fa * fb)[..., :out_len]
    fa = rfft(_pad(a.astype(np.float64), size))
    fb = rfft(_pad(b.astype(np.float64), size))
    return irfft(fa * fb, size)[..., :out_len]


def _pad(x: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(x.shape[:-1] + (size,), dtype=x.dtype)
    out[..., : x.shape[-1]] = x
    return out
