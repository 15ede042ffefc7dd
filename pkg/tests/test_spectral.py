import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fcnet import spectral


def brute_dft(x, m):
    # double loop over mode and relative position
    n = len(x)
    out = np.zeros((m,) + x.shape[1:], dtype=complex)
    for k in range(m):
        for i in range(n):
            out[k] += x[i] * np.exp(-2j * np.pi * k * i / n)
    return out


def brute_conv(a, b):
    out = np.zeros(len(a) + len(b) - 1, dtype=np.result_type(a, b, float))
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


@pytest.fixture(params=["numpy", "radix2"])
def backend(request):
    with spectral.fft_backend(request.param):
        yield request.param


# ---------------------------------------------------------------- dft_window

def test_constant_window_has_only_dc():
    c = 2.5
    np.testing.assert_allclose(spectral.dft_window(np.full(4, c), 2), [4 * c, 0], atol=1e-12)


def test_impulse_at_newest_position(backend):
    got = spectral.dft_window(np.array([0.0, 0, 0, 1]), 3)
    np.testing.assert_allclose(got, [1, 1j, -1], atol=1e-12)


def test_impulse_full_band_with_direct_path():
    # m = 4 exceeds 1 + n//2 for n = 4, so the full set is checked via brute force
    x = np.array([0.0, 0, 0, 1])
    np.testing.assert_allclose(brute_dft(x, 4), [1, 1j, -1, -1j], atol=1e-12)
    np.testing.assert_allclose(spectral.dft_window(x, 3), [1, 1j, -1], atol=1e-12)


def test_dft_window_matches_double_sum(backend):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((8, 3))
    np.testing.assert_allclose(spectral.dft_window(x, 5), brute_dft(x, 5), atol=1e-12)


@pytest.mark.parametrize("n", [3, 5, 6, 12])
def test_dft_window_non_power_of_two(n):
    x = np.random.default_rng(n).standard_normal((n, 2))
    m = spectral.max_modes(n)
    np.testing.assert_allclose(spectral.dft_window(x, m), brute_dft(x, m), atol=1e-12)


def test_dft_window_rejects_bad_mode_count():
    with pytest.raises(ValueError):
        spectral.dft_window(np.zeros(8), 6)
    with pytest.raises(ValueError):
        spectral.dft_window(np.zeros(8), 0)


def test_dft_window_rejects_bad_shape_and_nan():
    with pytest.raises(ValueError):
        spectral.dft_window(np.zeros((2, 2, 2)), 1)
    with pytest.raises(ValueError):
        spectral.dft_window(np.array([0.0, np.nan, 0, 0]), 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_dft_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 16, 2))
    lhs = spectral.dft_window(a * x + b * y, 9)
    rhs = a * spectral.dft_window(x, 9) + b * spectral.dft_window(y, 9)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@pytest.mark.parametrize("n", [4, 7, 16, 64])
def test_parseval_with_conjugate_folding(n):
    x = np.random.default_rng(n).standard_normal(n)
    spec = spectral.dft_window(x, spectral.max_modes(n))
    w = np.full(len(spec), 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    energy = np.sum(w * np.abs(spec) ** 2)
    assert energy == pytest.approx(n * np.sum(x * x), rel=1e-8)


# --------------------------------------------------------- conjugate_extend

def test_conjugate_extend_structure():
    y = np.array([1 + 1j, 2 - 3j, 0.5 + 2j])
    z = spectral.conjugate_extend(y, 8)
    expected = [y[0], y[1], y[2], 0, 0, 0, np.conj(y[2]), np.conj(y[1])]
    np.testing.assert_array_equal(z, expected)


def test_conjugate_extend_dc_only():
    np.testing.assert_array_equal(spectral.conjugate_extend(np.array([5.0]), 4), [5, 0, 0, 0])


def test_conjugate_extend_nyquist_overlap_keeps_direct_value():
    z = spectral.conjugate_extend(np.array([1, 1j, 2]), 4)
    np.testing.assert_array_equal(z, [1, 1j, 2, -1j])


def test_nyquist_overlap_of_real_window_gives_real_output():
    x = np.random.default_rng(3).standard_normal(4)
    z = spectral.conjugate_extend(spectral.dft_window(x, 3), 4)
    for p in range(4):
        v = spectral.idft_at(z, p)
        assert abs(v.imag) < 1e-12


# ------------------------------------------------------------------ idft_at

@pytest.mark.parametrize("n", [2, 4, 5, 8, 16, 64])
def test_full_band_roundtrip(n):
    x = np.random.default_rng(n).standard_normal((n, 3))
    z = spectral.conjugate_extend(spectral.dft_window(x, spectral.max_modes(n)), n)
    for p in range(n):
        v = spectral.idft_at(z, p)
        np.testing.assert_allclose(v.real, x[p], atol=1e-10)
        assert np.abs(v.imag).max() < 1e-10


def test_idft_dc_only():
    z = np.zeros(8, dtype=complex)
    z[0] = 3.0
    for p in range(8):
        assert spectral.idft_at(z, p) == pytest.approx(3.0 / 8)


def test_idft_conjugate_symmetric_is_real_and_matches_sum():
    rng = np.random.default_rng(5)
    n = 8
    half = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    half[0] = half[0].real
    half[4] = half[4].real
    z = np.concatenate([half, np.conj(half[1:4][::-1])])
    for p in range(n):
        ref = sum(z[k] * np.exp(2j * np.pi * k * p / n) for k in range(n)) / n
        got = spectral.idft_at(z, p)
        assert abs(got - ref) < 1e-12
        assert abs(got.imag) < 1e-12


def test_idft_position_out_of_range():
    with pytest.raises(ValueError):
        spectral.idft_at(np.zeros(4, dtype=complex), 4)
    with pytest.raises(ValueError):
        spectral.idft_at(np.zeros(4, dtype=complex), -1)


# --------------------------------------------------------------------- rfft

def test_rfft_impulse(backend):
    x = np.zeros(8)
    x[0] = 1
    np.testing.assert_allclose(spectral.rfft(x), np.ones(5), atol=1e-14)


def test_rfft_matches_dft_window_16(backend):
    x = np.random.default_rng(16).standard_normal(16)
    np.testing.assert_allclose(spectral.rfft(x), brute_dft(x, 9), atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 32, 128, 512, 1024])
def test_rfft_all_powers_of_two(backend, n):
    x = np.random.default_rng(n).standard_normal(n)
    ref = x @ np.exp(-2j * np.pi * np.outer(np.arange(n // 2 + 1), np.arange(n)) / n).T
    got = spectral.rfft(x)
    assert np.abs(got - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())


@pytest.mark.parametrize("n", [2, 8, 64, 256])
def test_rfft_roundtrip(backend, n):
    x = np.random.default_rng(n).standard_normal((3, n))
    np.testing.assert_allclose(spectral.irfft(spectral.rfft(x)), x, atol=1e-12)


def test_rfft_reports_path():
    x = np.random.default_rng(0).standard_normal(12)
    spec, path = spectral.rfft(x, return_path=True)
    assert path == "direct"
    np.testing.assert_allclose(spec, brute_dft(x, 7), atol=1e-12)
    irr = spectral.irfft(spec, 12)
    np.testing.assert_allclose(irr, x, atol=1e-12)
    with spectral.fft_backend("radix2"):
        assert spectral.rfft(np.ones(8), return_path=True)[1] == "radix2"
    assert spectral.rfft(np.ones(8), return_path=True)[1] == "numpy"


def test_backends_agree_on_complex_fft():
    z = np.random.default_rng(2).standard_normal((4, 256)) * (1 + 0.5j)
    a = spectral.fft(z)
    with spectral.fft_backend("radix2"):
        b = spectral.fft(z)
    np.testing.assert_allclose(a, b, atol=1e-11)
    np.testing.assert_allclose(spectral.ifft(a), z, atol=1e-12)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        spectral.set_fft_backend("fftw")


def test_irfft_rejects_inconsistent_length():
    with pytest.raises(ValueError):
        spectral.irfft(np.zeros(5, dtype=complex), 16)


# ------------------------------------------------------ fft_linear_convolve

def test_convolve_delta():
    a, b = 1.5, -2.0
    np.testing.assert_allclose(spectral.fft_linear_convolve([1.0, 0.0], [a, b]), [a, b, 0], atol=1e-14)


def test_convolve_ones():
    np.testing.assert_allclose(spectral.fft_linear_convolve([1.0, 1.0], [1.0, 1.0]), [1, 2, 1], atol=1e-14)


def test_convolve_complex_random_13_27(backend):
    rng = np.random.default_rng(13)
    a = rng.standard_normal(13) + 1j * rng.standard_normal(13)
    b = rng.standard_normal(27) + 1j * rng.standard_normal(27)
    np.testing.assert_allclose(spectral.fft_linear_convolve(a, b), brute_conv(a, b), atol=1e-9)


def test_convolve_exhaustive_small_sizes(backend):
    rng = np.random.default_rng(0)
    for p in range(1, 65, 3):
        for q in range(1, 65, 5):
            a, b = rng.standard_normal(p), rng.standard_normal(q)
            got = spectral.fft_linear_convolve(a, b)
            assert got.shape == (p + q - 1,)
            np.testing.assert_allclose(got, np.convolve(a, b), atol=1e-10)


def test_convolve_broadcasts_leading_axes():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((3, 1, 5))
    b = rng.standard_normal((1, 2, 7))
    got = spectral.fft_linear_convolve(a, b)
    for i in range(3):
        for j in range(2):
            np.testing.assert_allclose(got[i, j], np.convolve(a[i, 0], b[0, j]), atol=1e-12)


def test_convolve_rejects_empty():
    with pytest.raises(ValueError):
        spectral.fft_linear_convolve([], [1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40),
       st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40))
def test_convolve_property(a, b):
    got = spectral.fft_linear_convolve(np.array(a), np.array(b))
    ref = np.convolve(a, b)
    assert np.all(np.isfinite(got))
    np.testing.assert_allclose(got, ref, atol=1e-8 * max(1.0, np.abs(a).max() * np.abs(b).max() * len(a)))


def test_mode_helpers():
    assert spectral.max_modes(64) == 33
    assert spectral.max_modes(5) == 3
    assert spectral.is_power_of_two(1) and spectral.is_power_of_two(64)
    assert not spectral.is_power_of_two(0) and not spectral.is_power_of_two(12)
    assert spectral.next_power_of_two(33) == 64
    assert spectral.next_power_of_two(1) == 1
