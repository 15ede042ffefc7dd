import csv
import math

import numpy as np
import pytest

from fcnet.data import Trajectory, gen_harmonic, save_trajectories
from fcnet.profile import SPECTRUM_CSV_HEADER, spectrum_report, write_spectrum_csv


def traj(x):
    x = np.asarray(x, dtype=float)
    return Trajectory(x[:, None], np.zeros((len(x), 0)), 0.01)


def test_density_sums_to_100_and_nonnegative():
    r = spectrum_report(traj(np.random.default_rng(0).standard_normal(300)), n=64)
    assert r.density_pct.sum() == pytest.approx(100.0, abs=1e-9)
    assert (r.density_pct >= 0).all()
    assert r.cumulative_pct[-1] == pytest.approx(100.0, abs=1e-9)
    assert len(r.density_pct) == 33
    assert r.windows == 300 - 64 + 1


def test_sinusoid_on_a_bin_lands_in_that_mode():
    n = 256
    t = np.arange(1024)
    r = spectrum_report(traj(np.sin(2 * math.pi * 4 * t / n + 0.3)), n=n, m_highlight=10)
    assert r.peak_mode == 4
    assert r.density_pct[4] == pytest.approx(100.0, abs=1e-9)
    assert r.low_mode_coverage == pytest.approx(100.0, abs=1e-9)


def test_constant_is_pure_dc():
    r = spectrum_report(traj(np.full(80, -2.5)), n=16, m_highlight=3)
    assert r.density_pct[0] == pytest.approx(100.0)
    assert r.density_pct[1:].max() < 1e-20


def test_zero_signal_reports_dc():
    r = spectrum_report(traj(np.zeros(20)), n=8, m_highlight=2)
    assert r.density_pct[0] == 100.0


def test_white_noise_is_flat():
    n = 64
    x = np.random.default_rng(7).standard_normal(100 * n)
    r = spectrum_report(traj(x), n=n, stride=n)
    assert r.windows == 100
    assert r.density_pct.max() < 5.0


def test_channel_indexes_states_then_actions():
    tr = gen_harmonic(1.0, 2 * math.pi * 4 / 2.56, 0.0, 512, 0.01, mirror_action=True)
    rs = spectrum_report(tr, channel=0, n=256)
    ra = spectrum_report(tr, channel=2, n=256)
    np.testing.assert_allclose(rs.density_pct, ra.density_pct, atol=1e-9)
    with pytest.raises(ValueError):
        spectrum_report(tr, channel=3, n=256)


def test_too_short_raises():
    with pytest.raises(ValueError):
        spectrum_report(traj(np.ones(10)), n=16)
    with pytest.raises(ValueError):
        spectrum_report(traj(np.ones(40)), n=16, m_highlight=10)


def test_reads_file_and_writes_csv(tmp_path):
    path = tmp_path / "h.fctraj"
    save_trajectories([traj(np.sin(np.arange(64) * 2 * math.pi / 16))], path)
    r = spectrum_report(str(path), n=16, m_highlight=3)
    out = tmp_path / "s.csv"
    write_spectrum_csv(r, out)
    rows = list(csv.reader(out.read_text().splitlines()))
    assert tuple(rows[0]) == SPECTRUM_CSV_HEADER
    assert len(rows) == 1 + 9
    assert [int(r_[0]) for r_ in rows[1:]] == list(range(9))
    assert float(rows[2][1]) == pytest.approx(100.0, abs=1e-9)
