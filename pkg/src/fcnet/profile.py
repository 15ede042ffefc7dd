"""Frequency-domain energy profile of trajectory channels."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import spectral
from .data import Trajectory, load_trajectories

__all__ = ["SpectrumReport", "spectrum_report", "write_spectrum_csv"]

SPECTRUM_CSV_HEADER = ("mode", "density_pct", "cumulative_pct")


@dataclass
class SpectrumReport:
    n: int
    channel: int
    windows: int
    density_pct: np.ndarray     # (1 + n // 2,)
    cumulative_pct: np.ndarray
    m_highlight: int

    @property
    def low_mode_coverage(self) -> float:
        """Energy share (percent) held by the lowest ``m_highlight`` modes."""
        return float(self.cumulative_pct[self.m_highlight - 1])

    @property
    def peak_mode(self) -> int:
        return int(np.argmax(self.density_pct))


def _fold_weights(n: int) -> np.ndarray:
    # interior bins stand in for their conjugate partner as well
    w = np.full(spectral.max_modes(n), 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return w


def spectrum_report(
    source: str | os.PathLike | Trajectory | Sequence[Trajectory],
    channel: int = 0,
    n: int = 256,
    m_highlight: int = 10,
    stride: int = 1,
) -> SpectrumReport:
    """Average folded energy ``|X_k|^2`` over all length-``n`` sliding windows.

    ``channel`` indexes the concatenated ``[states, actions]`` columns. Every
    trajectory at least ``n`` steps long contributes its windows.
    """
    if isinstance(source, (str, os.PathLike)):
        trajs = load_trajectories(source)
    elif isinstance(source, Trajectory):
        trajs = [source]
    else:
        trajs = list(source)
    if not 1 <= m_highlight <= spectral.max_modes(n):
        raise ValueError(f"m_highlight must lie in [1, {spectral.max_modes(n)}]")
    energy = np.zeros(spectral.max_modes(n))
    count = 0
    for tr in trajs:
        cols = np.hstack([tr.states, tr.actions])
        if not 0 <= channel < cols.shape[1]:
            raise ValueError(f"channel {channel} out of range for {cols.shape[1]} columns")
        if len(tr) < n:
            continue
        wins = sliding_window_view(cols[:, channel], n)[::stride]
        spec = spectral.rfft(wins)
        energy += (np.abs(spec) ** 2).sum(axis=0)
        count += len(wins)
    if count == 0:
        raise ValueError(f"no trajectory has the {n} steps needed for one window")
    energy *= _fold_weights(n)
    total = energy.sum()
    if total > 0:
        density = 100.0 * energy / total
    else:
        density = np.zeros_like(energy)
        density[0] = 100.0
    return SpectrumReport(n, channel, count, density, np.cumsum(density), m_highlight)


def write_spectrum_csv(report: SpectrumReport, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SPECTRUM_CSV_HEADER)
        for k, (d, c) in enumerate(zip(report.density_pct, report.cumulative_pct)):
            w.writerow([k, repr(float(d)), repr(float(c))])
