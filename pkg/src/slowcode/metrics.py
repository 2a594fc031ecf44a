"""Sidelobe metrics over regions of a PCAF grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .pcaf import DB_FLOOR, PcafGrid


@dataclass(frozen=True)
class RegionSpec:
    """Cells of the lag/Doppler grid to score.

    ``lags=None`` means every lag of the grid; ``p_max=None`` means every
    bin. ``exclusions`` removes individual (l, p) cells, e.g. the (0, 0)
    mainlobe of an auto-ambiguity.
    """

    lags: tuple[int, ...] | None = None
    p_max: int | None = None
    exclusions: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if self.lags is not None:
            object.__setattr__(self, "lags", tuple(int(l) for l in self.lags))
        object.__setattr__(self, "exclusions", tuple((int(l), int(p)) for l, p in self.exclusions))
        if self.p_max is not None and self.p_max < 0:
            raise ValueError("p_max must be non-negative")
        for l, p in self.exclusions:
            if (self.lags is not None and l not in self.lags) or (self.p_max is not None and abs(p) > self.p_max):
                raise ValueError(f"exclusion {(l, p)} lies outside the region")

    def mask(self, grid: PcafGrid) -> np.ndarray:
        lags, bins = grid.lags, grid.bins
        lag_ok = np.ones(lags.size, bool) if self.lags is None else np.isin(lags, self.lags)
        bin_ok = np.ones(bins.size, bool) if self.p_max is None else np.abs(bins) <= self.p_max
        m = lag_ok[:, None] & bin_ok[None, :]
        for l, p in self.exclusions:
            if abs(l) <= grid.n_len - 1 and abs(p) <= grid.p_max:
                m[l + grid.n_len - 1, p + grid.p_max] = False
        return m

    def with_mainlobe_excluded(self) -> "RegionSpec":
        if (0, 0) in self.exclusions:
            return self
        return RegionSpec(self.lags, self.p_max, self.exclusions + ((0, 0),))

    def to_dict(self) -> dict:
        return {
            "lags": "all" if self.lags is None else list(self.lags),
            "p_max": self.p_max,
            "exclusions": [list(e) for e in self.exclusions],
        }


ZERO_DELAY = RegionSpec(lags=(0,))
FULL = RegionSpec()


def _cells(grid: PcafGrid, region: RegionSpec) -> np.ndarray:
    vals = grid.values[region.mask(grid)]
    if vals.size == 0:
        raise ValueError("region is empty after exclusions")
    return vals


def to_db(mag: float | np.ndarray, n_len: int) -> float | np.ndarray:
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(np.asarray(mag) / n_len)
    out = np.maximum(db, DB_FLOOR)
    return float(out) if np.ndim(out) == 0 else out


def psl_db(grid: PcafGrid, region: RegionSpec = ZERO_DELAY) -> float:
    """Peak |r| over the region in dB relative to the mainlobe value N."""
    return to_db(np.max(np.abs(_cells(grid, region))), grid.n_len)


def isl(grid: PcafGrid, region: RegionSpec = FULL) -> float:
    """Sum of |r|^2 over the region."""
    return float(np.sum(np.abs(_cells(grid, region)) ** 2))


def zero_delay_cut(grid: PcafGrid) -> np.ndarray:
    """20*log10(|r[0, p]| / N) for p = -P..P."""
    return to_db(np.abs(grid.values[grid.n_len - 1]), grid.n_len)


def write_cut_csv(grid: PcafGrid, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "db"])
        for p, v in zip(grid.bins, zero_delay_cut(grid)):
            w.writerow([int(p), repr(float(v))])


def metric_report(grid: PcafGrid, region: RegionSpec, labels: Sequence[str]) -> dict:
    return {
        "psl_db": psl_db(grid, region),
        "isl": isl(grid, region),
        "region": region.to_dict(),
        "code_labels": list(labels),
    }
