"""Discrete periodic cross-ambiguity function (PCAF) and its quadratic forms.

Conventions shared by the whole package: indices run 0..N-1, the circular
shift acts as ``(C_l z)[n] = z[(n + l) mod N]`` and the Doppler steering
vector is ``f_p[n] = exp(-2j*pi*(n + 1)*p / N_f)``. With these,

    r[l, p] = x^H Diag(f_p) C_l y
            = sum_n conj(x[n]) y[(n + l) mod N] exp(-2j*pi*(n + 1)*p / N_f)

for lags l in -(N-1)..N-1 and Doppler bins p in -P..P.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .core import Code, DesignConfig, InvalidDimensionError, ValidationError, as_vector

Side = Literal["for_x", "for_y"]
DB_FLOOR = -300.0


def steering(n_len: int, p: int | np.ndarray, n_f: int) -> np.ndarray:
    """Doppler steering vector(s) f_p; shape (N,) or (len(p), N)."""
    n = np.arange(1, n_len + 1)
    return np.exp(-2j * np.pi * np.multiply.outer(p, n) / n_f)


def shift_matrix_apply(z, l: int) -> np.ndarray:
    """Apply the circular shift C_l without forming it: out[n] = z[(n+l) mod N]."""
    v = as_vector(z)
    n = v.size
    if abs(l) > n - 1:
        raise InvalidDimensionError(f"lag {l} outside -(N-1)..N-1 for N={n}")
    return np.roll(v, -l)


@dataclass(frozen=True)
class PcafGrid:
    """PCAF values on the (2N-1) x (2P+1) lag/Doppler grid.

    Row i holds lag ``i - (N-1)``, column j holds bin ``j - P``.
    """

    values: np.ndarray
    n_len: int
    p_max: int
    n_f: int

    def __post_init__(self) -> None:
        shape = (2 * self.n_len - 1, 2 * self.p_max + 1)
        if self.values.shape != shape:
            raise InvalidDimensionError(f"grid shape {self.values.shape} != {shape}")

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-(self.n_len - 1), self.n_len)

    @property
    def bins(self) -> np.ndarray:
        return np.arange(-self.p_max, self.p_max + 1)

    def at(self, l: int, p: int) -> complex:
        return complex(self.values[l + self.n_len - 1, p + self.p_max])

    def magnitude_db(self) -> np.ndarray:
        """20*log10(|r| / N), floored at -300 dB."""
        mag = np.abs(self.values) / self.n_len
        with np.errstate(divide="ignore"):
            db = 20 * np.log10(mag)
        return np.maximum(db, DB_FLOOR)

    def to_csv(self, path: str | Path, db_path: str | Path | None = None) -> None:
        """Write ``l,p,re,im`` rows and optionally the ``l,p,db`` companion."""
        ll, pp = np.meshgrid(self.lags, self.bins, indexing="ij")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["l", "p", "re", "im"])
            for l, p, v in zip(ll.ravel(), pp.ravel(), self.values.ravel()):
                w.writerow([int(l), int(p), repr(float(v.real)), repr(float(v.imag))])
        if db_path is not None:
            db = self.magnitude_db()
            with open(db_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["l", "p", "db"])
                for l, p, v in zip(ll.ravel(), pp.ravel(), db.ravel()):
                    w.writerow([int(l), int(p), repr(float(v))])


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    xv, yv = as_vector(x), as_vector(y)
    if xv.size != yv.size:
        raise InvalidDimensionError(f"code lengths differ: {xv.size} vs {yv.size}")
    return xv, yv


def _check_grid_params(n_len: int, p_max: int, n_f: int) -> None:
    if not n_len < n_f or not 0 < p_max < n_f:
        raise InvalidDimensionError(f"need N < N_f and 0 < P < N_f (N={n_len}, P={p_max}, N_f={n_f})")


def pcaf_grid(x, y, p_max: int, n_f: int) -> PcafGrid:
    """PCAF of (x, y) over every lag and |p| <= P.

    One zero-padded length-N_f FFT per lag; bin p is read at index p mod N_f
    and rotated by exp(-2j*pi*p/N_f) for the (n + 1) phase origin.
    """
    xv, yv = _check_pair(x, y)
    n = xv.size
    _check_grid_params(n, p_max, n_f)
    lags = np.arange(-(n - 1), n)
    idx = (np.arange(n)[None, :] + lags[:, None]) % n
    prod = np.conj(xv)[None, :] * yv[idx]
    spec = np.fft.fft(prod, n=n_f, axis=1)
    bins = np.arange(-p_max, p_max + 1)
    vals = spec[:, bins % n_f] * np.exp(-2j * np.pi * bins / n_f)[None, :]
    return PcafGrid(vals, n, p_max, n_f)


def objective_siso(x, y, cfg: DesignConfig) -> float:
    """Sum of |r[l, p]|^2 over the full design grid."""
    g = pcaf_grid(x, y, cfg.p_max, cfg.n_f)
    return float(np.sum(np.abs(g.values) ** 2))


@dataclass(frozen=True)
class QuadFormMatrix:
    """Hermitian PSD matrix B such that z^H B z is a PCAF energy."""

    matrix: np.ndarray
    side: Side

    def __post_init__(self) -> None:
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidDimensionError(f"quadratic form must be square, got {m.shape}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
            raise ValidationError("quadratic-form matrix is not Hermitian")

    def quad(self, z) -> float:
        v = as_vector(z)
        return float(np.real(np.vdot(v, self.matrix @ v)))

    def check_psd(self, rtol: float = 1e-8) -> None:
        ev = np.linalg.eigvalsh(self.matrix)
        if ev[0] < -rtol * max(1.0, abs(ev[-1])):
            raise ValidationError(f"quadratic-form matrix is not PSD (min eigenvalue {ev[0]:.3e})")


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def build_B_naive(z, side: Side, cfg: DesignConfig) -> QuadFormMatrix:
    """Accumulate the rank-one terms over every (l, p) literally.

    for_y: sum of (Diag(f_p) C_l y)(...)^H, so that x^H B x is the energy.
    for_x: sum of (C_l^H Diag(f_p)^H x)(...)^H, so that y^H B y is the energy.
    Rank-one terms are grouped per lag and summed with a matrix product.
    """
    v = as_vector(z)
    n = v.size
    _check_grid_params(n, cfg.p_max, cfg.n_f)
    if side not in ("for_x", "for_y"):
        raise ValueError(f"unknown side {side!r}")
    F = steering(n, cfg.bins, cfg.n_f)  # (2P+1, N)
    ar = np.arange(n)
    out = np.zeros((n, n), dtype=complex)
    for l in cfg.lags:
        if side == "for_y":
            W = F * v[(ar + l) % n][None, :]
        else:
            src = (ar - l) % n
            W = np.conj(F[:, src]) * v[src][None, :]
        out += W.T @ W.conj()
    return QuadFormMatrix(_hermitize(out), side)


def dirichlet_gram(n_len: int, p_max: int, n_f: int) -> np.ndarray:
    """F_P F_P^H, entry (a, b) = sum_{|p|<=P} exp(-2j*pi*(a-b)*p/N_f) (real)."""
    d = np.arange(-(n_len - 1), n_len)
    p = np.arange(1, p_max + 1)
    g = 1.0 + 2.0 * np.cos(2 * np.pi * np.outer(d, p) / n_f).sum(axis=1)
    a = np.arange(n_len)
    return g[(a[:, None] - a[None, :]) + n_len - 1]


def periodic_autocorr(y) -> np.ndarray:
    """c[l] = sum_n y[n] conj(y[(n+l) mod N]) for l = 0..N-1, via FFT."""
    v = as_vector(y)
    Y = np.fft.fft(v)
    return np.conj(np.fft.ifft(np.abs(Y) ** 2))


def build_B_fast(z, side: Side, cfg: DesignConfig, gram: np.ndarray | None = None) -> QuadFormMatrix:
    """Same matrix as :func:`build_B_naive` in O(N^2).

    for_y: R_y = 2 R_0 - y y^H with circulant R_0[a, b] = c[(b - a) mod N],
    then B = R_y * (F_P F_P^H) elementwise.
    for_x: R_x = (x x^H) * (F_P^* F_P^T); the lag sum of C_l^H R_x C_l only
    permutes rows and columns, which collapses to wrapped-diagonal sums.
    """
    v = as_vector(z)
    n = v.size
    _check_grid_params(n, cfg.p_max, cfg.n_f)
    G = dirichlet_gram(n, cfg.p_max, cfg.n_f) if gram is None else gram
    a = np.arange(n)
    wrap = (a[None, :] - a[:, None]) % n  # (b - a) mod N at [a, b]
    if side == "for_y":
        c = periodic_autocorr(v)
        R = 2.0 * c[wrap] - np.outer(v, v.conj())
        out = R * G
    elif side == "for_x":
        # G is real and symmetric, so F_P^* F_P^T == F_P F_P^H.
        Rx = np.outer(v, v.conj()) * G
        diag_sums = Rx[a[:, None], (a[:, None] + a[None, :]) % n].sum(axis=0)
        out = 2.0 * diag_sums[wrap] - Rx
    else:
        raise ValueError(f"unknown side {side!r}")
    return QuadFormMatrix(_hermitize(out), side)
