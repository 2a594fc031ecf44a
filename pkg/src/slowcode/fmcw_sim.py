"""De-chirped FMCW sample synthesis, range-Doppler maps and link-budget ratios.

Samples are generated directly in the de-chirped domain: an emitter with
beat frequency f_B and Doppler f_d contributes
``alpha * exp(2j*pi*(f_B*T_s*m + f_d*T_c*n))`` at fast-time index m and
slow-time index n. A slow-time coded victim radar that demodulates with x
sees an interfering radar transmitting y through ``conj(x[n]) * y[(n+l) % N]``,
while its own target echoes carry ``|x[n]|^2 = 1``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from scipy.ndimage import maximum_filter

from .core import (
    SPEED_OF_LIGHT,
    Code,
    ConfigError,
    Emitter,
    FmcwParams,
    InvalidDimensionError,
    as_vector,
)
from .pcaf import DB_FLOOR

CodingMode = Literal["none", "pair"]


def next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


@dataclass(frozen=True)
class SimScenario:
    """Everything needed to synthesize one CPI of de-chirped samples.

    ``noise_power`` is the per-sample complex noise variance and also the
    reference for each emitter's ``snr_db``. Set ``include_noise=False`` to
    keep the amplitudes but drop the noise realization.
    """

    params: FmcwParams
    emitters: tuple[Emitter, ...]
    coding: CodingMode = "none"
    x: Code | None = None
    y: Code | None = None
    noise_power: float = 1.0
    seed: int = 0
    include_noise: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "emitters", tuple(self.emitters))
        if not self.emitters:
            raise ConfigError("scenario needs at least one emitter")
        if not self.noise_power > 0:
            raise ConfigError(f"noise_power must be positive, got {self.noise_power}")
        if self.coding == "pair":
            if self.x is None or self.y is None:
                raise ConfigError("coding 'pair' needs both x and y")
            for name, c in (("x", self.x), ("y", self.y)):
                if c.n_len != self.params.n_slow:
                    raise ConfigError(f"code {name} has length {c.n_len}, expected n_slow={self.params.n_slow}")
        elif self.coding == "mimo":
            raise ConfigError("coding 'mimo' is reserved and not simulated")
        elif self.coding != "none":
            raise ConfigError(f"unknown coding mode {self.coding!r}")


def emitter_frequencies(em: Emitter, params: FmcwParams) -> tuple[float, float]:
    """(beat frequency, Doppler frequency) in Hz.

    Targets use two-way delay 2R/c and Doppler 2v/lambda. Interferers reach
    the victim over a single path: delay R/c and Doppler v/lambda.
    """
    if em.kind == "target":
        tau, f_d = 2 * em.range_m / SPEED_OF_LIGHT, 2 * em.speed_mps / params.wavelength
    else:
        tau, f_d = em.range_m / SPEED_OF_LIGHT, em.speed_mps / params.wavelength
    return params.slope * tau + f_d, f_d


def normalized_frequencies(em: Emitter, params: FmcwParams) -> tuple[float, float]:
    """(f_B * T_s, f_d * T_c): cycles per fast-time and per slow-time sample."""
    f_b, f_d = emitter_frequencies(em, params)
    return f_b * params.t_s, f_d * params.t_c


def _label(i: int, em: Emitter) -> str:
    return f"emitter {i} ({em.kind} at {em.range_m:g} m)"


def synthesize_samples(sc: SimScenario) -> np.ndarray:
    """Complex M x N de-chirped sample matrix (rows: fast time m, columns: slow time n)."""
    p = sc.params
    m = np.arange(p.m_fast)
    n = np.arange(p.n_slow)
    rng = np.random.default_rng(sc.seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=len(sc.emitters))
    out = np.zeros((p.m_fast, p.n_slow), dtype=complex)
    for i, em in enumerate(sc.emitters):
        fb_hat, fd_hat = normalized_frequencies(em, p)
        if not abs(fb_hat) < 0.5:
            raise ConfigError(f"{_label(i, em)}: beat frequency {fb_hat * p.f_s:.6g} Hz aliases at f_s={p.f_s:g} Hz")
        amp = np.sqrt(sc.noise_power * 10 ** (em.snr_db / 10)) * np.exp(1j * phases[i])
        slow = np.exp(2j * np.pi * fd_hat * n)
        if em.kind == "interferer" and sc.coding == "pair":
            xv, yv = as_vector(sc.x), as_vector(sc.y)
            slow = slow * np.conj(xv) * yv[(n + em.delay_lag) % p.n_slow]
        out += amp * np.outer(np.exp(2j * np.pi * fb_hat * m), slow)
    if sc.include_noise:
        scale = np.sqrt(sc.noise_power / 2)
        out += scale * (rng.standard_normal(out.shape) + 1j * rng.standard_normal(out.shape))
    return out


@dataclass(frozen=True)
class RangeDopplerMap:
    """2-D spectrum over range bin k (rows) and Doppler bin p (columns), FFT order."""

    values: np.ndarray
    range_m: np.ndarray = field(repr=False)
    velocity_mps: np.ndarray = field(repr=False)
    doppler_hat: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.values.shape != (self.range_m.size, self.velocity_mps.size):
            raise InvalidDimensionError("bin metadata does not match map dimensions")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def power_db(self) -> np.ndarray:
        """Power in dB relative to the map maximum (floored)."""
        mag = np.abs(self.values)
        peak = mag.max()
        if peak == 0:
            return np.full(mag.shape, DB_FLOOR)
        with np.errstate(divide="ignore"):
            return np.maximum(20 * np.log10(mag / peak), DB_FLOOR)


def range_doppler_map(samples: np.ndarray, params: FmcwParams, pad_m: int | None = None,
                      pad_n: int | None = None, window: str = "none") -> RangeDopplerMap:
    """Fast-time FFT then slow-time FFT, zero padded to (pad_m, pad_n).

    Pads default to the next power of two of each dimension. The Hann window,
    when requested, is applied along each axis before its transform.
    """
    s = np.asarray(samples, dtype=complex)
    if s.ndim != 2:
        raise InvalidDimensionError(f"samples must be 2-D, got shape {s.shape}")
    m_len, n_len = s.shape
    pad_m = next_pow2(m_len) if pad_m is None else int(pad_m)
    pad_n = next_pow2(n_len) if pad_n is None else int(pad_n)
    if pad_m < m_len or pad_n < n_len:
        raise InvalidDimensionError(f"pad sizes ({pad_m}, {pad_n}) smaller than samples {s.shape}")
    if window == "hann":
        s = s * np.hanning(m_len)[:, None]
    elif window != "none":
        raise ValueError(f"unknown window {window!r}")
    spec = np.fft.fft(s, n=pad_m, axis=0)
    if window == "hann":
        spec = spec * np.hanning(n_len)[None, :]
    spec = np.fft.fft(spec, n=pad_n, axis=1)
    k = np.arange(pad_m)
    range_m = k * SPEED_OF_LIGHT * params.f_s / (2 * params.slope * pad_m)
    doppler_hat = np.fft.fftfreq(pad_n)
    velocity = doppler_hat * params.prf * params.wavelength / 2
    return RangeDopplerMap(spec, range_m, velocity, doppler_hat)


def predicted_bins(em: Emitter, params: FmcwParams, pad_m: int, pad_n: int) -> tuple[int, int]:
    """Nearest (k, p) bins for an uncoded emitter."""
    fb_hat, fd_hat = normalized_frequencies(em, params)
    return int(np.round(fb_hat * pad_m)) % pad_m, int(np.round(fd_hat * pad_n)) % pad_n


def peak_table(rd: RangeDopplerMap, q: int = 5) -> list[dict]:
    """The ``q`` strongest local maxima (3x3 neighborhood, circular edges)."""
    mag = np.abs(rd.values)
    is_peak = (mag == maximum_filter(mag, size=3, mode="wrap")) & (mag > 0)
    k_idx, p_idx = np.nonzero(is_peak)
    order = np.argsort(mag[k_idx, p_idx])[::-1][:q]
    db = rd.power_db()
    return [
        {
            "k": int(k_idx[i]),
            "p": int(p_idx[i]),
            "range_m": float(rd.range_m[k_idx[i]]),
            "velocity_mps": float(rd.velocity_mps[p_idx[i]]),
            "db": float(db[k_idx[i], p_idx[i]]),
        }
        for i in order
    ]


def power_ratio_db(r_t: float, r_i: float, g_t: float = 0.0, g_ti: float = 0.0, g_ri: float = 0.0,
                   rcs: float = 1.0) -> float:
    """Interference-to-target power ratio at the receiver input, in dB.

    10*log10(4*pi * R_T^4 * G_tI * G_rI * sigma / (G_T^2 * R_I^2)); gains are
    given in dB, propagation losses are ignored.
    """
    if not (r_t > 0 and r_i > 0):
        raise ValueError(f"ranges must be positive (r_t={r_t}, r_i={r_i})")
    if not rcs > 0:
        raise ValueError(f"rcs must be positive, got {rcs}")
    return float(
        10 * np.log10(4 * np.pi * r_t ** 4 * rcs / r_i ** 2) + g_ti + g_ri - 2 * g_t
    )


def write_rd_csv(rd: RangeDopplerMap, path: str | Path) -> None:
    """Rows ``k,p,db`` with dB relative to the map maximum."""
    db = rd.power_db()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "p", "db"])
        for k in range(db.shape[0]):
            for p in range(db.shape[1]):
                w.writerow([k, p, repr(float(db[k, p]))])


def write_rd_binary(rd: RangeDopplerMap, path: str | Path) -> Path:
    """Little-endian float64 re/im interleaved, row-major; returns the sidecar path."""
    path = Path(path)
    inter = np.empty(rd.values.shape + (2,), dtype="<f8")
    inter[..., 0] = rd.values.real
    inter[..., 1] = rd.values.imag
    path.write_bytes(inter.tobytes(order="C"))
    sidecar = path.with_name(path.name + ".json")
    meta = {
        "dims": list(rd.shape),
        "dtype": "float64",
        "endianness": "little",
        "layout": "row-major (k, p), interleaved re/im",
        "range_m": [float(v) for v in rd.range_m],
        "velocity_mps": [float(v) for v in rd.velocity_mps],
        "doppler_normalized": [float(v) for v in rd.doppler_hat],
    }
    sidecar.write_text(json.dumps(meta, indent=2))
    return sidecar


def read_rd_binary(path: str | Path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    raw = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(*meta["dims"], 2)
    return raw[..., 0] + 1j * raw[..., 1]


_SCENARIO_KEYS = {"params", "emitters", "coding", "noise_power", "seed", "include_noise",
                  "pad_m", "pad_n", "window", "peaks"}


def scenario_from_dict(raw: dict, x: Code | None = None, y: Code | None = None) -> tuple[SimScenario, dict]:
    """Build a scenario plus its processing options from a scenario document.

    Passing codes switches ``coding`` to ``pair`` unless the document says
    otherwise. Returns (scenario, {pad_m, pad_n, window, peaks}).
    """
    from .core import emitters_from_list, fmcw_params_from_dict

    if not isinstance(raw, dict):
        raise ConfigError("scenario: expected an object")
    unknown = set(raw) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"scenario: unknown fields {sorted(unknown)}")
    if "emitters" not in raw:
        raise ConfigError("scenario: missing field 'emitters'")
    params = fmcw_params_from_dict(raw.get("params", {}))
    coding = raw.get("coding", "pair" if x is not None else "none")
    sc = SimScenario(
        params,
        tuple(emitters_from_list(raw["emitters"])),
        coding,
        x,
        y,
        noise_power=float(raw.get("noise_power", 1.0)),
        seed=int(raw.get("seed", 0)),
        include_noise=bool(raw.get("include_noise", True)),
    )
    opts = {
        "pad_m": raw.get("pad_m"),
        "pad_n": raw.get("pad_n"),
        "window": raw.get("window", "none"),
        "peaks": int(raw.get("peaks", 5)),
    }
    return sc, opts
