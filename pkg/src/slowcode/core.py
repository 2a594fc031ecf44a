"""Shared domain types, RNG helpers and codebook/config serialization."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Literal, Sequence

import numpy as np

UNIMODULAR_TOL = 1e-12
SPEED_OF_LIGHT = 3e8


class SlowcodeError(Exception):
    """Base class for all library errors."""


class InvalidDimensionError(SlowcodeError, ValueError):
    pass


class ValidationError(SlowcodeError, ValueError):
    pass


class CodebookParseError(SlowcodeError, ValueError):
    pass


class ConfigError(SlowcodeError, ValueError):
    pass


class LoadingError(SlowcodeError, ArithmeticError):
    """Diagonal loading failed to make a matrix positive definite."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Code:
    """A unimodular slow-time code of length N.

    Construct from complex entries (validated to lie on the unit circle)
    or with :meth:`from_phases`, which keeps the phases bit-exactly so that
    codebook round-trips are lossless.
    """

    entries: np.ndarray
    _phases: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        e = np.array(self.entries, dtype=complex).reshape(-1)
        if e.size < 2:
            raise InvalidDimensionError(f"code length must be >= 2, got {e.size}")
        if not np.all(np.isfinite(e)):
            raise ValidationError("code entries must be finite")
        dev = np.max(np.abs(np.abs(e) - 1.0))
        if dev > UNIMODULAR_TOL:
            raise ValidationError(f"code is not unimodular (max ||e|-1| = {dev:.3e})")
        object.__setattr__(self, "entries", _frozen(e))
        if self._phases is not None:
            object.__setattr__(self, "_phases", _frozen(np.array(self._phases, dtype=float)))

    @classmethod
    def from_phases(cls, phases: Sequence[float] | np.ndarray) -> "Code":
        ph = np.asarray(phases, dtype=float).reshape(-1)
        if not np.all(np.isfinite(ph)):
            raise ValidationError("phases must be finite")
        return cls(np.exp(1j * ph), ph.copy())

    @property
    def n_len(self) -> int:
        return int(self.entries.size)

    @property
    def phases(self) -> np.ndarray:
        if self._phases is not None:
            return self._phases
        return np.angle(self.entries)

    def __len__(self) -> int:
        return self.n_len

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def as_vector(z: "Code | np.ndarray | Sequence[complex]") -> np.ndarray:
    """Return the complex entries of a Code or array-like as a 1-D array."""
    if isinstance(z, Code):
        return z.entries
    return np.asarray(z, dtype=complex).reshape(-1)


@dataclass(frozen=True)
class CodeSet:
    """The M (or K) codes of one MIMO radar."""

    codes: tuple[Code, ...]
    label: str = ""

    def __post_init__(self) -> None:
        codes = tuple(self.codes)
        if len(codes) < 1:
            raise ValidationError("a code set needs at least one code")
        if not all(isinstance(c, Code) for c in codes):
            raise ValidationError("code set members must be Code instances")
        lengths = {c.n_len for c in codes}
        if len(lengths) != 1:
            raise ValidationError(f"codes in set {self.label!r} have mismatched lengths {sorted(lengths)}")
        object.__setattr__(self, "codes", codes)

    @property
    def count(self) -> int:
        return len(self.codes)

    @property
    def n_len(self) -> int:
        return self.codes[0].n_len

    def matrix(self) -> np.ndarray:
        """N x count matrix whose columns are the codes."""
        return np.stack([c.entries for c in self.codes], axis=1)

    def __iter__(self):
        return iter(self.codes)

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, i: int) -> Code:
        return self.codes[i]


@dataclass(frozen=True)
class DesignConfig:
    n_len: int
    p_max: int
    n_f: int
    outer_tol: float = 1e-6
    outer_cap: int = 1000
    inner_tol: float = 1e-6
    inner_cap: int = 1000
    seed: int = 0
    zeta_mode: Literal["analytic", "exact"] = "analytic"
    gamma_mode: Literal["frobenius", "eigen"] = "frobenius"

    def __post_init__(self) -> None:
        if self.n_len < 2:
            raise InvalidDimensionError(f"n_len must be >= 2, got {self.n_len}")
        if not self.n_len < self.n_f:
            raise ConfigError(f"need n_len < n_f, got n_len={self.n_len}, n_f={self.n_f}")
        if not 0 < self.p_max < self.n_f:
            raise ConfigError(f"need 0 < p_max < n_f, got p_max={self.p_max}, n_f={self.n_f}")
        if not self.outer_tol > 0 or not self.inner_tol > 0:
            raise ConfigError("tolerances must be positive")
        if self.outer_cap < 1 or self.inner_cap < 1:
            raise ConfigError("iteration caps must be >= 1")
        if self.zeta_mode not in ("analytic", "exact"):
            raise ConfigError(f"unknown zeta_mode {self.zeta_mode!r}")
        if self.gamma_mode not in ("frobenius", "eigen"):
            raise ConfigError(f"unknown gamma_mode {self.gamma_mode!r}")

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-(self.n_len - 1), self.n_len)

    @property
    def bins(self) -> np.ndarray:
        return np.arange(-self.p_max, self.p_max + 1)


@dataclass(frozen=True)
class FmcwParams:
    f_c: float = 24e9
    bandwidth: float = 150e6
    t_c: float = 50e-6
    f_s: float = 4e6
    m_fast: int = 100
    n_slow: int = 256

    def __post_init__(self) -> None:
        if not self.bandwidth / self.t_c > 0 or self.t_c <= 0:
            raise ConfigError("chirp slope B/t_c must be positive")
        if self.f_s <= 0 or self.f_c <= 0:
            raise ConfigError("f_s and f_c must be positive")
        if self.m_fast < 1:
            raise ConfigError("m_fast must be >= 1")
        if self.n_slow < 2:
            raise ConfigError("n_slow must be >= 2")

    @property
    def slope(self) -> float:
        return self.bandwidth / self.t_c

    @property
    def prf(self) -> float:
        return 1.0 / self.t_c

    @property
    def t_s(self) -> float:
        return 1.0 / self.f_s

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c


@dataclass(frozen=True)
class Emitter:
    """A target (two-way propagation) or an interfering radar (one-way)."""

    range_m: float
    speed_mps: float = 0.0
    snr_db: float = 0.0
    kind: Literal["target", "interferer"] = "target"
    delay_lag: int = 0

    def __post_init__(self) -> None:
        if not self.range_m > 0:
            raise ConfigError(f"emitter range must be positive, got {self.range_m}")
        if self.kind not in ("target", "interferer"):
            raise ConfigError(f"unknown emitter kind {self.kind!r}")


def rng_from_seed(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_unimodular_code(n_len: int, seed: int | np.random.Generator | None = None) -> Code:
    """Code with i.i.d. phases uniform on [0, 2*pi)."""
    if n_len < 2:
        raise InvalidDimensionError(f"n_len must be >= 2, got {n_len}")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from_seed(seed)
    return Code.from_phases(rng.uniform(0.0, 2 * np.pi, size=n_len))


def random_code_set(count: int, n_len: int, rng: np.random.Generator, label: str = "") -> CodeSet:
    return CodeSet(tuple(random_unimodular_code(n_len, rng) for _ in range(count)), label)


# --- codebook files -------------------------------------------------------


def codebook_to_dict(sets: Sequence[CodeSet]) -> dict[str, Any]:
    if not sets:
        raise ValidationError("codebook needs at least one code set")
    n_len = sets[0].n_len
    for s in sets:
        if s.n_len != n_len:
            raise ValidationError("all code sets in a codebook must share n_len")
    return {
        "n_len": n_len,
        "sets": [
            {"label": s.label, "phases": [[float(v) for v in c.phases] for c in s.codes]}
            for s in sets
        ],
    }


def serialize_codebook(sets: Sequence[CodeSet], path: str | Path, meta: dict | None = None) -> None:
    """Write the codebook JSON; ``meta`` goes under the optional ``design`` key."""
    doc = codebook_to_dict(sets)
    if meta:
        doc["design"] = dict(meta)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _parse_code(raw: Any, where: str, form: str) -> Code:
    if not isinstance(raw, list):
        raise CodebookParseError(f"{where}: expected a list, got {type(raw).__name__}")
    if form == "phases":
        for i, v in enumerate(raw):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise CodebookParseError(f"{where}[{i}]: expected a number, got {v!r}")
        return Code.from_phases(np.array(raw, dtype=float))
    vals = []
    for i, v in enumerate(raw):
        if not (isinstance(v, list) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v)):
            raise CodebookParseError(f"{where}[{i}]: expected [re, im], got {v!r}")
        vals.append(complex(v[0], v[1]))
    return Code(np.array(vals))


def codebook_from_dict(data: Any) -> list[CodeSet]:
    """Parse a codebook document.

    Each set carries ``phases`` (one list of radians per code). As an input
    convenience a set may instead carry ``entries`` with ``[re, im]`` pairs;
    those are checked for unimodularity.
    """
    if not isinstance(data, dict):
        raise CodebookParseError("codebook root must be a JSON object")
    for key in ("n_len", "sets"):
        if key not in data:
            raise CodebookParseError(f"codebook is missing field {key!r}")
    n_len = data["n_len"]
    if isinstance(n_len, bool) or not isinstance(n_len, int):
        raise CodebookParseError(f"field 'n_len' must be an integer, got {n_len!r}")
    if not isinstance(data["sets"], list):
        raise CodebookParseError("field 'sets' must be a list")
    out = []
    for si, raw in enumerate(data["sets"]):
        where = f"sets[{si}]"
        if not isinstance(raw, dict):
            raise CodebookParseError(f"{where}: expected an object")
        label = raw.get("label", "")
        if not isinstance(label, str):
            raise CodebookParseError(f"{where}.label: expected a string")
        form = "phases" if "phases" in raw else "entries" if "entries" in raw else None
        if form is None:
            raise CodebookParseError(f"{where}: missing field 'phases'")
        codes_raw = raw[form]
        if not isinstance(codes_raw, list):
            raise CodebookParseError(f"{where}.{form}: expected a list of codes")
        try:
            codes = tuple(_parse_code(c, f"{where}.{form}[{ci}]", form) for ci, c in enumerate(codes_raw))
        except ValidationError as exc:
            raise ValidationError(f"{where} ({label!r}): {exc}") from exc
        cs = CodeSet(codes, label)
        if cs.n_len != n_len:
            raise ValidationError(f"{where} ({label!r}): code length {cs.n_len} != n_len {n_len}")
        out.append(cs)
    return out


def deserialize_codebook(path: str | Path) -> list[CodeSet]:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodebookParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return codebook_from_dict(data)


# --- config files ---------------------------------------------------------


def _build(cls, raw: Any, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in fields(cls) if not f.name.startswith("_")}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown fields {sorted(unknown)}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def design_config_from_dict(raw: Any) -> DesignConfig:
    return _build(DesignConfig, raw, "design")


def fmcw_params_from_dict(raw: Any) -> FmcwParams:
    return _build(FmcwParams, raw, "fmcw")


def emitters_from_list(raw: Any) -> list[Emitter]:
    if not isinstance(raw, list):
        raise ConfigError("emitters: expected a list")
    return [_build(Emitter, e, f"emitters[{i}]") for i, e in enumerate(raw)]


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, (DesignConfig, FmcwParams, Emitter)):
        return asdict(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def load_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def ensure_same_length(codes: Iterable[Code]) -> int:
    lengths = {c.n_len for c in codes}
    if len(lengths) != 1:
        raise InvalidDimensionError(f"codes have mismatched lengths {sorted(lengths)}")
    return lengths.pop()
