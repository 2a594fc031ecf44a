"""MIMO code-set design through the quadratic surrogate of the quartic objective.

The quartic self-interference terms |z^H A z|^2, with A = Diag(f_p) C_l, are
split into Hermitian parts A_r = (A + A^H)/2 and A_ij = j(A - A^H)/2, loaded
with zeta*I to make them positive definite, and replaced by penalties
||sqrt(A~) z - sqrt(zeta N) u||^2 with unit-norm auxiliary vectors u. Codes
are updated one at a time by PMLI on an augmented [z; 1] problem and the
auxiliary vectors in closed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .core import Code, CodeSet, DesignConfig, InvalidDimensionError, LoadingError, as_vector
from .pcaf import build_B_fast, dirichlet_gram, pcaf_grid, steering
from .siso import minimize_uqp

log = logging.getLogger(__name__)

ANALYTIC_ZETA = 1.01
DEFAULT_CACHE_BYTES = 1 << 30
MONOTONE_RTOL = 1e-8


def _as_rows(codes) -> np.ndarray:
    """Stack codes (CodeSet, list of Code, or 2-D array) into a (count, N) array."""
    if isinstance(codes, np.ndarray) and codes.ndim == 2:
        return codes.astype(complex)
    rows = [as_vector(c) for c in codes]
    if not rows:
        return np.zeros((0, 0), dtype=complex)
    return np.stack(rows)


def lag_bin_pairs(cfg: DesignConfig) -> tuple[np.ndarray, np.ndarray]:
    ll, pp = np.meshgrid(cfg.lags, cfg.bins, indexing="ij")
    return ll.ravel(), pp.ravel()


def shift_operators(n_len: int, lags: np.ndarray, bins: np.ndarray, n_f: int) -> np.ndarray:
    """Dense A_{l,p} = Diag(f_p) C_l for each (l, p) pair; shape (len, N, N)."""
    lags = np.asarray(lags)
    A = np.zeros((lags.size, n_len, n_len), dtype=complex)
    rows = np.arange(n_len)
    cols = (rows[None, :] + lags[:, None]) % n_len
    A[np.arange(lags.size)[:, None], rows[None, :], cols] = steering(n_len, np.asarray(bins), n_f)
    return A


def hermitian_split(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (A_r, A_ij) with A_r = (A + A^H)/2 and A_ij = j(A - A^H)/2."""
    AH = np.conj(np.swapaxes(A, -1, -2))
    return 0.5 * (A + AH), 0.5j * (A - AH)


def _psd_sqrt(T: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(T)
    if np.min(w) <= 0:
        raise LoadingError(f"loaded split matrix is not positive definite (min eigenvalue {np.min(w):.3e})")
    return (V * np.sqrt(w)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))


class SplitOperators:
    """Loaded Hermitian parts of every A_{l,p} and their square roots.

    Square roots are cached when they fit ``cache_bytes``; otherwise they
    are recomputed chunk by chunk whenever :meth:`sqrt_chunks` is iterated.
    """

    def __init__(self, cfg: DesignConfig, zeta: float, cache_bytes: int = DEFAULT_CACHE_BYTES,
                 chunk: int = 256):
        self.n_len, self.p_max, self.n_f = cfg.n_len, cfg.p_max, cfg.n_f
        self.zeta = float(zeta)
        self.lags_flat, self.bins_flat = lag_bin_pairs(cfg)
        self.size = self.lags_flat.size
        self.chunk = chunk
        n = self.n_len
        self.sum_tilde = self._sum_tilde()
        self._cache = None
        if 2 * self.size * n * n * 16 <= cache_bytes:
            parts = list(self._compute_chunks())
            self._cache = (
                np.concatenate([p[1] for p in parts]),
                np.concatenate([p[2] for p in parts]),
            )

    @property
    def cached(self) -> bool:
        return self._cache is not None

    def operator(self, l: int, p: int) -> np.ndarray:
        return shift_operators(self.n_len, np.array([l]), np.array([p]), self.n_f)[0]

    def split(self, l: int, p: int) -> tuple[np.ndarray, np.ndarray]:
        return hermitian_split(self.operator(l, p))

    def tilde(self, l: int, p: int) -> tuple[np.ndarray, np.ndarray]:
        Ar, Aij = self.split(l, p)
        eye = self.zeta * np.eye(self.n_len)
        return Ar + eye, Aij + eye

    def index(self, l: int, p: int) -> int:
        return (l + self.n_len - 1) * (2 * self.p_max + 1) + (p + self.p_max)

    def sqrt_pair(self, l: int, p: int) -> tuple[np.ndarray, np.ndarray]:
        if self._cache is not None:
            i = self.index(l, p)
            return self._cache[0][i], self._cache[1][i]
        Tr, Ti = self.tilde(l, p)
        return _psd_sqrt(Tr), _psd_sqrt(Ti)

    def _sum_tilde(self) -> np.ndarray:
        # sum_{l,p} A_{l,p} = Diag(sum_p f_p) (2 * ones - I), since C_{-l} = C_{N-l}.
        n = self.n_len
        g = steering(n, np.arange(-self.p_max, self.p_max + 1), self.n_f).sum(axis=0)
        S = g[:, None] * (2.0 * np.ones((n, n)) - np.eye(n))
        SH = S.conj().T
        return 0.5 * (S + SH) + 0.5j * (S - SH) + 2 * self.zeta * self.size * np.eye(n)

    def _compute_chunks(self) -> Iterator[tuple[slice, np.ndarray, np.ndarray]]:
        eye = self.zeta * np.eye(self.n_len)
        for start in range(0, self.size, self.chunk):
            sl = slice(start, min(start + self.chunk, self.size))
            A = shift_operators(self.n_len, self.lags_flat[sl], self.bins_flat[sl], self.n_f)
            Ar, Aij = hermitian_split(A)
            yield sl, _psd_sqrt(Ar + eye), _psd_sqrt(Aij + eye)

    def sqrt_chunks(self) -> Iterator[tuple[slice, np.ndarray, np.ndarray]]:
        """Yield (slice over flat (l,p) index, sqrt(A~_r), sqrt(A~_i)) batches."""
        if self._cache is not None:
            Sr, Si = self._cache
            for start in range(0, self.size, self.chunk):
                sl = slice(start, min(start + self.chunk, self.size))
                yield sl, Sr[sl], Si[sl]
        else:
            yield from self._compute_chunks()


def exact_zeta(cfg: DesignConfig, chunk: int = 256) -> float:
    """1.01 * max(0, -smallest eigenvalue of every A_r and A_ij), plus a margin."""
    lags, bins = lag_bin_pairs(cfg)
    lo = np.inf
    for start in range(0, lags.size, chunk):
        sl = slice(start, start + chunk)
        Ar, Aij = hermitian_split(shift_operators(cfg.n_len, lags[sl], bins[sl], cfg.n_f))
        lo = min(lo, float(np.linalg.eigvalsh(Ar)[..., 0].min()), float(np.linalg.eigvalsh(Aij)[..., 0].min()))
    return 1.01 * max(0.0, -lo) + 1e-6


def build_split_operators(cfg: DesignConfig, zeta_mode: str | None = None,
                          cache_bytes: int = DEFAULT_CACHE_BYTES) -> SplitOperators:
    """Split and load every A_{l,p}.

    ``analytic`` uses zeta = 1.01: each A_{l,p} is unitary, so the spectra of
    A_r and A_ij lie in [-1, 1]. ``exact`` computes the bound by eigensolver.
    """
    mode = zeta_mode or cfg.zeta_mode
    if mode == "analytic":
        zeta = ANALYTIC_ZETA
    elif mode == "exact":
        zeta = exact_zeta(cfg)
    else:
        raise ValueError(f"unknown zeta mode {mode!r}")
    return SplitOperators(cfg, zeta, cache_bytes)


@dataclass(frozen=True)
class AuxVectors:
    """Unit-norm auxiliary vectors, shape (count, (2N-1)(2P+1), N) per family."""

    u_r: np.ndarray
    u_i: np.ndarray
    v_r: np.ndarray
    v_i: np.ndarray

    def __post_init__(self) -> None:
        for name in ("u_r", "u_i", "v_r", "v_i"):
            a = getattr(self, name)
            if a.size and np.max(np.abs(np.linalg.norm(a, axis=-1) - 1.0)) > 1e-12:
                raise ValueError(f"aux vectors {name} are not unit norm")

    def replace(self, **kw) -> "AuxVectors":
        d = {k: getattr(self, k) for k in ("u_r", "u_i", "v_r", "v_i")}
        d.update(kw)
        return AuxVectors(**d)


def random_aux(m_count: int, k_count: int, ops: SplitOperators, rng: np.random.Generator) -> AuxVectors:
    """Normally distributed complex vectors, normalized."""
    def draw(count):
        shape = (count, ops.size, ops.n_len)
        a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        return a / np.linalg.norm(a, axis=-1, keepdims=True)
    return AuxVectors(draw(m_count), draw(m_count), draw(k_count), draw(k_count))


def _normalized_images(Z: np.ndarray, ops: SplitOperators) -> tuple[np.ndarray, np.ndarray]:
    n_codes = Z.shape[0]
    Ur = np.empty((n_codes, ops.size, ops.n_len), dtype=complex)
    Ui = np.empty_like(Ur)
    for sl, Sr, Si in ops.sqrt_chunks():
        Ur[:, sl] = np.einsum("lij,mj->mli", Sr, Z)
        Ui[:, sl] = np.einsum("lij,mj->mli", Si, Z)
    Ur /= np.linalg.norm(Ur, axis=-1, keepdims=True)
    Ui /= np.linalg.norm(Ui, axis=-1, keepdims=True)
    return Ur, Ui


def update_aux(X, Y, ops: SplitOperators) -> AuxVectors:
    """Closed-form optimal aux vectors: sqrt(A~) z / ||sqrt(A~) z||."""
    Xr, Yr = _as_rows(X), _as_rows(Y)
    ur, ui = _normalized_images(Xr, ops) if Xr.size else (np.zeros((0, ops.size, ops.n_len), complex),) * 2
    vr, vi = _normalized_images(Yr, ops) if Yr.size else (np.zeros((0, ops.size, ops.n_len), complex),) * 2
    return AuxVectors(ur, ui, vr, vi)


def _pair_energy(a: np.ndarray, b: np.ndarray, cfg: DesignConfig) -> float:
    g = pcaf_grid(a, b, cfg.p_max, cfg.n_f)
    return float(np.sum(np.abs(g.values) ** 2))


def quartic_components(X, Y, cfg: DesignConfig) -> dict[str, float]:
    """Q(X, Y) split into its X-self, Y-self and cross Frobenius terms."""
    Xr, Yr = _as_rows(X), _as_rows(Y)
    for Z in (Xr, Yr):
        if Z.size and Z.shape[1] != cfg.n_len:
            raise InvalidDimensionError(f"codes must have length {cfg.n_len}")
    xs = sum(_pair_energy(a, b, cfg) for a in Xr for b in Xr)
    ys = sum(_pair_energy(a, b, cfg) for a in Yr for b in Yr)
    cross = sum(_pair_energy(a, b, cfg) for a in Xr for b in Yr)
    return {"x_self": xs, "y_self": ys, "cross": cross, "total": xs + ys + cross}


def quartic_objective(X, Y, cfg: DesignConfig) -> float:
    """sum over (l, p) of ||X^H A X||_F^2 + ||Y^H A Y||_F^2 + ||X^H A Y||_F^2."""
    return quartic_components(X, Y, cfg)["total"]


def _penalty(Z: np.ndarray, W_r: np.ndarray, W_i: np.ndarray, ops: SplitOperators) -> float:
    if not Z.size:
        return 0.0
    c = np.sqrt(ops.zeta * ops.n_len)
    total = 0.0
    for sl, Sr, Si in ops.sqrt_chunks():
        total += np.sum(np.abs(np.einsum("lij,mj->mli", Sr, Z) - c * W_r[:, sl]) ** 2)
        total += np.sum(np.abs(np.einsum("lij,mj->mli", Si, Z) - c * W_i[:, sl]) ** 2)
    return float(total)


def surrogate_components(X, Y, aux: AuxVectors, ops: SplitOperators, cfg: DesignConfig) -> dict[str, float]:
    Xr, Yr = _as_rows(X), _as_rows(Y)
    x_cross = sum(_pair_energy(Xr[a], Xr[b], cfg) for a in range(len(Xr)) for b in range(len(Xr)) if a != b)
    y_cross = sum(_pair_energy(Yr[a], Yr[b], cfg) for a in range(len(Yr)) for b in range(len(Yr)) if a != b)
    xy = sum(_pair_energy(a, b, cfg) for a in Xr for b in Yr)
    pen_x = _penalty(Xr, aux.u_r, aux.u_i, ops)
    pen_y = _penalty(Yr, aux.v_r, aux.v_i, ops)
    return {
        "x_cross": x_cross, "y_cross": y_cross, "xy_cross": xy,
        "x_penalty": pen_x, "y_penalty": pen_y,
        "total": x_cross + y_cross + xy + pen_x + pen_y,
    }


def surrogate_objective(X, Y, aux: AuxVectors, ops: SplitOperators, cfg: DesignConfig) -> float:
    """The full quadratic reformulation: cross-interference terms plus penalties."""
    return surrogate_components(X, Y, aux, ops, cfg)["total"]


def separated_terms(which: str, index: int, X, Y, aux: AuxVectors, ops: SplitOperators,
                    cfg: DesignConfig, gram: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """R and s with surrogate = z^H R z + 2 Re(z^H s) + const in the chosen code.

    Same-radar cross terms are summed over ordered pairs, so every other code
    of the same set contributes with the chosen code on both sides of A.
    """
    Xr, Yr = _as_rows(X), _as_rows(Y)
    if gram is None:
        gram = dirichlet_gram(cfg.n_len, cfg.p_max, cfg.n_f)
    if which == "x":
        same, other, other_side, W_r, W_i = Xr, Yr, "for_y", aux.u_r, aux.u_i
    elif which == "y":
        same, other, other_side, W_r, W_i = Yr, Xr, "for_x", aux.v_r, aux.v_i
    else:
        raise ValueError(f"which must be 'x' or 'y', got {which!r}")
    R = ops.sum_tilde.copy()
    for j, z in enumerate(same):
        if j != index:
            R += build_B_fast(z, "for_y", cfg, gram).matrix + build_B_fast(z, "for_x", cfg, gram).matrix
    for z in other:
        R += build_B_fast(z, other_side, cfg, gram).matrix
    s = np.zeros(cfg.n_len, dtype=complex)
    for sl, Sr, Si in ops.sqrt_chunks():
        s += np.einsum("lij,lj->i", Sr, W_r[index, sl]) + np.einsum("lij,lj->i", Si, W_i[index, sl])
    s *= -np.sqrt(ops.zeta * ops.n_len)
    return 0.5 * (R + R.conj().T), s


def _separated_value(R: np.ndarray, s: np.ndarray, z: np.ndarray) -> float:
    return float(np.real(np.vdot(z, R @ z)) + 2 * np.real(np.vdot(z, s)))


def update_code(which: str, index: int, X, Y, aux: AuxVectors, ops: SplitOperators,
                cfg: DesignConfig, gram: np.ndarray | None = None) -> Code:
    """Re-optimize one code with every other variable fixed.

    Minimizes [z; 1]^H [[R, s], [s^H, 0]] [z; 1] by PMLI, updating only the
    first N entries. R's diagonal is shifted by its mean first; that only
    adds a constant on unimodular z and keeps the loading tight.
    """
    R, s = separated_terms(which, index, X, Y, aux, ops, cfg, gram)
    z_old = (_as_rows(X) if which == "x" else _as_rows(Y))[index]
    n = cfg.n_len
    c = float(np.real(np.trace(R))) / n
    B = np.zeros((n + 1, n + 1), dtype=complex)
    B[:n, :n] = R - c * np.eye(n)
    B[:n, n] = s
    B[n, :n] = s.conj()
    zbar, _ = minimize_uqp(B, np.append(z_old, 1.0), cfg, n_free=n)
    z_new = zbar[:n]
    before, after = _separated_value(R, s, z_old), _separated_value(R, s, z_new)
    if after > before + MONOTONE_RTOL * max(1.0, abs(before)):
        raise ArithmeticError(f"separated objective increased for {which}[{index}]: {before} -> {after}")
    return Code(z_new if after <= before else z_old)


@dataclass(frozen=True)
class MimoDesignResult:
    X: CodeSet
    Y: CodeSet
    surrogate_trace: tuple[float, ...]
    quartic_trace: tuple[float, ...]
    outer_iters: int
    converged: bool
    quartic_parts: dict
    aux: AuxVectors | None = None

    def to_dict(self) -> dict:
        return {
            "X_phases": [[float(v) for v in c.phases] for c in self.X],
            "Y_phases": [[float(v) for v in c.phases] for c in self.Y],
            "surrogate_trace": list(self.surrogate_trace),
            "quartic_trace": list(self.quartic_trace),
            "quartic_components": dict(self.quartic_parts),
            "outer_iters": self.outer_iters,
            "converged": self.converged,
        }


def design_mimo(cfg: DesignConfig, X0: CodeSet | Sequence[Code], Y0: CodeSet | Sequence[Code],
                ops: SplitOperators | None = None, aux0: AuxVectors | None = None,
                rng: np.random.Generator | None = None) -> MimoDesignResult:
    """Cyclic minimization of the surrogate: each x_m, each y_k, then all aux.

    Split operators depend only on ``cfg`` and are built once. Aux vectors
    start random (seeded from ``cfg.seed`` unless ``rng`` is given).
    """
    X = [Code(as_vector(c)) for c in X0]
    Y = [Code(as_vector(c)) for c in Y0]
    for c in X + Y:
        if c.n_len != cfg.n_len:
            raise InvalidDimensionError(f"codes must have length {cfg.n_len}")
    ops = ops or build_split_operators(cfg)
    rng = rng or np.random.default_rng(cfg.seed)
    aux = aux0 or random_aux(len(X), len(Y), ops, rng)
    gram = dirichlet_gram(cfg.n_len, cfg.p_max, cfg.n_f)

    J0 = surrogate_objective(X, Y, aux, ops, cfg)
    trace, qtrace = [J0], [quartic_objective(X, Y, cfg)]
    converged = False
    s = 0
    for s in range(1, cfg.outer_cap + 1):
        for m in range(len(X)):
            X[m] = update_code("x", m, X, Y, aux, ops, cfg, gram)
        for k in range(len(Y)):
            Y[k] = update_code("y", k, X, Y, aux, ops, cfg, gram)
        aux = update_aux(X, Y, ops)
        J = surrogate_objective(X, Y, aux, ops, cfg)
        if J > trace[-1] + MONOTONE_RTOL * max(1.0, trace[-1]):
            raise ArithmeticError(f"surrogate increased at outer iteration {s}: {trace[-1]} -> {J}")
        delta = abs(trace[-1] - J)
        trace.append(J)
        qtrace.append(quartic_objective(X, Y, cfg))
        log.debug("outer %d: surrogate=%.6e quartic=%.6e", s, J, qtrace[-1])
        if delta <= cfg.outer_tol * J0:
            converged = True
            break
    return MimoDesignResult(
        CodeSet(tuple(X), "X"), CodeSet(tuple(Y), "Y"), tuple(trace), tuple(qtrace), s, converged,
        quartic_components(X, Y, cfg), aux,
    )
