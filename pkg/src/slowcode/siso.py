"""SISO slow-time code design: Doppler-shifting pair and cyclic PMLI optimization."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .core import Code, DesignConfig, FmcwParams, InvalidDimensionError, LoadingError, as_vector
from .pcaf import QuadFormMatrix, build_B_fast, dirichlet_gram, objective_siso

log = logging.getLogger(__name__)

MONOTONE_RTOL = 1e-9


def doppler_shift_pair(n_len: int) -> tuple[Code, Code]:
    """All-ones x and alternating y = [1, -1, 1, ...]."""
    if n_len < 2:
        raise InvalidDimensionError(f"n_len must be >= 2, got {n_len}")
    x = Code(np.ones(n_len, dtype=complex))
    y = Code((-1.0) ** np.arange(n_len) + 0j)
    return x, y


def doppler_shift_cut(n_len: int, n_f: int, bins: np.ndarray | None = None) -> np.ndarray:
    """|sin(N*pi*(f + 1/2)) / sin(pi*(f + 1/2))| at f = p / N_f.

    ``bins`` defaults to p = 0..N_f-1. At the mainlobe the limit N is used.
    """
    p = np.arange(n_f) if bins is None else np.asarray(bins)
    u = p / n_f + 0.5
    den = np.sin(np.pi * u)
    num = np.sin(n_len * np.pi * u)
    near = np.abs(den) < 1e-12
    safe = np.where(near, 1.0, den)
    return np.where(near, float(n_len), np.abs(num / safe))


def first_sidelobe_level(n_len: int) -> float:
    """Peak of the first Dirichlet sidelobe, 1 / sin(3*pi / (2N))."""
    return 1.0 / np.sin(3 * np.pi / (2 * n_len))


def prf_condition_ok(params: FmcwParams, f_d_max: float) -> bool:
    """True when 4 * f_d_max < PRF, i.e. the shifted interference clears the target band."""
    if f_d_max < 0:
        raise ValueError("f_d_max must be non-negative")
    return 4.0 * f_d_max < params.prf


def gamma_bound(B: QuadFormMatrix | np.ndarray, mode: str = "frobenius") -> float:
    """A number strictly above the largest eigenvalue of Hermitian B.

    ``frobenius`` takes the smaller of 1.001*||B||_F and
    c + 1.001*||B - c I||_F with c = trace(B)/n; both bound lambda_max for any
    Hermitian matrix, and the shifted one is much tighter when B carries a
    large constant diagonal. ``eigen`` uses the dense eigensolver.
    """
    m = B.matrix if isinstance(B, QuadFormMatrix) else np.asarray(B)
    n = m.shape[0]
    if mode == "eigen":
        lam = float(np.linalg.eigvalsh(m)[-1])
        return lam + 1e-6 * max(1.0, abs(lam))
    if mode != "frobenius":
        raise ValueError(f"unknown gamma mode {mode!r}")
    c = float(np.real(np.trace(m))) / n
    shifted = m - c * np.eye(n)
    bound = min(1.001 * np.linalg.norm(m), c + 1.001 * np.linalg.norm(shifted))
    return bound + 1e-9 * max(1.0, abs(bound))


def pmli_steps(D: np.ndarray, z0, n_free: int | None = None) -> Iterator[np.ndarray]:
    """Yield successive power-method-like iterates z <- exp(j arg(D z)).

    Only the first ``n_free`` entries are updated; the rest stay fixed (used
    by the augmented [x; 1] problems). A zero component keeps its phase.
    """
    z = as_vector(z0).copy()
    k = z.size if n_free is None else n_free
    while True:
        w = D @ z
        head = w[:k]
        nz = np.abs(head) > 0
        new = z.copy()
        new[:k][nz] = head[nz] / np.abs(head[nz])
        z = new
        yield z


def _pmli(D: np.ndarray, z0: np.ndarray, inner_tol: float, inner_cap: int,
          n_free: int | None = None) -> tuple[np.ndarray, int]:
    z = np.asarray(z0, dtype=complex)
    q = float(np.real(np.vdot(z, D @ z)))
    if not q > 0:
        raise LoadingError(f"loaded matrix is not positive definite (Rayleigh quotient {q:.3e})")
    k = z.size if n_free is None else n_free
    it = 0
    for it, z_new in enumerate(pmli_steps(D, z, n_free), start=1):
        q_new = float(np.real(np.vdot(z_new, D @ z_new)))
        if q_new < q - MONOTONE_RTOL * max(1.0, abs(q)):
            raise LoadingError(f"PMLI quadratic form decreased ({q:.12e} -> {q_new:.12e})")
        change = np.max(np.abs(np.angle(z_new[:k] * np.conj(z[:k]))))
        z, q = z_new, q_new
        if change < inner_tol or it >= inner_cap:
            break
    return z, it


def pmli_solve(D, z0, inner_tol: float = 1e-6, inner_cap: int = 1000) -> Code:
    """Maximize z^H D z over unimodular z by PMLI, starting from z0.

    D must be Hermitian positive definite (callers load it with gamma).
    """
    m = D.matrix if isinstance(D, QuadFormMatrix) else np.asarray(D)
    z, _ = _pmli(m, as_vector(z0), inner_tol, inner_cap)
    return Code(z)


def minimize_uqp(B: np.ndarray, z0: np.ndarray, cfg: DesignConfig,
                 n_free: int | None = None) -> tuple[np.ndarray, int]:
    """Minimize z^H B z over unimodular z via diagonal loading and PMLI."""
    gamma = gamma_bound(B, cfg.gamma_mode)
    D = gamma * np.eye(B.shape[0]) - B
    return _pmli(D, z0, cfg.inner_tol, cfg.inner_cap, n_free)


@dataclass(frozen=True)
class SisoDesignResult:
    x: Code
    y: Code
    objective_trace: tuple[float, ...]
    outer_iters: int
    converged: bool
    inner_iters: tuple[int, ...] = field(default=(), repr=False)

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]

    def to_dict(self) -> dict:
        return {
            "x_phases": [float(v) for v in self.x.phases],
            "y_phases": [float(v) for v in self.y.phases],
            "objective_trace": list(self.objective_trace),
            "outer_iters": self.outer_iters,
            "converged": self.converged,
        }


def design_siso(cfg: DesignConfig, x0: Code, y0: Code, single_sided: bool = False) -> SisoDesignResult:
    """Cyclic minimization of the summed |PCAF|^2 over the design grid.

    Each outer pass minimizes x^H B_y x over x (PMLI on gamma_y I - B_y), then
    y^H B_x y over y. With ``single_sided`` y is held at y0. Stops when the
    objective moves by at most ``outer_tol * J0`` or after ``outer_cap`` passes.
    """
    x, y = as_vector(x0), as_vector(y0)
    if x.size != cfg.n_len or y.size != cfg.n_len:
        raise InvalidDimensionError(f"codes must have length {cfg.n_len}")
    gram = dirichlet_gram(cfg.n_len, cfg.p_max, cfg.n_f)
    J0 = objective_siso(x, y, cfg)
    trace = [J0]
    inner = []
    converged = False
    s = 0
    for s in range(1, cfg.outer_cap + 1):
        By = build_B_fast(y, "for_y", cfg, gram).matrix
        x_new, k = minimize_uqp(By, x, cfg)
        inner.append(k)
        # Keep the old iterate if roundoff made the new one worse.
        if np.real(np.vdot(x_new, By @ x_new)) <= np.real(np.vdot(x, By @ x)):
            x = x_new
        if single_sided:
            J = float(np.real(np.vdot(x, By @ x)))
        else:
            Bx = build_B_fast(x, "for_x", cfg, gram).matrix
            y_new, k = minimize_uqp(Bx, y, cfg)
            inner.append(k)
            if np.real(np.vdot(y_new, Bx @ y_new)) <= np.real(np.vdot(y, Bx @ y)):
                y = y_new
            J = float(np.real(np.vdot(y, Bx @ y)))
        if J > trace[-1] + MONOTONE_RTOL * max(1.0, trace[-1]):
            raise ArithmeticError(f"objective increased at outer iteration {s}: {trace[-1]} -> {J}")
        delta = abs(trace[-1] - J)
        trace.append(J)
        if s % 50 == 0:
            log.debug("outer %d: J=%.6e", s, J)
        if delta <= cfg.outer_tol * J0:
            converged = True
            break
    return SisoDesignResult(Code(x), Code(y), tuple(trace), s, converged, tuple(inner))
