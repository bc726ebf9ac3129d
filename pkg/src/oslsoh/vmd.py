"""Variational mode decomposition.

Alternating (ADMM-style) minimisation of the augmented Lagrangian in the
Fourier domain: each mode is a Wiener-filtered residual centred on its own
frequency, each centre frequency is the power-weighted mean of its mode's
positive half-spectrum, and the multiplier takes a dual-ascent step on the
reconstruction error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .signal import SignalError, as_samples, mirror_extend


@dataclass(frozen=True)
class VMDParams:
    K: int = 3
    alpha: float = 2000.0
    tau: float = 0.0
    tolerance: float = 1e-7
    max_iterations: int = 500
    dc_mode: bool = False

    def __post_init__(self):
        if not 1 <= int(self.K) <= 32:
            raise ValueError(f"K must be in [1, 32], got {self.K}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be > 0, got {self.max_iterations}")


@dataclass
class IMFSet:
    """Modes (one row each, lowest frequency first) plus bookkeeping.

    ``residual`` is all zeros for VMD; EMD stores its trend there.
    """

    modes: np.ndarray
    center_frequencies: np.ndarray
    residual: np.ndarray
    iterations_used: int = 0
    final_update_norm: float = 0.0
    converged: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.modes.shape[0]

    def reconstruction(self) -> np.ndarray:
        return self.modes.sum(axis=0) + self.residual


def vmd_decompose(signal, params: VMDParams | None = None, engine: str = "jit", **overrides) -> IMFSet:
    """Decompose ``signal`` into ``params.K`` band-limited modes.

    Keyword overrides are applied on top of ``params`` (or the defaults), so
    ``vmd_decompose(x, K=2, alpha=2000, tau=0.1)`` works.

    ``engine="numpy"`` runs the reference loop instead of the compiled one;
    both perform the same arithmetic.

    Non-convergence is not an error: ``converged`` is False and
    ``final_update_norm`` stays above ``tolerance``.
    """
    if params is None:
        params = VMDParams(**overrides)
    elif overrides:
        params = VMDParams(**{**params.__dict__, **overrides})
    K = int(params.K)
    f = as_samples(signal)
    if len(f) < 2 * K:
        raise SignalError(f"signal length {len(f)} < 2*K = {2 * K}")

    fm = mirror_extend(f)
    T = len(fm)  # even: mirror extension doubles N
    half = T // 2
    # positive half-spectrum only; the negative half of every mode stays zero
    freqs = np.arange(half) / T
    f_hat = np.fft.fft(fm)[:half]

    omega = 0.5 * np.arange(1, K + 1) / (K + 1)
    if params.dc_mode:
        omega[0] = 0.0
    solve = _solve_numpy if engine == "numpy" else _solve_jit
    u_hat, omega, n, diff = solve(f_hat, freqs, omega, 2.0 * params.alpha, float(params.tau),
                                  float(params.tolerance), int(params.max_iterations), bool(params.dc_mode))

    modes = _to_time_domain(u_hat, T)[:, len(f) // 2 : len(f) // 2 + len(f)]
    order = np.argsort(omega, kind="stable")
    return IMFSet(
        modes=modes[order],
        center_frequencies=omega[order],
        residual=np.zeros(len(f)),
        iterations_used=n,
        final_update_norm=diff,
        converged=bool(diff < params.tolerance),
    )


def _solve_numpy(f_hat, freqs, omega, two_alpha, tau, tol, max_iter, dc_mode):
    K, half = len(omega), len(f_hat)
    omega = omega.copy()
    u_hat = np.zeros((K, half), dtype=np.complex128)
    lam = np.zeros(half, dtype=np.complex128)
    diff = np.inf
    n = 0
    while n < max_iter:
        prev = u_hat.copy()
        total = u_hat.sum(axis=0)
        for k in range(K):
            total -= u_hat[k]
            u_hat[k] = (f_hat - total + lam / 2) / (1.0 + two_alpha * (freqs - omega[k]) ** 2)
            if not (dc_mode and k == 0):
                power = u_hat[k].real ** 2 + u_hat[k].imag ** 2
                denom = power.sum()
                if denom > 0:
                    omega[k] = (freqs * power).sum() / denom
            total += u_hat[k]
        lam = lam + tau * (f_hat - total)
        n += 1
        diff = _relative_update(u_hat, prev)
        if diff < tol:
            break
    return u_hat, omega, n, diff


@numba.njit(cache=True)
def _solve_jit(f_hat, freqs, omega, two_alpha, tau, tol, max_iter, dc_mode):
    K, half = len(omega), len(f_hat)
    omega = omega.copy()
    u_hat = np.zeros((K, half), dtype=np.complex128)
    prev = np.zeros((K, half), dtype=np.complex128)
    lam = np.zeros(half, dtype=np.complex128)
    total = np.zeros(half, dtype=np.complex128)
    diff = np.inf
    n = 0
    while n < max_iter:
        prev[:, :] = u_hat
        total[:] = 0.0
        for k in range(K):
            total += u_hat[k]
        for k in range(K):
            w = omega[k]
            num = 0.0
            den = 0.0
            for j in range(half):
                total[j] -= u_hat[k, j]
                d = freqs[j] - w
                v = (f_hat[j] - total[j] + lam[j] / 2) / (1.0 + two_alpha * d * d)
                u_hat[k, j] = v
                total[j] += v
                p = v.real * v.real + v.imag * v.imag
                num += freqs[j] * p
                den += p
            if not (dc_mode and k == 0) and den > 0:
                omega[k] = num / den
        for j in range(half):
            lam[j] = lam[j] + tau * (f_hat[j] - total[j])
        n += 1
        diff = 0.0
        for k in range(K):
            step = 0.0
            old = 0.0
            for j in range(half):
                dv = u_hat[k, j] - prev[k, j]
                step += dv.real * dv.real + dv.imag * dv.imag
                old += prev[k, j].real * prev[k, j].real + prev[k, j].imag * prev[k, j].imag
            if old > 0:
                diff += step / old
            elif step > 0:
                diff = np.inf
                break
        if diff < tol:
            break
    return u_hat, omega, n, diff


def _to_time_domain(u_hat: np.ndarray, T: int) -> np.ndarray:
    # Hermitian completion of the positive half; the Nyquist bin is dropped
    full = np.zeros((u_hat.shape[0], T), dtype=complex)
    half = T // 2
    full[:, :half] = u_hat
    full[:, T - half + 1 :] = np.conj(u_hat[:, 1:][:, ::-1])
    return np.fft.ifft(full, axis=-1).real


def _relative_update(new: np.ndarray, old: np.ndarray) -> float:
    old_norm = np.sum(np.abs(old) ** 2, axis=1)
    step = np.sum(np.abs(new - old) ** 2, axis=1)
    if np.any(step[old_norm == 0] > 0):
        return np.inf
    live = old_norm > 0
    return float(np.sum(step[live] / old_norm[live]))


def reconstruction_error(original, imfs: IMFSet) -> float:
    """Relative L2 norm of ``original - sum(modes) - residual``."""
    f = as_samples(original)
    if imfs.modes.shape[1] != len(f) or len(imfs.residual) != len(f):
        raise SignalError(
            f"length mismatch: signal {len(f)} vs modes {imfs.modes.shape[1]}"
        )
    err = np.linalg.norm(f - imfs.reconstruction())
    scale = np.linalg.norm(f)
    return float(err / scale) if scale > 0 else float(err)
