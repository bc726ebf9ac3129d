"""Empirical mode decomposition by sifting (baseline decomposer)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import SignalError, as_samples, local_extrema, spline_envelopes
from .vmd import IMFSet


@dataclass(frozen=True)
class EMDParams:
    max_imfs: int = 3
    sift_sd_threshold: float = 0.2
    max_sifts_per_imf: int = 100

    def __post_init__(self):
        if self.max_imfs < 1 or self.sift_sd_threshold <= 0 or self.max_sifts_per_imf < 1:
            raise ValueError(f"EMD parameters must all be positive: {self}")


def _n_extrema(x: np.ndarray) -> int:
    maxima, minima = local_extrema(x)
    return len(maxima) + len(minima)


def _sift(x: np.ndarray, params: EMDParams) -> tuple[np.ndarray, int, float]:
    """Sift one mode out of ``x``.

    The SD ratio ``sum(h - h_next)**2 / sum(h**2)`` equals
    ``|mean envelope of h|**2 / |h|**2``, so it is computed before taking the
    step and ``h`` itself is accepted once it falls below the threshold.
    """
    h = x
    sd = np.inf
    for n in range(params.max_sifts_per_imf):
        upper, lower = spline_envelopes(h)
        mean = 0.5 * (upper + lower)
        energy = float(h @ h)
        sd = float(mean @ mean) / energy if energy > 0 else 0.0
        if sd < params.sift_sd_threshold:
            return h, n, sd
        h = h - mean
    return h, params.max_sifts_per_imf, sd


def emd_decompose(signal, params: EMDParams | None = None) -> IMFSet:
    """Extract IMFs highest-frequency first; the leftover is the residual.

    The returned modes are reversed so row 0 is the lowest-frequency IMF,
    matching the VMD ordering.  ``modes.sum(0) + residual`` reproduces the
    input exactly (up to float rounding).
    """
    params = params or EMDParams()
    x = as_samples(signal)
    if len(x) < 8:
        raise SignalError(f"EMD needs at least 8 samples, got {len(x)}")

    remainder = x.copy()
    modes, sifts, sds = [], [], []
    while len(modes) < params.max_imfs and _n_extrema(remainder) >= 2:
        imf, n_sift, sd = _sift(remainder, params)
        modes.append(imf)
        sifts.append(n_sift)
        sds.append(sd)
        remainder = remainder - imf

    # residual is defined by subtraction so additivity is exact
    residual = x - np.sum(modes, axis=0) if modes else x.copy()
    mode_arr = np.array(modes[::-1]) if modes else np.zeros((0, len(x)))
    return IMFSet(
        modes=mode_arr,
        center_frequencies=np.array([_zero_crossing_frequency(m) for m in mode_arr]),
        residual=residual,
        iterations_used=int(sum(sifts)),
        final_update_norm=max(sds) if sds else 0.0,
        extra={"sifts_per_imf": sifts[::-1], "sd_at_accept": sds[::-1]},
    )


def _zero_crossing_frequency(mode: np.ndarray) -> float:
    # rough mean frequency for reporting only: half the zero-crossing rate
    centred = mode - mode.mean()
    crossings = np.count_nonzero(np.signbit(centred[1:]) != np.signbit(centred[:-1]))
    return 0.5 * crossings / max(len(mode) - 1, 1)
