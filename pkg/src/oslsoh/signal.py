"""Sampled-signal primitives shared by the decomposers and the fitness function.

Everything here is a pure function of its inputs.  Signals are plain 1-D
float arrays; :class:`Signal` only exists to carry the sampling metadata
through the CLI and the CSV exporters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline


class SignalError(ValueError):
    """Raised when a signal violates a precondition (length, finiteness)."""


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray
    sample_index_unit: str = "cycle"
    sample_rate: float = 1.0

    def __post_init__(self):
        arr = as_samples(self.samples)
        if self.sample_rate <= 0:
            raise SignalError(f"sample_rate must be > 0, got {self.sample_rate}")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class Spectrum:
    bins: np.ndarray
    frequency_resolution: float = 1.0

    def __len__(self) -> int:
        return len(self.bins)


def as_samples(x, min_length: int = 1) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array of at least ``min_length``."""
    if isinstance(x, Signal):
        x = x.samples
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise SignalError(f"expected a 1-D signal, got shape {arr.shape}")
    if len(arr) < min_length:
        raise SignalError(f"signal length {len(arr)} < required {min_length}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise SignalError(f"non-finite sample at index {bad}: {arr[bad]}")
    return arr


def fft(signal) -> Spectrum:
    """Forward DFT of a real signal (any length)."""
    if isinstance(signal, Signal):
        x, rate = signal.samples, signal.sample_rate
    else:
        x, rate = as_samples(signal), 1.0
    x = as_samples(x)
    return Spectrum(np.fft.fft(x), frequency_resolution=rate / len(x))


def ifft(spectrum) -> np.ndarray:
    """Inverse DFT; returns the real part (inputs here are Hermitian)."""
    bins = spectrum.bins if isinstance(spectrum, Spectrum) else np.asarray(spectrum)
    if bins.ndim != 1 or len(bins) < 1:
        raise SignalError("spectrum must be a non-empty 1-D array")
    if not np.all(np.isfinite(bins)):
        raise SignalError("spectrum contains non-finite bins")
    return np.fft.ifft(bins).real


def mirror_extend(signal) -> np.ndarray:
    """Reflect the first floor(N/2) and last ceil(N/2) samples about the ends.

    >>> mirror_extend([1, 2, 3, 4]).tolist()
    [2.0, 1.0, 1.0, 2.0, 3.0, 4.0, 4.0, 3.0]
    """
    x = as_samples(signal, min_length=2)
    n = len(x)
    head = n // 2
    tail = n - head
    return np.concatenate([x[:head][::-1], x, x[n - tail:][::-1]])


def local_extrema(signal) -> tuple[np.ndarray, np.ndarray]:
    """Interior maxima and minima indices.

    ``i`` is a maximum iff ``x[i-1] < x[i] >= x[i+1]``, so a flat top is
    reported at its leftmost index.  Minima use the mirrored rule and the
    endpoints are never extrema.
    """
    x = as_samples(signal, min_length=3)
    return _peaks(x), _peaks(-x)


def _peaks(x: np.ndarray) -> np.ndarray:
    mid = x[1:-1]
    return np.flatnonzero((x[:-2] < mid) & (mid >= x[2:])) + 1


def spline_envelopes(signal) -> tuple[np.ndarray, np.ndarray]:
    """Upper/lower natural cubic-spline envelopes through the local extrema.

    The first and last samples are added as knots on both sides.  A side
    with no interior extrema falls back to a constant at the signal's max
    (upper) or min (lower).  Crossings between the envelopes are allowed.
    """
    x = as_samples(signal, min_length=3)
    maxima, minima = local_extrema(x)
    t = np.arange(len(x), dtype=np.float64)
    return _envelope(x, t, maxima, x.max()), _envelope(x, t, minima, x.min())


def _envelope(x, t, idx, fallback):
    if len(idx) == 0:
        return np.full_like(x, fallback)
    knots = np.concatenate([[0], idx, [len(x) - 1]])
    return CubicSpline(knots.astype(np.float64), x[knots], bc_type="natural")(t)


def analytic_signal(signal) -> np.ndarray:
    """x + i*Hilbert(x), built in the frequency domain."""
    x = as_samples(signal)
    n = len(x)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    return np.fft.ifft(np.fft.fft(x) * h)
