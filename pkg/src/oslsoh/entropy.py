"""Envelope entropy of a set of modes, used as the VMD search objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import analytic_signal, as_samples, spline_envelopes

ENVELOPE_KINDS = ("spline_mean_abs", "analytic_magnitude")


@dataclass(frozen=True)
class EnvelopeEntropyConfig:
    """``reduce='min'`` scores a set by its lowest-entropy mode instead of the sum."""

    epsilon_floor: float = 1e-12
    envelope_kind: str = "spline_mean_abs"
    reduce: str = "sum"

    def __post_init__(self):
        if not 0 < self.epsilon_floor <= 1e-6:
            raise ValueError(f"epsilon_floor must be in (0, 1e-6], got {self.epsilon_floor}")
        if self.envelope_kind not in ENVELOPE_KINDS:
            raise ValueError(f"envelope_kind must be one of {ENVELOPE_KINDS}")
        if self.reduce not in ("sum", "min"):
            raise ValueError("reduce must be 'sum' or 'min'")


def mode_envelope(mode, config: EnvelopeEntropyConfig) -> np.ndarray:
    u = as_samples(mode, min_length=3)
    if config.envelope_kind == "analytic_magnitude":
        envelope = np.abs(analytic_signal(u))
    else:
        upper, lower = spline_envelopes(u)
        envelope = np.abs(0.5 * (upper + lower))
    return envelope + config.epsilon_floor


def distribution_entropy(envelope) -> float:
    """Shannon entropy (nats) of a non-negative envelope normalised to sum 1."""
    e = np.asarray(envelope, dtype=np.float64)
    p = e / e.sum()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def envelope_entropy(imfs, config: EnvelopeEntropyConfig | None = None) -> float:
    """Total envelope entropy over the modes of ``imfs``.

    ``imfs`` is an :class:`~oslsoh.vmd.IMFSet` or any 2-D array of modes.
    """
    config = config or EnvelopeEntropyConfig()
    modes = getattr(imfs, "modes", imfs)
    modes = np.atleast_2d(np.asarray(modes, dtype=np.float64))
    per_mode = [distribution_entropy(mode_envelope(u, config)) for u in modes]
    return float(min(per_mode)) if config.reduce == "min" else float(sum(per_mode))
