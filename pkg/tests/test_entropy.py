import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oslsoh.entropy import EnvelopeEntropyConfig, distribution_entropy, envelope_entropy, mode_envelope

ANALYTIC = EnvelopeEntropyConfig(envelope_kind="analytic_magnitude")


@pytest.mark.parametrize("N", [3, 10, 168, 1000])
def test_constant_envelope_gives_log_n(N):
    # a constant mode has flat spline envelopes equal to itself
    assert envelope_entropy(np.full((1, N), 0.7)) == pytest.approx(np.log(N), abs=1e-6)


@pytest.mark.parametrize("K", [1, 2, 5])
def test_identical_modes_add(K):
    N = 200
    assert envelope_entropy(np.full((K, N), 1.3)) == pytest.approx(K * np.log(N), abs=1e-6)


def test_spike_is_near_zero():
    e = np.full(500, 1e-12)
    e[42] = 1.0
    assert distribution_entropy(e) < 1e-6


def test_am_tone_below_constant_tone():
    t = np.arange(1000)
    carrier = np.cos(2 * np.pi * 0.1 * t)
    am = (1 + 0.8 * np.cos(2 * np.pi * 0.005 * t)) * carrier
    assert envelope_entropy(am[None], ANALYTIC) < envelope_entropy(carrier[None], ANALYTIC)


def test_analytic_envelope_of_pure_tone_is_flat():
    t = np.arange(400)
    env = mode_envelope(np.cos(2 * np.pi * 40 * t / 400), ANALYTIC)
    np.testing.assert_allclose(env, 1.0, atol=1e-9)


@pytest.mark.parametrize("config", [EnvelopeEntropyConfig(), ANALYTIC])
@pytest.mark.parametrize("c", [1e-3, 7.0, 1e4])
def test_scale_invariant(config, c):
    rng = np.random.default_rng(1)
    modes = 5 + rng.normal(size=(3, 120))  # envelopes far above the floor
    assert envelope_entropy(c * modes, config) == pytest.approx(envelope_entropy(modes, config), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(3, 80)), elements=st.floats(-1e3, 1e3)))
def test_bounds(modes):
    K, N = modes.shape
    for config in (EnvelopeEntropyConfig(), ANALYTIC):
        h = envelope_entropy(modes, config)
        assert -1e-12 <= h <= K * np.log(N) + 1e-9


def test_min_reduction():
    modes = np.vstack([np.full(50, 1.0), np.r_[1.0, np.zeros(49)]])
    per_mode = [envelope_entropy(m[None]) for m in modes]
    assert envelope_entropy(modes, EnvelopeEntropyConfig(reduce="min")) == pytest.approx(min(per_mode))
    assert envelope_entropy(modes) == pytest.approx(sum(per_mode))


def test_accepts_imfset():
    from oslsoh.vmd import vmd_decompose

    imfs = vmd_decompose(np.sin(np.arange(64) * 0.3), K=2, alpha=100)
    assert envelope_entropy(imfs) == envelope_entropy(imfs.modes)


def test_config_validation():
    with pytest.raises(ValueError):
        EnvelopeEntropyConfig(epsilon_floor=0)
    with pytest.raises(ValueError):
        EnvelopeEntropyConfig(epsilon_floor=1e-3)
    with pytest.raises(ValueError):
        EnvelopeEntropyConfig(envelope_kind="rms")
