import numpy as np
import pytest

from oslsoh.fixtures import fixture_path
from oslsoh.pipeline import load_battery_csv
from oslsoh.signal import SignalError
from oslsoh.vmd import IMFSet, VMDParams, reconstruction_error, vmd_decompose

n = np.arange(1000)
TWO_TONE = np.cos(2 * np.pi * 0.004 * n) + 0.5 * np.cos(2 * np.pi * 0.048 * n)


@pytest.fixture(scope="module")
def two_tone():
    return vmd_decompose(TWO_TONE, VMDParams(K=2, alpha=2000, tau=0.1))


def test_single_tone_recovered():
    f = np.cos(2 * np.pi * 0.01 * n)
    imfs = vmd_decompose(f, VMDParams(K=1, alpha=2000, tau=0.1))
    assert imfs.center_frequencies[0] == pytest.approx(0.01, rel=0.02)
    assert np.linalg.norm(imfs.modes[0] - f) / np.linalg.norm(f) <= 1e-2


def test_two_tones_separated(two_tone):
    np.testing.assert_allclose(two_tone.center_frequencies, [0.004, 0.048], rtol=0.05)
    assert reconstruction_error(TWO_TONE, two_tone) <= 1e-2
    # each mode should be the matching constituent tone
    np.testing.assert_allclose(two_tone.modes[0], np.cos(2 * np.pi * 0.004 * n), atol=0.05)
    np.testing.assert_allclose(two_tone.modes[1], 0.5 * np.cos(2 * np.pi * 0.048 * n), atol=0.05)


def test_mode_energy_concentrated_near_center(two_tone):
    freqs = np.fft.rfftfreq(len(n))
    for mode, w in zip(two_tone.modes, two_tone.center_frequencies):
        power = np.abs(np.fft.rfft(mode)) ** 2
        near = np.abs(freqs - w) <= 0.01
        assert power[near].sum() / power.sum() >= 0.95


def test_converged_means_small_update(two_tone):
    assert two_tone.converged
    assert two_tone.final_update_norm <= 1e-7
    assert two_tone.iterations_used < 500


def test_iteration_cap_flags_nonconvergence():
    imfs = vmd_decompose(TWO_TONE, VMDParams(K=2, alpha=2000, tau=0.1, max_iterations=3))
    assert imfs.iterations_used == 3
    assert not imfs.converged
    assert imfs.final_update_norm > 1e-7


def test_constant_signal_dc_mode():
    imfs = vmd_decompose(np.full(64, 1.7), VMDParams(K=1, alpha=100, dc_mode=True))
    assert imfs.center_frequencies[0] == 0.0
    np.testing.assert_allclose(imfs.modes[0], 1.7, atol=1e-9)


@pytest.mark.parametrize("c", [0.01, 2.0, 350.0])
def test_linear_in_amplitude(two_tone, c):
    scaled = vmd_decompose(c * TWO_TONE, VMDParams(K=2, alpha=2000, tau=0.1))
    np.testing.assert_allclose(scaled.modes, c * two_tone.modes, rtol=0, atol=1e-6 * c * np.abs(two_tone.modes).max())
    np.testing.assert_allclose(scaled.center_frequencies, two_tone.center_frequencies, rtol=1e-6)


@pytest.mark.parametrize("K", [1, 3, 6, 10])
def test_frequencies_in_band_and_sorted(K):
    rng = np.random.default_rng(K)
    x = rng.normal(size=300)
    imfs = vmd_decompose(x, VMDParams(K=K, alpha=500))
    w = imfs.center_frequencies
    assert np.all((w >= 0) & (w <= 0.5))
    assert np.all(np.diff(w) >= 0)
    assert imfs.modes.shape == (K, 300)
    assert np.all(imfs.residual == 0)


def test_compiled_and_reference_engines_agree():
    rng = np.random.default_rng(3)
    x = np.cumsum(rng.normal(size=150))
    a = vmd_decompose(x, VMDParams(K=4, alpha=150, tau=0.05))
    b = vmd_decompose(x, VMDParams(K=4, alpha=150, tau=0.05), engine="numpy")
    assert a.iterations_used == b.iterations_used
    np.testing.assert_allclose(a.modes, b.modes, atol=1e-10)
    np.testing.assert_allclose(a.center_frequencies, b.center_frequencies, atol=1e-12)


def test_keyword_overrides():
    a = vmd_decompose(TWO_TONE[:200], K=2, alpha=300)
    b = vmd_decompose(TWO_TONE[:200], VMDParams(K=2, alpha=300))
    np.testing.assert_array_equal(a.modes, b.modes)


def test_rejects_bad_input():
    with pytest.raises(SignalError):
        vmd_decompose([1.0, np.inf, 2.0, 3.0], K=1)
    with pytest.raises(SignalError):
        vmd_decompose(np.ones(5), K=3)
    with pytest.raises(ValueError):
        VMDParams(K=0)
    with pytest.raises(ValueError):
        VMDParams(K=33)
    with pytest.raises(ValueError):
        VMDParams(alpha=0)


def test_battery_modes_are_trend_then_faster():
    cap = load_battery_csv(fixture_path("B0005")).capacities
    imfs = vmd_decompose(cap, VMDParams(K=3, alpha=30))
    norms = np.linalg.norm(imfs.modes, axis=1)
    freqs = np.fft.rfftfreq(len(cap))

    def centroid(m):
        p = np.abs(np.fft.rfft(m - m.mean())) ** 2
        return (freqs @ p) / p.sum()

    cents = [centroid(m) for m in imfs.modes]
    # IMF1 carries the degradation trend and most of the magnitude
    assert norms[0] > norms[1] > norms[2]
    assert norms[0] ** 2 > 0.9 * np.sum(norms ** 2)
    assert cents[0] < cents[1] < cents[2]
    assert reconstruction_error(cap, imfs) < 1e-2


class TestReconstructionError:
    def test_exact_sum(self):
        x = np.arange(10.0)
        imfs = IMFSet(np.vstack([x * 0.25, x * 0.75]), np.zeros(2), np.zeros(10))
        assert reconstruction_error(x, imfs) == 0.0

    def test_original_plus_zeros(self):
        x = np.sin(np.arange(12.0))
        imfs = IMFSet(np.vstack([x, np.zeros(12), np.zeros(12)]), np.zeros(3), np.zeros(12))
        assert reconstruction_error(x, imfs) == 0.0

    def test_counts_residual(self):
        x = np.ones(6)
        imfs = IMFSet(np.full((1, 6), 0.5), np.zeros(1), np.full(6, 0.5))
        assert reconstruction_error(x, imfs) == 0.0

    def test_length_mismatch(self):
        imfs = IMFSet(np.zeros((1, 5)), np.zeros(1), np.zeros(5))
        with pytest.raises(SignalError):
            reconstruction_error(np.ones(6), imfs)
