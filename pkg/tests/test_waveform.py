import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmsounder.errors import ValidationError
from mmsounder.waveform import (
    ComplexSequence, ZcConfig, circular_xcorr, circular_xcorr_direct, cyclic_shift, generate_zc, periodic_signal,
)


def coprime_pairs(max_n=512):
    return st.integers(2, max_n).flatmap(
        lambda n: st.integers(1, n - 1).filter(lambda u: math.gcd(u, n) == 1).map(lambda u: (n, u))
    )


def test_default_sequence_has_unit_modulus():
    x = generate_zc(ZcConfig()).samples
    assert x.size == 8192
    assert np.max(np.abs(np.abs(x) - 1)) < 1e-12


def test_length_three_by_hand():
    x = generate_zc(ZcConfig(3, 1)).samples
    assert x[0] == 1
    np.testing.assert_allclose(x, [1, np.exp(-2j * np.pi / 3), 1], atol=1e-12)


@pytest.mark.parametrize("n,u", [(8191, 1729), (63, 25), (139, 3)])
def test_odd_length_matches_textbook_formula(n, u):
    # evaluated at 30 significant digits so the oracle itself does not lose phase
    mpmath.mp.dps = 30
    expected = np.array([complex(mpmath.expj(-mpmath.pi * u * k * (k + 1) / n)) for k in range(n)])
    assert np.max(np.abs(generate_zc(ZcConfig(n, u)).samples - expected)) < 1e-12


@pytest.mark.parametrize("n,u", [(0, 1), (8, 2), (8, 8), (16, 0)])
def test_invalid_parameters_rejected(n, u):
    with pytest.raises(ValidationError):
        ZcConfig(n, u)


def test_sample_rate_limit():
    with pytest.raises(ValidationError):
        ZcConfig(sample_rate=200e6)


def test_period_duration_is_125_us():
    assert ZcConfig().period_duration == pytest.approx(125e-6, abs=1e-15)


def test_periodic_signal():
    zc = generate_zc(ZcConfig())
    one = periodic_signal(zc, 1)
    np.testing.assert_array_equal(one.samples, zc.samples)
    two = periodic_signal(zc, 2).samples
    assert two.size == 16384
    np.testing.assert_array_equal(two[:8192], two[8192:])
    with pytest.raises(ValidationError):
        periodic_signal(zc, 0)


def test_default_autocorrelation_is_ideal():
    x = generate_zc(ZcConfig()).samples
    c = np.abs(circular_xcorr(x, x)[0])
    assert c[0] == pytest.approx(8192, rel=1e-12)
    assert c[1:].max() < 1e-6 * 8192


def test_zero_input_gives_zero_correlation():
    x = generate_zc(ZcConfig()).samples
    assert not np.any(circular_xcorr(np.zeros_like(x), x))


def test_shift_by_five_peaks_at_lag_five():
    x = generate_zc(ZcConfig(64, 5)).samples
    c = np.abs(circular_xcorr_direct(cyclic_shift(x, 5), x)[0])
    assert int(np.argmax(c)) == 5
    assert c[5] == pytest.approx(64)
    fast = np.abs(circular_xcorr(cyclic_shift(generate_zc(ZcConfig()).samples, 5), generate_zc(ZcConfig()).samples)[0])
    assert int(np.argmax(fast)) == 5 and fast[5] == pytest.approx(8192)


def test_mismatched_lengths_rejected():
    with pytest.raises(ValidationError):
        circular_xcorr(np.ones(10, complex), np.ones(4, complex))


def test_sequence_requires_positive_period():
    with pytest.raises(ValidationError):
        ComplexSequence(np.ones(3, complex), 0.0)


@settings(max_examples=60, deadline=None)
@given(coprime_pairs())
def test_ideal_autocorrelation_property(pair):
    n, u = pair
    x = generate_zc(ZcConfig(n, u)).samples
    assert np.max(np.abs(np.abs(x) - 1)) < 1e-12
    c = np.abs(circular_xcorr(x, x)[0])
    assert abs(c[0] - n) < 1e-9 * n
    assert c[1:].max() < 1e-6 * n


@settings(max_examples=60, deadline=None)
@given(coprime_pairs(128), st.data())
def test_shift_covariance(pair, data):
    n, u = pair
    k = data.draw(st.integers(0, n - 1))
    x = generate_zc(ZcConfig(n, u)).samples
    c = np.abs(circular_xcorr(cyclic_shift(x, k), x)[0])
    assert int(np.argmax(c)) == k


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([16, 64, 256]), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_fast_correlation_matches_direct_sum(n, periods, seed):
    rng = np.random.default_rng(seed)
    rx = rng.standard_normal(n * periods) + 1j * rng.standard_normal(n * periods)
    ref = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    fast, direct = circular_xcorr(rx, ref), circular_xcorr_direct(rx, ref)
    assert fast.shape == (periods, n)
    assert np.max(np.abs(fast - direct)) <= 1e-9 * np.max(np.abs(direct))
