import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmsounder.channel import (
    SPEED_OF_LIGHT, Ray, Reflector, Scenario, add_noise, apply_channel, build_rays, dwell_rng, fspl, noise_power_dbm,
)
from mmsounder.errors import DomainError, OutOfSpanError, ValidationError
from mmsounder.geo import Trajectory
from mmsounder.waveform import ComplexSequence

F = 28.3e9
TS = 1 / 65.536e6


def direct_convolution(s, taps):
    """r[k] = sum_i a_i s[(k - d_i) mod L] by explicit loops."""
    out = np.zeros(len(s), dtype=complex)
    for a, d in taps:
        for k in range(len(s)):
            out[k] += a * s[(k - d) % len(s)]
    return out


def scenario(rx=(0.0, 5.1816, 1.5), heading=180.0, **kw):
    return Scenario(Trajectory.static((0.0, 0.0, 1.5)), Trajectory.static(rx, heading=heading), duration=1.0, **kw)


def test_fspl_examples():
    assert fspl(F, 5.1816) == pytest.approx(75.67, abs=0.2)
    assert fspl(F, 1.0) == pytest.approx(61.48, abs=0.01)
    assert fspl(F, 20.0) - fspl(F, 10.0) == pytest.approx(20 * math.log10(2), abs=1e-12)


@pytest.mark.parametrize("f,d", [(F, 0.0), (F, -1.0), (0.0, 1.0), (-F, 1.0)])
def test_fspl_domain(f, d):
    with pytest.raises(DomainError):
        fspl(f, d)


@given(st.floats(1e8, 1e11), st.floats(0.1, 1e4), st.floats(1.001, 10))
def test_fspl_increasing(f, d, factor):
    assert fspl(f, d * factor) > fspl(f, d)
    assert fspl(f * factor, d) > fspl(f, d)


def test_chamber_ray():
    rays = build_rays(scenario(), 0.0)
    assert len(rays) == 1
    ray = rays[0]
    assert ray.is_los
    assert ray.delay == pytest.approx(17.28e-9, abs=0.01e-9)
    assert -ray.power_db == pytest.approx(75.67, abs=0.2)
    assert -ray.power_db == pytest.approx(fspl(F, 5.1816), abs=1e-9)
    assert ray.aoa == pytest.approx((0.0, 0.0), abs=1e-9)


def test_blocked_los_without_reflectors_is_empty():
    assert build_rays(scenario(los_blocked_intervals=((0.0, 1.0),)), 0.5) == []


def test_reflector_on_bisector():
    sc = scenario(rx=(0.0, 10.0, 1.5), heading=0.0, reflectors=(Reflector((5.0, 5.0, 1.5), 6.0),),
                  los_blocked_intervals=((0.0, 2.0),))
    (ray,) = build_rays(sc, 0.0)
    slant = math.hypot(5.0, 5.0)
    assert ray.delay == pytest.approx(2 * slant / SPEED_OF_LIGHT, rel=1e-12)
    assert ray.aoa == pytest.approx((135.0, 0.0), abs=1e-9)
    assert -ray.power_db == pytest.approx(fspl(F, 2 * slant) + 6.0, abs=1e-9)
    assert not ray.is_los


def test_moving_reflector_follows_trajectory():
    car = Trajectory.from_waypoints([(0.0, (5.0, 0.0, 1.5)), (1.0, (5.0, 10.0, 1.5))])
    refl = Reflector(tuple(car.positions[0]), 0.0, car)
    np.testing.assert_allclose(refl.position_at(0.5), [5.0, 5.0, 1.5])


def test_out_of_span_rejected():
    rx = Trajectory.from_waypoints([(0.0, (0, 10, 1.5)), (1.0, (0, 20, 1.5))])
    sc = Scenario(Trajectory.static((0, 0, 1.5)), rx)
    with pytest.raises(OutOfSpanError):
        build_rays(sc, 2.0)


@settings(max_examples=50)
@given(st.floats(1.0, 2000.0), st.floats(1e9, 1e11))
def test_los_gain_matches_fspl(d, f):
    sc = Scenario(Trajectory.static((0, 0, 0)), Trajectory.static((0, d, 0)), carrier_freq=f, duration=1.0)
    (ray,) = build_rays(sc, 0.0)
    assert -20 * math.log10(abs(ray.gain)) == pytest.approx(fspl(f, d), abs=1e-9)


def test_ray_validation():
    with pytest.raises(ValidationError):
        Ray(-1e-9, 0.1, (0, 0), (0, 0))
    with pytest.raises(ValidationError):
        Ray(0.0, 1.5, (0, 0), (0, 0))


def test_scenario_validation():
    with pytest.raises(ValidationError):
        scenario(tx_power_in=-11.0)
    with pytest.raises(ValidationError):
        scenario(averaging_m=0)
    with pytest.raises(ValidationError):
        Scenario(Trajectory.static((0, 0, 0)), Trajectory.static((0, 1, 0))).time_span


def _seq(n=32, seed=0):
    rng = np.random.default_rng(seed)
    return ComplexSequence(rng.standard_normal(n) + 1j * rng.standard_normal(n), TS)


def test_single_tap_is_cyclic_shift():
    s = _seq()
    out = apply_channel(s, [Ray(3 * TS, 1.0, (0, 0), (0, 0))], [0.0], [0.0])
    np.testing.assert_allclose(out.samples, np.roll(s.samples, 3), atol=1e-15)
    assert np.sum(np.abs(out.samples) ** 2) == pytest.approx(np.sum(np.abs(s.samples) ** 2), rel=1e-15)


def test_empty_channel_is_silent():
    assert not np.any(apply_channel(_seq(), [], [], []).samples)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_apply_channel_matches_direct_convolution(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 40))
    s = _seq(n, seed)
    k = int(rng.integers(0, 5))
    delays = rng.integers(0, 3 * n, k)
    gains = rng.uniform(0.01, 1.0, k) * np.exp(2j * np.pi * rng.uniform(size=k))
    gt, gr = rng.uniform(-10, 40, k), rng.uniform(-10, 40, k)
    rays = [Ray(d * TS, g, (0, 0), (0, 0)) for d, g in zip(delays, gains)]
    taps = [(g * 10 ** ((a + b) / 20), int(d)) for g, a, b, d in zip(gains, gt, gr, delays)]
    expected = direct_convolution(s.samples, taps)
    got = apply_channel(s, rays, gt, gr).samples
    assert np.max(np.abs(got - expected)) <= 1e-12 * max(1.0, np.max(np.abs(expected)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_apply_channel_is_linear(seed):
    rng = np.random.default_rng(seed)
    x, y = _seq(64, seed), _seq(64, seed + 1)
    a, b = complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2))
    rays = [Ray(d * TS, 0.5 * np.exp(1j * p), (0, 0), (0, 0)) for d, p in zip(rng.integers(0, 64, 3), rng.uniform(0, 6, 3))]
    g = [3.0, -2.0, 10.0]
    lhs = apply_channel(x.with_samples(a * x.samples + b * y.samples), rays, g, g).samples
    rhs = a * apply_channel(x, rays, g, g).samples + b * apply_channel(y, rays, g, g).samples
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


def test_noise_power_closed_form():
    assert noise_power_dbm(5.0, 65.536e6) == pytest.approx(-174 + 10 * math.log10(65.536e6) + 5)
    assert noise_power_dbm(5.0, 65.536e6) == pytest.approx(-90.8, abs=0.05)


def test_noise_variance_and_determinism():
    zero = ComplexSequence(np.zeros(10**6, complex), TS)
    a = add_noise(zero, 5.0, 65.536e6, dwell_rng(1, 2, 3)).samples
    b = add_noise(zero, 5.0, 65.536e6, dwell_rng(1, 2, 3)).samples
    np.testing.assert_array_equal(a, b)
    target = 10 ** (noise_power_dbm(5.0, 65.536e6) / 10)
    assert np.mean(np.abs(a) ** 2) == pytest.approx(target, rel=0.01)


def test_dwell_streams_are_independent():
    a = dwell_rng(1, 0, 0).standard_normal(8)
    b = dwell_rng(1, 0, 1).standard_normal(8)
    assert not np.allclose(a, b)
