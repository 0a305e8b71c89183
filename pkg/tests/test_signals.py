import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specsense.rng import Rng
from specsense.signals import (ChannelSpec, Fading, SampleBuffer, SubbandPlan, apply_channel,
                               gen_awgn, gen_narrowband, gen_wideband)
from specsense.spectral import WindowSpec, welch

from conftest import FixedUniform


def test_sample_buffer_validation():
    with pytest.raises(ValueError):
        SampleBuffer([])
    with pytest.raises(ValueError):
        SampleBuffer([1, np.nan])
    with pytest.raises(ValueError):
        SampleBuffer([1], sample_rate_hz=0)
    b = SampleBuffer([1, 2])
    assert b.samples.dtype == np.complex128
    with pytest.raises(ValueError):
        b.samples[0] = 3


def test_awgn_zero_variance_is_zero(rng):
    assert np.array_equal(gen_awgn(4, 0.0, rng).samples, np.zeros(4))


def test_awgn_power_converges(rng):
    # mean power estimator of |CN(0, 2)|^2 has std 2 / sqrt(n)
    b = gen_awgn(10**6, 2.0, rng)
    assert abs(b.power - 2.0) <= 5 * 2.0 / 1000
    assert 1.99 <= b.power <= 2.01


def test_awgn_deterministic(rng):
    assert np.array_equal(gen_awgn(64, 1.0, rng).samples, gen_awgn(64, 1.0, rng).samples)


def test_awgn_is_circular(rng):
    x = gen_awgn(200_000, 1.0, rng).samples
    assert abs(np.mean(x.real**2) - 0.5) < 0.01
    assert abs(np.mean(x.real * x.imag)) < 0.01


def test_narrowband_dc_with_stub():
    b = gen_narrowband(0.0, 16, 1.0, 1.0, FixedUniform())
    assert np.array_equal(b.samples, np.ones(16, dtype=complex))


def test_narrowband_quarter_rate_period(rng):
    x = gen_narrowband(0.25, 8, 1.0, 1.0, rng).samples
    assert np.allclose(x[:4], x[4:], atol=1e-12)
    assert np.allclose(x[1] / x[0], 1j)


@given(st.integers(1, 500), st.floats(0.0, 100.0), st.floats(-0.49, 0.49))
@settings(max_examples=50, deadline=None)
def test_narrowband_power_exact(n, amp, fc):
    b = gen_narrowband(fc, n, amp, 1.0, Rng(n))
    assert math.isclose(b.power, amp**2, rel_tol=1e-12, abs_tol=1e-300)


def test_narrowband_nyquist_check(rng):
    with pytest.raises(ValueError):
        gen_narrowband(0.5, 8, 1.0, 1.0, rng)


def test_plan_validation():
    with pytest.raises(ValueError):
        SubbandPlan(((0, 0.4, 1.0), (0.5, 1.0, 1.0)), 1.0)
    with pytest.raises(ValueError):
        SubbandPlan(((0, 1.0, -1.0),), 1.0)
    with pytest.raises(ValueError):
        SubbandPlan.from_fractions([(0.5, 1.0), (0.4, 0.0)], 1.0)


def test_plan_helpers():
    plan = SubbandPlan.from_fractions([(0.25, 10.0), (0.25, 0.0), (0.5, 10.0)], 1000.0)
    assert plan.edges_hz() == [250.0, 500.0]
    assert plan.occupancy() == [(0.0, 250.0, True), (250.0, 500.0, False), (500.0, 1000.0, True)]
    assert plan.occupied_fraction() == 0.75
    assert list(plan.level_at([0, 249.9, 250, 999, 1000])) == [10, 10, 0, 10, 10]
    wrap = SubbandPlan.from_fractions([(0.5, 1.0), (0.5, 0.0)], 1.0)
    assert wrap.edges_hz() == [0.0, 0.5]


def test_wideband_empty_plan_is_zero(rng):
    plan = SubbandPlan.from_fractions([(0.5, 0.0), (0.5, 0.0)], 1.0)
    assert np.array_equal(gen_wideband(plan, 256, rng).samples, np.zeros(256))


def test_wideband_full_band_matches_awgn(rng):
    plan = SubbandPlan.from_fractions([(1.0, 3.0)], 1.0)
    x = gen_wideband(plan, 1024 * 101, rng)
    psd = welch(x, WindowSpec("hann", 1024), 0.5)
    assert psd.n_segments_averaged >= 200
    assert abs(psd.values.mean() - 3.0) <= 0.05 * 3.0


def test_wideband_hole(rng):
    plan = SubbandPlan.from_fractions([(0.3, 1.0), (0.4, 0.0), (0.3, 1.0)], 1.0)
    acc = np.zeros(256)
    for i in range(100):
        acc += welch(gen_wideband(plan, 4096, rng.child(i)), WindowSpec("hann", 256)).values
    f = np.arange(256) / 256
    hole = acc[(f > 0.32) & (f < 0.68)].mean()
    band = acc[(f < 0.28) | (f > 0.72)].mean()
    assert hole <= 0.01 * band


def test_wideband_length_check(rng):
    with pytest.raises(ValueError):
        gen_wideband(SubbandPlan.from_fractions([(1.0, 1.0)], 1.0), 32, rng)


def test_channel_spec_validation():
    with pytest.raises(ValueError):
        ChannelSpec(noise_variance=0.0)
    with pytest.raises(ValueError):
        ChannelSpec(taps=((1, 1.0),))
    with pytest.raises(ValueError):
        ChannelSpec(taps=((0, 0.5), (0, 0.5)))
    with pytest.raises(ValueError):
        ChannelSpec(taps=((0, 0.5), (2, 0.4)))
    with pytest.raises(ValueError):
        ChannelSpec(fading="ricean")
    assert ChannelSpec(fading="rayleigh_block").fading is Fading.RAYLEIGH_BLOCK


def test_identity_channel_noiseless_is_pure_gain(rng):
    x = gen_awgn(128, 3.0, rng.child("x"))
    y = apply_channel(x, ChannelSpec(noise_variance=2.0, snr_db=6.0), rng, add_noise=False)
    c = math.sqrt(10**0.6 * 2.0 / x.power)
    assert np.allclose(y.samples, c * x.samples, rtol=0, atol=1e-12)
    assert math.isclose(y.power, 10**0.6 * 2.0, rel_tol=1e-12)


def test_channel_awgn_power(rng):
    tone = gen_narrowband(0.1, 256, 1.0, 1.0, rng.child("tone"))
    ch = ChannelSpec(noise_variance=1.0, snr_db=0.0)
    p = np.mean([apply_channel(tone, ch, rng.child(i)).power for i in range(10_000)])
    assert abs(p - 2.0) <= 0.03 * 2.0


def test_rayleigh_power_matches_target(rng):
    tone = gen_narrowband(0.1, 256, 1.0, 1.0, rng.child("tone"))
    ch = ChannelSpec(noise_variance=1.0, snr_db=3.0, taps=((0, 0.5), (3, 0.5)), fading="rayleigh_block")
    powers = np.array([apply_channel(tone, ch, rng.child(i), add_noise=False).power for i in range(10_000)])
    assert powers.std() > 0.3 * powers.mean()
    assert abs(powers.mean() - 10**0.3) <= 0.03 * 10**0.3


def test_channel_minus_inf_snr_gives_noise_only(rng):
    tone = gen_narrowband(0.1, 64, 1.0, 1.0, rng)
    ch = ChannelSpec(noise_variance=1.0)
    y = apply_channel(tone, ChannelSpec(noise_variance=1.0, snr_db=-math.inf), rng.child("c"))
    z = apply_channel(tone.scaled(0.0), ch, rng.child("c"))
    assert np.array_equal(y.samples, z.samples)


def test_channel_zero_power_with_snr_rejected(rng):
    with pytest.raises(ValueError):
        apply_channel(SampleBuffer(np.zeros(8)), ChannelSpec(snr_db=0.0), rng)


def test_fading_shares_noise_stream(rng):
    zero = SampleBuffer(np.zeros(32))
    a = apply_channel(zero, ChannelSpec(), rng)
    b = apply_channel(zero, ChannelSpec(taps=((0, 0.5), (3, 0.5)), fading="rayleigh_block"), rng)
    assert np.array_equal(a.samples, b.samples)


def test_delay_line_truncates(rng):
    x = SampleBuffer(np.arange(1, 9, dtype=float))
    y = apply_channel(x, ChannelSpec(taps=((0, 0.5), (3, 0.5))), rng, add_noise=False)
    h = math.sqrt(0.5)
    expect = h * x.samples.copy()
    expect[3:] += h * x.samples[:5]
    assert np.allclose(y.samples, expect)
