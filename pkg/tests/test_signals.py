import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from quadfdtd.signals import (
    RickerSpec,
    Signal,
    SweepSpec,
    convolve,
    generate_ess,
    generate_ricker,
    inverse_filter,
    raised_cosine_fade,
    resample,
    write_mono_wav,
)

FS = 42857.0


def test_signal_rejects_nan_and_bad_rate():
    with pytest.raises(ValueError):
        Signal(np.array([0.0, np.nan]), 1.0)
    with pytest.raises(ValueError):
        Signal(np.zeros(3), 0.0)
    with pytest.raises(ValueError):
        Signal(np.zeros((2, 2)), 1.0)


def test_alpha_full_band_sweep():
    assert SweepSpec(20, 3000, 2.5).alpha == pytest.approx(math.log(150) / 2.5)
    assert SweepSpec(20, 3000, 2.5).alpha == pytest.approx(2.0043, abs=1e-4)


def test_sweep_rejects_f0_equal_f1():
    with pytest.raises(ValueError):
        SweepSpec(100, 100, 1.0)


def test_ess_starts_at_zero_and_has_expected_length():
    for spec in (SweepSpec(20, 3000, 0.3), SweepSpec(50, 500, 0.11, fade=0.0)):
        s = generate_ess(spec, FS)
        assert s.samples[0] == 0.0
        assert len(s) == round(spec.duration * FS)
        assert np.all(np.isfinite(s.samples))


def test_ess_nyquist_guard():
    with pytest.raises(ValueError, match="Nyquist"):
        generate_ess(SweepSpec(20, 3000, 1.0), 6000.0)


def test_ess_instantaneous_frequency_endpoints():
    spec = SweepSpec(20, 3000, 2.5)
    h = 1e-7
    for t, f in ((0.0, 20.0), (spec.duration, 3000.0)):
        fd = (spec.phase(t + h) - spec.phase(t - h)) / (2 * h) / (2 * np.pi)
        assert fd == pytest.approx(f, rel=1e-3)


def test_ess_frequency_monotone():
    spec = SweepSpec(20, 3000, 2.5)
    t = np.linspace(0, spec.duration, 1000)
    assert np.all(np.diff(spec.instantaneous_frequency(t)) > 0)
    assert np.all(np.diff(spec.phase(t), 2) > 0)


def test_fade_window():
    w = raised_cosine_fade(100, 10)
    assert w[0] == 0.0 and w[-1] == 0.0 and np.all(w[10:90] == 1.0)
    np.testing.assert_allclose(w[:10], w[::-1][:10])


def test_ricker_peak_and_zero_crossings():
    fc, delay = 500.0, 0.004
    spec = RickerSpec(fc, delay)
    fs = 1e6
    r = generate_ricker(spec, fs, 0.008)
    k = int(round(delay * fs))
    assert r.samples[k] == pytest.approx(1.0)
    tz = 1 / (np.pi * fc * np.sqrt(2))
    for sgn in (-1, 1):
        kz = int(round((delay + sgn * tz) * fs))
        assert abs(r.samples[kz]) < 1e-3
        assert np.sign(r.samples[kz - 5]) != np.sign(r.samples[kz + 5])


def test_ricker_spectral_peak():
    fc, fs = 500.0, 20000.0
    r = generate_ricker(RickerSpec(fc, 0.05), fs, 0.1)
    spec = np.abs(np.fft.rfft(r.samples))
    f = np.fft.rfftfreq(len(r), 1 / fs)
    assert abs(f[np.argmax(spec)] - fc) <= f[1]


def test_ricker_spec_validation():
    with pytest.raises(ValueError):
        RickerSpec(0.0, 0.0)
    with pytest.raises(ValueError):
        RickerSpec(100.0, -1.0)


def test_inverse_filter_endpoints():
    spec = SweepSpec(20, 3000, 0.5, fade=0.0)
    s = generate_ess(spec, FS)
    inv = inverse_filter(s, spec)
    n = len(s)
    scale = inv.samples[0] / s.samples[-1]
    # amplitude correction is largest on the (high-frequency) first sample
    assert inv.samples[-1] == pytest.approx(
        s.samples[0] * scale * math.exp(-spec.alpha * (n - 1) / FS), abs=1e-15)
    t = np.arange(n) / FS
    np.testing.assert_allclose(inv.samples, scale * s.samples[::-1] * np.exp(-spec.alpha * t),
                               rtol=1e-12, atol=1e-15)


def test_inverse_filter_length_check():
    spec = SweepSpec(20, 3000, 0.5)
    s = generate_ess(spec, FS)
    with pytest.raises(ValueError, match="samples"):
        inverse_filter(Signal(s.samples[:-3], FS), spec)


def _energy_within(x, fs, half_width):
    k = np.argmax(np.abs(x))
    w = int(round(half_width * fs))
    e = x ** 2
    return e[max(0, k - w):k + w + 1].sum() / e.sum()


def test_sweep_times_inverse_is_delta_like():
    spec = SweepSpec(20, 3000, 2.5)
    s = generate_ess(spec, FS)
    d = convolve(s, inverse_filter(s, spec)).samples
    assert np.max(np.abs(d)) == pytest.approx(1.0)
    assert np.argmax(np.abs(d)) == len(s) - 1
    assert _energy_within(d, FS, 2e-3) >= 0.9


def test_literal_reversed_envelope_is_not_delta_like():
    # the opposite envelope orientation doubles the spectral tilt instead of
    # cancelling it; kept as a guard on the sign convention
    spec = SweepSpec(20, 3000, 2.5)
    s = generate_ess(spec, FS)
    t = np.arange(len(s)) / FS
    wrong = s.samples[::-1] * np.exp(-spec.alpha * (spec.duration - t))
    d = np.convolve(s.samples, wrong)
    assert _energy_within(d, FS, 2e-3) < 0.5


def test_convolve_identity_and_hand_case():
    x = Signal(np.array([1.0, -2.0, 3.5]), 10.0)
    np.testing.assert_array_equal(convolve(x, Signal(np.array([1.0]), 10.0)).samples, x.samples)
    np.testing.assert_allclose(
        convolve(Signal(np.ones(2), 1.0), Signal(np.ones(2), 1.0)).samples, [1, 2, 1])


def test_convolve_shift():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(50)
    k = 7
    d = np.zeros(10)
    d[k] = 1.0
    y = convolve(Signal(x, 1.0), Signal(d, 1.0)).samples
    np.testing.assert_allclose(y[k:k + 50], x, atol=1e-12)
    assert np.all(np.abs(y[:k]) < 1e-12)


def test_convolve_rate_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        convolve(Signal(np.ones(2), 1.0), Signal(np.ones(2), 2.0))


def test_convolve_large_matches_direct_sum():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal(3000), rng.standard_normal(2000)
    y = convolve(Signal(a, 1.0), Signal(b, 1.0)).samples
    ref = np.convolve(a, b)
    assert np.max(np.abs(y - ref)) <= 1e-9 * np.max(np.abs(ref))


short = arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e3, 1e3))


@settings(max_examples=100, deadline=None)
@given(short, short)
def test_convolve_commutative(a, b):
    ab = convolve(Signal(a, 1.0), Signal(b, 1.0)).samples
    ba = convolve(Signal(b, 1.0), Signal(a, 1.0)).samples
    scale = max(1.0, np.max(np.abs(np.convolve(np.abs(a), np.abs(b)))))
    assert len(ab) == len(a) + len(b) - 1
    np.testing.assert_allclose(ab, ba, rtol=0, atol=1e-9 * scale)


@settings(max_examples=100, deadline=None)
@given(short, st.floats(-10, 10), st.floats(-10, 10), st.data())
def test_convolve_linear(a, alpha, beta, data):
    n = len(a)
    b = data.draw(arrays(np.float64, n, elements=st.floats(-1e3, 1e3)))
    h = data.draw(short)
    conv = lambda x: convolve(Signal(x, 1.0), Signal(h, 1.0)).samples
    lhs = conv(alpha * a + beta * b)
    rhs = alpha * conv(a) + beta * conv(b)
    scale = max(1.0, np.max(np.abs(np.convolve(np.abs(a) * 10 + np.abs(b) * 10, np.abs(h)))))
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-9 * scale)


def test_resample_sine_amplitude():
    t = np.arange(int(FS * 0.5)) / FS
    x = Signal(np.sin(2 * np.pi * 1000 * t), FS)
    y = resample(x, 44100.0)
    assert abs(len(y) / 44100.0 - x.duration) <= 1 / 44100.0
    core = y.samples[2000:-2000]
    tt = np.arange(len(y))[2000:-2000] / 44100.0
    # least-squares amplitude of the 1 kHz component
    basis = np.stack([np.sin(2 * np.pi * 1000 * tt), np.cos(2 * np.pi * 1000 * tt)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, core, rcond=None)
    assert abs(np.hypot(*coef) - 1.0) < 0.005


def test_resample_identity_is_exact():
    x = Signal(np.random.default_rng(3).standard_normal(100), 8000.0)
    y = resample(x, 8000.0)
    np.testing.assert_array_equal(y.samples, x.samples)


def test_resample_round_trip():
    fs = 44100.0
    t = np.arange(int(fs * 0.2)) / fs
    rng = np.random.default_rng(4)
    x = sum(rng.uniform(0.2, 1) * np.sin(2 * np.pi * f * t + rng.uniform(0, 6))
            for f in (110, 440, 1500, 3000))
    x *= np.hanning(len(x))
    sig = Signal(x, fs)
    back = resample(resample(sig, 16000.0), fs)
    assert len(back) == len(sig)
    err = np.linalg.norm(back.samples - x) / np.linalg.norm(x)
    assert err < 0.01


def test_write_mono_wav(tmp_path):
    from scipy.io import wavfile

    x = Signal(np.linspace(-0.5, 0.5, 64), 8000.0)
    write_mono_wav(x, tmp_path / "x.wav")
    fs, data = wavfile.read(tmp_path / "x.wav")
    assert fs == 8000 and data.dtype == np.float32
    np.testing.assert_allclose(data, x.samples, atol=1e-7)
