"""Sampled 1D signals: exponential sweep, Ricker wavelet, inverse filter,
convolution and band-limited resampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal as sps


@dataclass(frozen=True, eq=False)
class Signal:
    samples: np.ndarray
    fs: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError("signal samples must be one-dimensional")
        if not self.fs > 0:
            raise ValueError(f"sample rate must be positive, got {self.fs}")
        if not np.all(np.isfinite(s)):
            raise ValueError("signal contains NaN or Inf")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.fs

    def scaled(self, k: float) -> "Signal":
        return Signal(self.samples * k, self.fs)


@dataclass(frozen=True)
class SweepSpec:
    """Exponential sine sweep from ``f0`` to ``f1`` Hz over ``duration`` s.

    ``fade`` is the length (s) of the raised-cosine taper applied at both ends.
    """

    f0: float
    f1: float
    duration: float
    fade: float = 0.01

    def __post_init__(self):
        if not (0 < self.f0 < self.f1):
            raise ValueError(f"sweep needs 0 < f0 < f1, got f0={self.f0}, f1={self.f1}")
        if not self.duration > 0:
            raise ValueError("sweep duration must be positive")
        if self.fade < 0 or 2 * self.fade > self.duration:
            raise ValueError("fade must be non-negative and at most half the sweep")

    @property
    def alpha(self) -> float:
        return math.log(self.f1 / self.f0) / self.duration

    def n_samples(self, fs: float) -> int:
        return int(round(self.duration * fs))

    def phase(self, t):
        return 2 * np.pi * self.f0 / self.alpha * np.expm1(self.alpha * np.asarray(t))

    def instantaneous_frequency(self, t):
        return self.f0 * np.exp(self.alpha * np.asarray(t))


@dataclass(frozen=True)
class RickerSpec:
    f_center: float
    delay: float

    def __post_init__(self):
        if not self.f_center > 0:
            raise ValueError("Ricker center frequency must be positive")
        if self.delay < 0:
            raise ValueError("Ricker delay must be non-negative")


def raised_cosine_fade(n: int, n_fade: int) -> np.ndarray:
    win = np.ones(n)
    if n_fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n_fade) / n_fade)
        win[:n_fade] = ramp
        win[n - n_fade:] = ramp[::-1]
    return win


def generate_ess(spec: SweepSpec, fs: float) -> Signal:
    """Farina sweep sin(2*pi*f0/alpha*(exp(alpha*t) - 1)) on [0, T)."""
    if fs <= 2 * spec.f1:
        raise ValueError(f"Nyquist violation: fs={fs} Hz must exceed 2*f1={2 * spec.f1} Hz")
    n = spec.n_samples(fs)
    t = np.arange(n) / fs
    s = np.sin(spec.phase(t))
    s *= raised_cosine_fade(n, int(round(spec.fade * fs)))
    return Signal(s, fs)


def ricker(t, f_center: float, delay: float = 0.0):
    a = (np.pi * f_center * (np.asarray(t) - delay)) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def ricker_integral(t, f_center: float, delay: float = 0.0):
    """Antiderivative of :func:`ricker` that vanishes at -inf."""
    tau = np.asarray(t) - delay
    return tau * np.exp(-((np.pi * f_center * tau) ** 2))


def generate_ricker(spec: RickerSpec, fs: float, duration: float) -> Signal:
    n = int(round(duration * fs))
    return Signal(ricker(np.arange(n) / fs, spec.f_center, spec.delay), fs)


def inverse_filter(sweep: Signal, spec: SweepSpec) -> Signal:
    """Time-reversed sweep with exponential amplitude correction.

    The correction rises with the instantaneous frequency of the reversed
    sweep (+6 dB/octave), which flattens the sweep's pink spectrum.  The
    result is scaled so that ``convolve(sweep, inverse)`` peaks at exactly 1.
    """
    n = spec.n_samples(sweep.fs)
    if len(sweep) != n:
        raise ValueError(
            f"sweep has {len(sweep)} samples but spec implies {n} at fs={sweep.fs}"
        )
    t = np.arange(n) / sweep.fs
    inv = sweep.samples[::-1] * np.exp(-spec.alpha * t)
    peak = np.max(np.abs(sps.fftconvolve(sweep.samples, inv)))
    return Signal(inv / peak, sweep.fs)


def convolve(a: Signal, b: Signal) -> Signal:
    """Full linear convolution (length len(a) + len(b) - 1)."""
    if a.fs != b.fs:
        raise ValueError(f"sample-rate mismatch: {a.fs} vs {b.fs}")
    return Signal(sps.convolve(a.samples, b.samples, mode="full", method="auto"), a.fs)


def _rate_ratio(fs_in: float, fs_out: float, max_den: int = 2000) -> Fraction:
    return Fraction(fs_out / fs_in).limit_denominator(max_den)


def resample(x: Signal, fs_out: float) -> Signal:
    """Polyphase band-limited resampling to ``fs_out``.

    The rate ratio is approximated by a rational with denominator <= 2000;
    the caller is responsible for the signal being band-limited below both
    Nyquist rates.
    """
    if fs_out == x.fs:
        return Signal(x.samples.copy(), x.fs)
    ratio = _rate_ratio(x.fs, fs_out)
    y = sps.resample_poly(x.samples, ratio.numerator, ratio.denominator)
    n_out = int(round(len(x) * fs_out / x.fs))
    if y.size < n_out:
        y = np.pad(y, (0, n_out - y.size))
    return Signal(y[:n_out], fs_out)


def write_mono_wav(x: Signal, path) -> None:
    from scipy.io import wavfile

    wavfile.write(path, int(round(x.fs)), x.samples.astype(np.float32))
