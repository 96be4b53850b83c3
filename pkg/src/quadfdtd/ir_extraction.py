"""Impulse-response extraction, true-stereo assembly, WAV export and offline
auralization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np
from scipy.io import wavfile

from .signals import Signal, SweepSpec, convolve, inverse_filter, resample

CHANNEL_ROLES = ("L->L", "L->R", "R->R", "R->L")
# mic label feeding each role, in file order
ROLE_SOURCES = ("FL", "RR", "FR", "RL")


def extract_ir(
    trace: Signal, sweep: Signal, spec: SweepSpec, ir_length: int | None = None
) -> Signal:
    """Deconvolve a sweep recording with the inverse filter.

    The linear convolution is cropped at its causal origin (index
    ``len(sweep) - 1``) and truncated to ``ir_length`` samples.
    """
    if trace.fs != sweep.fs:
        raise ValueError(f"sample-rate mismatch: trace {trace.fs} vs sweep {sweep.fs}")
    full = convolve(trace, inverse_filter(sweep, spec)).samples
    h = full[len(sweep) - 1:]
    if ir_length is not None:
        h = h[:ir_length]
    return Signal(h, trace.fs)


def default_ir_length(sim_duration: float, sweep_duration: float, fs: float) -> int:
    """Twice the recorded tail after the sweep ends, in samples."""
    return max(1, int(round(2.0 * max(sim_duration - sweep_duration, 0.0) * fs)))


def onset_index(x: Signal | np.ndarray, threshold: float = 0.1) -> int:
    """First sample whose magnitude reaches ``threshold`` of the peak."""
    a = np.abs(np.asarray(getattr(x, "samples", x)))
    peak = a.max()
    if peak == 0:
        raise ValueError("silent signal has no onset")
    return int(np.argmax(a >= threshold * peak))


def direct_arrival_index(x: Signal | np.ndarray, level: float = 0.5) -> int:
    """Index of the first local maximum of |x| reaching ``level`` of the peak.

    A sweep-deconvolved IR is a zero-phase band-pass of the true response,
    so its sidelobes ring ahead of the direct sound by up to a few periods
    of the top sweep frequency.  The first strong peak is insensitive to
    that ringing and to later, louder reflections.
    """
    from scipy.signal import find_peaks

    a = np.abs(np.asarray(getattr(x, "samples", x), dtype=np.float64))
    peak = a.max()
    if peak == 0:
        raise ValueError("silent signal has no arrival")
    idx, _ = find_peaks(np.concatenate(([0.0], a, [0.0])), height=level * peak)
    return int(idx[0] - 1)


@dataclass(frozen=True, eq=False)
class QuadIR:
    channels: tuple[Signal, Signal, Signal, Signal]
    listener_id: str = ""
    channel_roles: tuple[str, ...] = CHANNEL_ROLES
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.channels) != 4:
            raise ValueError("a true-stereo IR has exactly four channels")
        fs = {c.fs for c in self.channels}
        n = {len(c) for c in self.channels}
        if len(fs) != 1 or len(n) != 1:
            raise ValueError("all channels must share length and sample rate")

    @property
    def fs(self) -> float:
        return self.channels[0].fs

    def role(self, name: str) -> Signal:
        return self.channels[self.channel_roles.index(name)]

    def as_array(self) -> np.ndarray:
        """(n_samples, 4) array in channel order."""
        return np.stack([c.samples for c in self.channels], axis=1)


def assemble_quad(
    irs: Mapping[str, Signal], listener_id: str = "", peak: float = 0.9
) -> QuadIR:
    """Order FL/FR/RL/RR mono IRs as [L->L, L->R, R->R, R->L].

    The four channels share one normalisation gain so the joint peak is
    ``peak``; inter-channel level ratios are preserved.
    """
    missing = set(ROLE_SOURCES) - set(irs)
    if missing:
        raise ValueError(f"missing mic IRs: {sorted(missing)}")
    chans = [irs[k] for k in ROLE_SOURCES]
    if len({c.fs for c in chans}) != 1 or len({len(c) for c in chans}) != 1:
        raise ValueError("mic IRs must share length and sample rate")
    top = max(float(np.max(np.abs(c.samples))) for c in chans)
    g = peak / top if top > 0 else 1.0
    return QuadIR(tuple(c.scaled(g) for c in chans), listener_id)


def write_wav(ir: QuadIR, path, fs_out: float = 44100.0, metadata: dict | None = None) -> QuadIR:
    """Write a 4-channel 32-bit float WAV, resampling when needed.

    A JSON sidecar with the channel-role order and ``metadata`` is written
    next to the file.  Returns the IR as written.
    """
    if ir.fs != fs_out:
        chans = [resample(c, fs_out) for c in ir.channels]
        # resampling moves inter-sample peaks; restore the joint peak level
        before = np.abs(ir.as_array()).max()
        after = max(float(np.abs(c.samples).max()) for c in chans)
        g = before / after if after > 0 else 1.0
        ir = QuadIR(tuple(c.scaled(g) for c in chans), ir.listener_id,
                    ir.channel_roles, ir.metadata)
    rate = int(round(fs_out))
    wavfile.write(path, rate, ir.as_array().astype(np.float32))
    side = {
        "listener_id": ir.listener_id,
        "channel_roles": list(ir.channel_roles),
        "mic_sources": list(ROLE_SOURCES),
        "fs": rate,
        "samples": len(ir.channels[0]),
        **ir.metadata,
        **(metadata or {}),
    }
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
    return ir


def sidecar_path(path) -> str:
    p = str(path)
    return (p[:-4] if p.lower().endswith(".wav") else p) + ".json"


def read_wav(path, listener_id: str = "") -> QuadIR:
    fs, data = wavfile.read(path)
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValueError(f"{path}: expected 4 channels")
    chans = tuple(Signal(data[:, k].astype(np.float64), float(fs)) for k in range(4))
    return QuadIR(chans, listener_id)


@dataclass(frozen=True)
class OrientationGains:
    yaw: float
    left: float
    right: float

    @property
    def gains(self) -> tuple[float, float, float, float]:
        """Per-channel weights in [L->L, L->R, R->R, R->L] order."""
        return (self.left, self.left, self.right, self.right)


def orientation_gains(yaw_to_source: float) -> OrientationGains:
    """Split a panned source between the reverb's left and right inputs.

    ``yaw_to_source`` is the bearing of the source relative to the facing
    direction, positive towards the listener's right ear.  The weights
    follow cos^2/sin^2 of half the angle measured from the left ear, so
    facing the source gives 0.5/0.5 and the right ear on the source 0/1.
    """
    th = math.remainder(yaw_to_source, 2 * math.pi)
    phi = th + math.pi / 2
    return OrientationGains(th, math.cos(phi / 2) ** 2, math.sin(phi / 2) ** 2)


class Auralized(NamedTuple):
    left: Signal
    right: Signal
    clipped: bool


def auralize(dry: Signal, ir: QuadIR, yaw: float) -> Auralized:
    """Offline true-stereo convolution of a mono ``dry`` signal."""
    if dry.fs != ir.fs:
        raise ValueError(f"sample-rate mismatch: dry {dry.fs} vs IR {ir.fs}")
    g = orientation_gains(yaw)
    ll, lr, rr, rl = (convolve(dry, c).samples for c in ir.channels)
    left = g.left * ll + g.right * rl
    right = g.left * lr + g.right * rr
    clipped = bool(max(np.max(np.abs(left)), np.max(np.abs(right))) > 1.0)
    return Auralized(Signal(left, dry.fs), Signal(right, dry.fs), clipped)
