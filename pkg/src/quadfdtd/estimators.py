"""scikit-learn style wrappers around the simulation and IR pipeline.

Traces travel between steps as 2D arrays with one row per microphone, so the
steps compose in a :class:`sklearn.pipeline.Pipeline`::

    sim = SceneSimulator().fit(scene)
    pipe = make_pipeline(SweepDeconvolver.from_simulator(sim),
                         Resampler(fs_in=sim.time_.fs, fs_out=44100))
    irs = pipe.fit_transform(sim.transform(scene))
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .ir_extraction import extract_ir
from .scene import (
    SceneConfig,
    build_grid,
    load_scene,
    place_probes,
    rasterize_obstacles,
    scene_from_dict,
)
from .signals import Signal, SweepSpec, generate_ess, inverse_filter, resample
from .solver import build_pml, compute_time_step, run_simulation


def _as_scene(X) -> SceneConfig:
    if isinstance(X, SceneConfig):
        return X
    if isinstance(X, dict):
        return scene_from_dict(X)
    if isinstance(X, (str, Path)):
        return load_scene(X)
    raise TypeError(f"expected a SceneConfig, dict or scene path, got {type(X).__name__}")


class SceneSimulator(TransformerMixin, BaseEstimator):
    """Discretise a scene on ``fit``; run the sweep through it on ``transform``.

    Parameters left as ``None`` fall back to the scene's ``solver`` section.
    ``transform`` returns an array of shape (n_mics, nt); row labels are in
    ``mic_labels_`` as ``(listener_id, mic)`` pairs.
    """

    def __init__(self, safety=None, n_pml=None, pml_reflection=None,
                 snapshot_every=None, threads=None, backend="numba"):
        self.safety = safety
        self.n_pml = n_pml
        self.pml_reflection = pml_reflection
        self.snapshot_every = snapshot_every
        self.threads = threads
        self.backend = backend

    def _effective(self, cfg: SceneConfig) -> SceneConfig:
        over = {k: getattr(self, k) for k in ("safety", "n_pml", "pml_reflection")
                if getattr(self, k) is not None}
        if not over:
            return cfg
        return dataclasses.replace(cfg, solver=dataclasses.replace(cfg.solver, **over))

    def fit(self, X, y=None):
        cfg = self._effective(_as_scene(X))
        s = cfg.solver
        self.scene_ = cfg
        self.grid_ = build_grid(cfg)
        self.mask_ = rasterize_obstacles(cfg, self.grid_, s.n_pml)
        self.probes_ = place_probes(cfg, self.grid_, self.mask_, s.n_pml)
        self.damping_ = build_pml(self.grid_, s.n_pml, cfg.medium, s.pml_reflection)
        self.time_ = compute_time_step(self.grid_, cfg.medium, cfg.sim_duration, s.safety)
        self.sweep_ = generate_ess(cfg.sweep, self.time_.fs)
        self.mic_labels_ = [(lid, lab) for lid, lab, _ in self.probes_.flat_mics()]
        return self

    def transform(self, X=None):
        check_is_fitted(self, "grid_")
        out = run_simulation(
            self.scene_, self.grid_, self.mask_, self.probes_, self.damping_,
            self.time_, self.sweep_, self.snapshot_every,
            threads=self.threads, backend=self.backend,
        )
        self.output_ = out
        if not self.mic_labels_:
            return np.zeros((0, self.time_.nt))
        return np.stack([out.mic_traces[lid][lab].samples for lid, lab in self.mic_labels_])


class SweepDeconvolver(TransformerMixin, BaseEstimator):
    """Row-wise inverse-filter deconvolution of sweep recordings."""

    def __init__(self, f0=20.0, f1=3000.0, duration=2.5, fs=44100.0, fade=0.01,
                 ir_length=None):
        self.f0 = f0
        self.f1 = f1
        self.duration = duration
        self.fs = fs
        self.fade = fade
        self.ir_length = ir_length

    @classmethod
    def from_simulator(cls, sim: SceneSimulator, ir_length=None) -> "SweepDeconvolver":
        check_is_fitted(sim, "sweep_")
        sw = sim.scene_.sweep
        return cls(sw.f0, sw.f1, sw.duration, sim.time_.fs, sw.fade, ir_length)

    def fit(self, X=None, y=None):
        self.spec_ = SweepSpec(self.f0, self.f1, self.duration, self.fade)
        self.sweep_ = generate_ess(self.spec_, self.fs)
        self.inverse_ = inverse_filter(self.sweep_, self.spec_)
        return self

    def transform(self, X):
        check_is_fitted(self, "inverse_")
        X = check_array(X, dtype=np.float64)
        rows = [extract_ir(Signal(x, self.fs), self.sweep_, self.spec_, self.ir_length).samples
                for x in X]
        return np.stack(rows)


class Resampler(TransformerMixin, BaseEstimator):
    """Row-wise band-limited resampling from ``fs_in`` to ``fs_out``."""

    def __init__(self, fs_in=42857.0, fs_out=44100.0):
        self.fs_in = fs_in
        self.fs_out = fs_out

    def fit(self, X=None, y=None):
        if not (self.fs_in > 0 and self.fs_out > 0):
            raise ValueError("sample rates must be positive")
        self.n_features_in_ = None if X is None else np.shape(X)[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        return np.stack([resample(Signal(x, self.fs_in), self.fs_out).samples for x in X])
