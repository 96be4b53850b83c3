"""Run-directory workflow shared by the CLI and the estimator wrappers.

A simulation run directory holds::

    manifest.json           artifact index, configuration echo, provenance
    scene.json              effective scene (after overrides)
    mask.pgm                obstacle mask
    traces/<id>_<mic>.f64   raw little-endian float64 pressure traces
    frames/*.snap           optional pressure snapshots
    ir/<id>.wav, <id>.json  added by IR extraction
"""

from __future__ import annotations

import contextlib
import dataclasses
import json
import logging
import os
import shutil
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .ir_extraction import assemble_quad, default_ir_length, extract_ir, write_wav
from .scene import (
    SceneConfig,
    build_grid,
    place_probes,
    rasterize_obstacles,
    write_pgm,
)
from .signals import Signal, SweepSpec, generate_ess
from .snapshots import read_frame, write_frame
from .solver import build_pml, compute_time_step, run_simulation

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


@contextlib.contextmanager
def staged_dir(target):
    """Yield a temporary sibling directory that replaces ``target`` on success."""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.tmp-", dir=target.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    old = None
    if target.exists():
        old = Path(tempfile.mkdtemp(prefix=f".{target.name}.old-", dir=target.parent))
        os.rmdir(old)
        os.rename(target, old)
    os.rename(tmp, target)
    if old is not None:
        shutil.rmtree(old, ignore_errors=True)


def write_json_atomic(path, data) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise PipelineError(f"{run_dir}: no manifest.json (not a simulation run directory)")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _stamp(manifest: dict) -> dict:
    manifest["tool"] = {"name": "quadfdtd", "version": __version__}
    manifest["updated"] = datetime.now(timezone.utc).isoformat()
    return manifest


def simulate_scene(
    cfg: SceneConfig,
    out_dir,
    *,
    snapshot_every: int | None = None,
    threads: int | None = None,
    backend: str = "numba",
) -> dict:
    """Discretise ``cfg``, run the sweep through it and write a run directory."""
    s = cfg.solver
    grid = build_grid(cfg)
    mask = rasterize_obstacles(cfg, grid, s.n_pml)
    probes = place_probes(cfg, grid, mask, s.n_pml)
    damping = build_pml(grid, s.n_pml, cfg.medium, s.pml_reflection)
    tspec = compute_time_step(grid, cfg.medium, cfg.sim_duration, s.safety)
    sweep = generate_ess(cfg.sweep, tspec.fs)
    if len(sweep) > tspec.nt:
        raise PipelineError("sweep is longer than the simulated duration")
    if not cfg.listeners:
        log.warning("scene has no listeners; no traces will be recorded")

    with staged_dir(out_dir) as tmp:
        (tmp / "traces").mkdir()
        frames = []
        if snapshot_every:
            (tmp / "frames").mkdir()

        def sink(step_no, p):
            name = f"frames/step_{step_no:08d}.snap"
            write_frame(tmp / name, p, grid.ds, tspec.dt, step_no)
            frames.append({"step": step_no, "time_s": step_no * tspec.dt, "path": name})

        out = run_simulation(
            cfg, grid, mask, probes, damping, tspec, sweep, snapshot_every,
            snapshot_sink=sink, threads=threads, backend=backend,
        )
        traces = {}
        for lid, mics in out.mic_traces.items():
            traces[lid] = {}
            for label, sig in mics.items():
                name = f"traces/{lid}_{label}.f64"
                sig.samples.astype("<f8").tofile(tmp / name)
                traces[lid][label] = name
        write_pgm(mask, tmp / "mask.pgm")
        with open(tmp / "scene.json", "w", encoding="utf-8") as fh:
            json.dump(cfg.to_dict(), fh, indent=2)
        manifest = _stamp({
            "config": cfg.to_dict(),
            "provenance": {
                "grid": dataclasses.asdict(grid),
                "dt": tspec.dt,
                "nt": tspec.nt,
                "fs": tspec.fs,
                "sweep": dataclasses.asdict(cfg.sweep),
                "sweep_samples": len(sweep),
                "source_index": list(probes.source_index),
                "source_width_cells": probes.source_width_cells,
                "mic_indices": {
                    lid: {k: list(v) for k, v in m.items()}
                    for lid, m in probes.mic_indices.items()
                },
            },
            "artifacts": {
                "mask": "mask.pgm",
                "scene": "scene.json",
                "traces": traces,
                "frames": frames,
            },
            "runtime": out.runtime_stats,
        })
        write_json_atomic(tmp / "manifest.json", manifest)
    return manifest


def load_traces(run_dir, manifest: dict) -> dict[str, dict[str, Signal]]:
    fs = manifest["provenance"]["fs"]
    out = {}
    for lid, mics in manifest["artifacts"]["traces"].items():
        out[lid] = {}
        for label, rel in mics.items():
            path = Path(run_dir) / rel
            if not path.exists():
                raise PipelineError(f"missing trace file {path}")
            out[lid][label] = Signal(np.fromfile(path, dtype="<f8"), fs)
    return out


def extract_run_irs(run_dir, fs_out: float = 44100.0, ir_length: int | None = None) -> dict:
    """Deconvolve every listener's traces into ``ir/<id>.wav``."""
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    prov = manifest.get("provenance", {})
    try:
        sw = prov["sweep"]
        spec = SweepSpec(sw["f0"], sw["f1"], sw["duration"], sw.get("fade", 0.01))
        fs = prov["fs"]
    except KeyError as exc:
        raise PipelineError(f"run provenance lacks sweep parameters ({exc})") from None
    sweep = generate_ess(spec, fs)
    if "sweep_samples" in prov and len(sweep) != prov["sweep_samples"]:
        raise PipelineError("regenerated sweep does not match the recorded provenance")
    traces = load_traces(run_dir, manifest)
    if ir_length is None:
        ir_length = default_ir_length(manifest["config"]["sim_duration"], spec.duration, fs)
    listeners = {l["id"]: l for l in manifest["config"]["listeners"]}

    irs = {}
    with staged_dir(run_dir / "ir") as tmp:
        for lid, mics in traces.items():
            mono = {k: extract_ir(v, sweep, spec, ir_length) for k, v in mics.items()}
            quad = assemble_quad(mono, lid)
            meta = {
                "position": listeners[lid]["position"],
                "orientation": listeners[lid]["orientation"],
                "provenance": {
                    "grid": prov["grid"], "dt": prov["dt"],
                    "sweep": prov["sweep"], "simulation_fs": fs,
                },
            }
            write_wav(quad, tmp / f"{lid}.wav", fs_out, meta)
            irs[lid] = {"wav": f"ir/{lid}.wav", "metadata": f"ir/{lid}.json"}
    manifest["artifacts"]["irs"] = irs
    manifest["ir_extraction"] = {"fs_out": fs_out, "ir_length_samples": ir_length}
    write_json_atomic(run_dir / "manifest.json", _stamp(manifest))
    return manifest


def list_frames(run_dir) -> list[Path]:
    run_dir = Path(run_dir)
    try:
        manifest = read_manifest(run_dir)
        paths = [run_dir / f["path"] for f in manifest["artifacts"].get("frames", [])]
    except PipelineError:
        paths = sorted((run_dir / "frames").glob("*.snap"))
    if not paths:
        raise PipelineError(f"{run_dir}: no snapshots found")
    return paths


def render_run_frames(run_dir, out_dir, fmt: str = "png", cmap: str = "inferno") -> list[str]:
    from .scene import read_pgm
    from .snapshots import frame_image_name, save_image, snapshot_to_image

    run_dir = Path(run_dir)
    paths = list_frames(run_dir)
    mask_path = run_dir / "mask.pgm"
    mask = read_pgm(mask_path) if mask_path.exists() else None
    names = []
    with staged_dir(out_dir) as tmp:
        for path in paths:
            fr = read_frame(path)
            name = frame_image_name(fr.step, fr.dt, fmt)
            save_image(snapshot_to_image(fr.p, mask, cmap), tmp / name)
            names.append(name)
    return names
