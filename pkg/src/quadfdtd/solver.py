"""Staggered-grid leapfrog FDTD solver for 2D linear acoustics.

Layout: pressure ``p`` at cell centers (nx, ny); ``vx`` on the x-faces
between cells i and i+1 (nx-1, ny); ``vy`` on the y-faces (nx, ny-1).
The faces on the outer domain boundary are rigid (held at zero).

One time step runs, in order:

1. velocity update from the pressure gradient,
2. absorbing-layer damping ``exp(-sigma*dt)`` of velocity and pressure,
3. additive (soft) source injection into ``p`` over a Gaussian footprint,
4. zeroing of every velocity face touching an obstacle cell,
5. pressure update from the velocity divergence.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .scene import GridSpec, MediumParams, ProbeLayout, SceneConfig
from .signals import Signal

log = logging.getLogger(__name__)


class InstabilityError(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"non-finite field values detected at step {step}")
        self.step = step


@dataclass(frozen=True)
class TimeSpec:
    dt: float
    nt: int
    T_sim: float

    @property
    def fs(self) -> float:
        return 1.0 / self.dt


def cfl_limit(ds: float, c: float) -> float:
    return ds / (c * math.sqrt(2.0))


def compute_time_step(
    grid: GridSpec, medium: MediumParams, T_sim: float, safety: float = 0.99
) -> TimeSpec:
    if not 0 < safety <= 1:
        raise ValueError(f"safety factor must be in (0, 1], got {safety}")
    dt = safety * cfl_limit(grid.ds, medium.c)
    return TimeSpec(dt=dt, nt=math.ceil(T_sim / dt - 1e-9), T_sim=T_sim)


@dataclass(frozen=True, eq=False)
class DampingProfile:
    """Quadratic absorbing-layer ramps.

    ``sigma_x``/``sigma_y`` are sampled at pressure nodes, the ``*_face``
    variants at the staggered velocity faces.  The total damping at any
    location is ``sigma_x + sigma_y``.
    """

    sigma_x: np.ndarray
    sigma_y: np.ndarray
    sigma_x_face: np.ndarray
    sigma_y_face: np.ndarray
    n_pml: int
    sigma_max: float

    def total(self) -> np.ndarray:
        return self.sigma_x[:, None] + self.sigma_y[None, :]

    def decay_factors(self, dt: float):
        """exp(-sigma*dt) at p, vx and vy locations."""
        e = np.exp
        dp = e(-self.total() * dt)
        dvx = e(-(self.sigma_x_face[:, None] + self.sigma_y[None, :]) * dt)
        dvy = e(-(self.sigma_x[:, None] + self.sigma_y_face[None, :]) * dt)
        return dp, dvx, dvy

    @classmethod
    def none(cls, grid: GridSpec) -> "DampingProfile":
        return cls(
            np.zeros(grid.nx), np.zeros(grid.ny),
            np.zeros(grid.nx - 1), np.zeros(grid.ny - 1), 0, 0.0,
        )


def _ramp(coords: np.ndarray, n: int, n_pml: int, sigma_max: float) -> np.ndarray:
    # coords in index units; pressure node i sits at i, face i at i + 0.5
    depth = np.maximum(n_pml - coords, coords - (n - 1 - n_pml))
    depth = np.clip(depth, 0.0, None)
    return sigma_max * (depth / n_pml) ** 2


def pml_sigma_max(n_pml: int, ds: float, c: float, target_reflection: float, order: int = 2):
    return -(order + 1) * c * math.log(target_reflection) / (2.0 * n_pml * ds)


def build_pml(
    grid: GridSpec, n_pml: int, medium: MediumParams, target_reflection: float = 1e-4
) -> DampingProfile:
    if n_pml == 0:
        return DampingProfile.none(grid)
    if n_pml < 0 or 2 * n_pml >= min(grid.nx, grid.ny):
        raise ValueError(
            f"PML of {n_pml} cells is too thick for a {grid.nx}x{grid.ny} grid"
        )
    if not 0 < target_reflection < 1:
        raise ValueError("target reflection must be in (0, 1)")
    smax = pml_sigma_max(n_pml, grid.ds, medium.c, target_reflection)
    ix, iy = np.arange(grid.nx, dtype=float), np.arange(grid.ny, dtype=float)
    return DampingProfile(
        sigma_x=_ramp(ix, grid.nx, n_pml, smax),
        sigma_y=_ramp(iy, grid.ny, n_pml, smax),
        sigma_x_face=_ramp(ix[:-1] + 0.5, grid.nx, n_pml, smax),
        sigma_y_face=_ramp(iy[:-1] + 0.5, grid.ny, n_pml, smax),
        n_pml=n_pml,
        sigma_max=smax,
    )


@dataclass
class FieldState:
    p: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, nx: int, ny: int) -> "FieldState":
        return cls(np.zeros((nx, ny)), np.zeros((nx - 1, ny)), np.zeros((nx, ny - 1)))

    def energy(self, grid: GridSpec, medium: MediumParams) -> float:
        """Same-time energy sum (J/m); oscillates by O(dt) under leapfrog."""
        return discrete_energy(self.p, self.vx, self.vy, self.vx, self.vy, grid, medium)


def discrete_energy(p, vx_prev, vy_prev, vx_next, vy_next, grid: GridSpec, medium: MediumParams):
    """Acoustic energy per unit depth of the staggered scheme.

    ``p`` is the pressure at step n and the velocities bracket it at
    n - 1/2 and n + 1/2.  With rigid walls and no damping or source this
    quantity is conserved by the leapfrog update to round-off.
    """
    area = grid.ds ** 2
    pot = np.sum(p ** 2) * area / (2 * medium.rho0 * medium.c ** 2)
    kin = 0.5 * medium.rho0 * area * (np.sum(vx_prev * vx_next) + np.sum(vy_prev * vy_next))
    return float(pot + kin)


def gaussian_footprint(
    center: tuple[int, int], width: int, shape, mask: np.ndarray | None = None
):
    """Cell indices and weights of a truncated Gaussian of std width/2 cells.

    ``width <= 0`` gives a single-cell point source.
    """
    ci, cj = center
    if width <= 0:
        return np.array([ci]), np.array([cj]), np.array([1.0])
    sd = 0.5 * width
    r = np.arange(-width, width + 1)
    di, dj = np.meshgrid(r, r, indexing="ij")
    keep = di ** 2 + dj ** 2 <= width ** 2
    ii, jj = ci + di[keep], cj + dj[keep]
    w = np.exp(-(di[keep] ** 2 + dj[keep] ** 2) / (2.0 * sd ** 2))
    inside = (ii >= 0) & (ii < shape[0]) & (jj >= 0) & (jj < shape[1])
    ii, jj, w = ii[inside], jj[inside], w[inside]
    if mask is not None:
        w = w * (mask[ii, jj] > 0)
    return ii, jj, w


@dataclass(frozen=True, eq=False)
class UpdateOperators:
    """Precomputed per-run coefficients shared by both step backends."""

    cv: float
    cp: float
    dp: np.ndarray
    dvx: np.ndarray
    dvy: np.ndarray
    src_i: np.ndarray
    src_j: np.ndarray
    src_w: np.ndarray

    @classmethod
    def build(
        cls,
        grid: GridSpec,
        medium: MediumParams,
        dt: float,
        mask: np.ndarray | None = None,
        damping: DampingProfile | None = None,
        source_index: tuple[int, int] | None = None,
        source_width: int = 0,
    ) -> "UpdateOperators":
        damping = damping or DampingProfile.none(grid)
        dp, dvx, dvy = damping.decay_factors(dt)
        if mask is not None:
            free = mask > 0
            dvx = dvx * (free[:-1, :] & free[1:, :])
            dvy = dvy * (free[:, :-1] & free[:, 1:])
        if source_index is None:
            si = sj = np.zeros(0, dtype=np.int64)
            sw = np.zeros(0)
        else:
            si, sj, sw = gaussian_footprint(source_index, source_width, grid.shape, mask)
        return cls(
            cv=dt / (medium.rho0 * grid.ds),
            cp=medium.rho0 * medium.c ** 2 * dt / grid.ds,
            dp=np.ascontiguousarray(dp),
            dvx=np.ascontiguousarray(dvx),
            dvy=np.ascontiguousarray(dvy),
            src_i=np.asarray(si, dtype=np.int64),
            src_j=np.asarray(sj, dtype=np.int64),
            src_w=np.asarray(sw, dtype=np.float64),
        )


def step(state: FieldState, ops: UpdateOperators, source_sample: float = 0.0) -> FieldState:
    """Advance ``state`` one time step in place (NumPy reference path)."""
    p, vx, vy = state.p, state.vx, state.vy
    vx[:] = (vx - ops.cv * (p[1:, :] - p[:-1, :])) * ops.dvx
    vy[:] = (vy - ops.cv * (p[:, 1:] - p[:, :-1])) * ops.dvy
    vxp = np.pad(vx, ((1, 1), (0, 0)))
    vyp = np.pad(vy, ((0, 0), (1, 1)))
    div = (vxp[1:, :] - vxp[:-1, :]) + (vyp[:, 1:] - vyp[:, :-1])
    p[:] = p * ops.dp - ops.cp * div
    if source_sample != 0.0:
        np.add.at(p, (ops.src_i, ops.src_j), source_sample * ops.src_w)
    if not np.isfinite(p).all():
        raise InstabilityError(state.step + 1)
    state.step += 1
    return state


@dataclass(frozen=True, eq=False)
class SimulationOutput:
    mic_traces: dict[str, dict[str, Signal]]
    snapshots: list[tuple[int, np.ndarray]]
    runtime_stats: dict[str, float]
    dt: float = 0.0


def set_threads(threads: int | None) -> int:
    import numba

    avail = numba.config.NUMBA_NUM_THREADS
    if threads is None:
        return numba.get_num_threads()
    n = max(1, min(int(threads), avail))
    if n != threads:
        log.warning("requested %d threads, using %d (NUMBA_NUM_THREADS=%d)", threads, n, avail)
    numba.set_num_threads(n)
    return n


def simulate(
    state: FieldState,
    ops: UpdateOperators,
    source: np.ndarray,
    nt: int,
    mic_indices: list[tuple[int, int]],
    *,
    snapshot_every: int | None = None,
    snapshot_sink: Callable[[int, np.ndarray], None] | None = None,
    check_every: int = 100,
    backend: str = "numba",
    threads: int | None = None,
) -> tuple[np.ndarray, list[tuple[int, np.ndarray]], float]:
    """Run ``nt`` steps; returns (traces[n_mic, nt], snapshots, wall seconds).

    ``traces[m, n]`` is the pressure at mic ``m`` after step ``n``, i.e. at
    time ``(n + 1) * dt``.
    """
    source = np.ascontiguousarray(source, dtype=np.float64)
    traces = np.zeros((len(mic_indices), nt))
    mic_i = np.array([m[0] for m in mic_indices], dtype=np.int64)
    mic_j = np.array([m[1] for m in mic_indices], dtype=np.int64)
    snapshots: list[tuple[int, np.ndarray]] = []

    def emit(step_no):
        frame = state.p.astype(np.float32)
        if snapshot_sink is not None:
            snapshot_sink(step_no, frame)
        else:
            snapshots.append((step_no, frame))

    if backend == "numba":
        from . import _kernels

        set_threads(threads)
        chunk = check_every
        if snapshot_every:
            chunk = min(chunk, snapshot_every)
        t0 = _time.perf_counter()
        n = 0
        while n < nt:
            k = min(chunk, nt - n)
            if snapshot_every:
                k = min(k, snapshot_every - (state.step % snapshot_every))
            ok = _kernels.advance(
                state.p, state.vx, state.vy, ops.cv, ops.cp, ops.dvx, ops.dvy, ops.dp,
                ops.src_i, ops.src_j, ops.src_w, source, n, k, mic_i, mic_j, traces,
            )
            n += k
            state.step += k
            if not ok:
                raise InstabilityError(state.step)
            if snapshot_every and state.step % snapshot_every == 0:
                emit(state.step)
        wall = _time.perf_counter() - t0
    elif backend == "numpy":
        t0 = _time.perf_counter()
        for n in range(nt):
            step(state, ops, source[n] if n < source.size else 0.0)
            traces[:, n] = state.p[mic_i, mic_j]
            if snapshot_every and state.step % snapshot_every == 0:
                emit(state.step)
        wall = _time.perf_counter() - t0
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return traces, snapshots, wall


def run_simulation(
    cfg: SceneConfig,
    grid: GridSpec,
    mask: np.ndarray,
    probes: ProbeLayout,
    damping: DampingProfile,
    time: TimeSpec,
    source_signal: Signal,
    snapshot_every: int | None = None,
    **kwargs,
) -> SimulationOutput:
    """Drive the scene's source through the grid and record every cluster mic."""
    if not math.isclose(source_signal.fs, time.fs, rel_tol=1e-9):
        raise ValueError(
            f"source sampled at {source_signal.fs} Hz but solver runs at {time.fs} Hz"
        )
    if len(source_signal) > time.nt:
        raise ValueError("source signal is longer than the simulation")
    ops = UpdateOperators.build(
        grid, cfg.medium, time.dt, mask, damping,
        probes.source_index, probes.source_width_cells,
    )
    flat = probes.flat_mics()
    state = FieldState.zeros(grid.nx, grid.ny)
    traces, snaps, wall = simulate(
        state, ops, source_signal.samples, time.nt, [m[2] for m in flat],
        snapshot_every=snapshot_every, **kwargs,
    )
    out: dict[str, dict[str, Signal]] = {lid: {} for lid in probes.mic_indices}
    for row, (lid, label, _) in enumerate(flat):
        out[lid][label] = Signal(traces[row], time.fs)
    stats = {
        "wall_seconds": wall,
        "steps_per_second": time.nt / wall if wall > 0 else float("inf"),
        "steps": time.nt,
        "cells": grid.cells,
    }
    return SimulationOutput(mic_traces=out, snapshots=snaps, runtime_stats=stats, dt=time.dt)
