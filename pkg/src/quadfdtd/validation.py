"""Free-field analytical oracle, error metrics and runtime benchmarks."""

from __future__ import annotations

import csv
import logging
import math
import statistics
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import signal as sps

from .scene import GridSpec, MediumParams, grid_for
from .signals import Signal, ricker, ricker_integral
from .solver import (
    FieldState,
    UpdateOperators,
    build_pml,
    compute_time_step,
    simulate,
)

log = logging.getLogger(__name__)

DEFAULT_FREQUENCIES = (250.0, 500.0, 1000.0, 3000.0)


def _greens_hat_weights(a: float, dt: float, n: int):
    """Integrals of G(tau) = 1/(2*pi*sqrt(tau^2 - a^2)) against linear hats.

    Returns (rise, fall): the contributions of the rising half
    [(m-1)dt, m dt] and falling half [m dt, (m+1)dt] of the hat centred
    on lag m, for m = 0..n-1.  Closed-form antiderivatives handle the
    inverse-square-root singularity at tau = a exactly.
    """
    def f0(tau):
        return np.arccosh(np.maximum(tau, a) / a) / (2 * np.pi)

    def f1(tau):
        return np.sqrt(np.maximum(tau * tau - a * a, 0.0)) / (2 * np.pi)

    m = np.arange(n, dtype=float)
    lo, mid, hi = (m - 1) * dt, m * dt, (m + 1) * dt
    i0_r, i1_r = f0(mid) - f0(lo), f1(mid) - f1(lo)
    i0_f, i1_f = f0(hi) - f0(mid), f1(hi) - f1(mid)
    rise = (i1_r - lo * i0_r) / dt
    fall = (hi * i0_f - i1_f) / dt
    return rise, fall


def _ricker_second_integral(t, f_center, delay):
    tau = np.asarray(t) - delay
    return -np.exp(-((np.pi * f_center * tau) ** 2)) / (2 * (np.pi * f_center) ** 2)


def greens_response(distance: float, source: Signal, medium: MediumParams) -> Signal:
    """Pressure at ``distance`` from a 2D line source driven by ``source``.

    Convolves the piecewise-linear source (zero before t = 0) with the
    retarded 2D free-space kernel H(t - r/c) / (2*pi*sqrt(t^2 - r^2/c^2)).
    The output has the source's length and rate and vanishes for t < r/c.
    """
    if not distance > 0:
        raise ValueError("distance must be positive")
    a = distance / medium.c
    if a < 2.0 / source.fs:
        raise ValueError(
            f"distance {distance} m is under two samples of travel time at fs={source.fs}"
        )
    n = len(source)
    rise, fall = _greens_hat_weights(a, 1.0 / source.fs, n)
    s = source.samples
    y = sps.fftconvolve(s, rise + fall)[:n]
    # the first source sample only has the half-hat on t >= 0
    y -= s[0] * fall
    # fftconvolve round-off leaks ~1e-17 into the causal gap
    y[np.arange(n) / source.fs < a] = 0.0
    return Signal(y, source.fs)


def nrmse(reference: Signal | np.ndarray, test: Signal | np.ndarray) -> float:
    """Root-mean-square error normalised by the reference range, in percent."""
    ref = np.asarray(getattr(reference, "samples", reference), dtype=float)
    tst = np.asarray(getattr(test, "samples", test), dtype=float)
    if ref.shape != tst.shape:
        raise ValueError(f"length mismatch: {ref.size} vs {tst.size}")
    if isinstance(reference, Signal) and isinstance(test, Signal) and reference.fs != test.fs:
        raise ValueError("sample-rate mismatch")
    rng = ref.max() - ref.min()
    if rng == 0:
        raise ValueError("reference signal is constant")
    return float(100.0 * np.sqrt(np.mean((tst - ref) ** 2)) / rng)


def peak_arrival_diff(reference: Signal, test: Signal) -> float:
    """|argmax|test| - argmax|ref|| in milliseconds."""
    if reference.fs != test.fs:
        raise ValueError("sample-rate mismatch")
    k_ref = int(np.argmax(np.abs(reference.samples)))
    k_tst = int(np.argmax(np.abs(test.samples)))
    return 1e3 * abs(k_tst - k_ref) / reference.fs


@dataclass(frozen=True)
class ValidationReport:
    f0_hz: float
    nrmse_pct: float
    arrival_ms: float
    nx: int
    ny: int
    dt_s: float
    separation_m: float

    @property
    def f_center(self) -> float:
        return self.f0_hz


@dataclass(frozen=True, eq=False)
class BearingResult:
    bearing_deg: float
    distance_m: float
    nrmse_pct: float
    arrival_ms: float
    fdtd: Signal
    analytic: Signal


@dataclass(frozen=True, eq=False)
class ValidationTraces:
    report: ValidationReport
    bearings: list[BearingResult]

    @property
    def fdtd(self) -> Signal:
        return self.bearings[0].fdtd

    @property
    def analytic(self) -> Signal:
        return self.bearings[0].analytic


def settling_time(
    f0: float, distance: float, delay: float, medium: MediumParams, level: float = 0.01
) -> float:
    """Time after which the analytic Ricker response stays below ``level`` of its peak."""
    fs = 200.0 * f0
    n = int((delay + distance / medium.c + 60.0 / f0) * fs)
    src = Signal(ricker(np.arange(n) / fs, f0, delay), fs)
    a = np.abs(greens_response(distance, src, medium).samples)
    return (np.nonzero(a > level * a.max())[0][-1] + 1) / fs


def validate_frequency(
    f0: float,
    *,
    separation: float = 5.0,
    clearance: float = 1.0,
    bearings=tuple(np.linspace(0.0, 45.0, 7)),
    n_pml: int = 20,
    pml_reflection: float = 1e-4,
    safety: float = 0.99,
    medium: MediumParams | None = None,
    oversample: int = 16,
    cells_per_wavelength: float = 10.0,
    threads: int | None = None,
) -> ValidationTraces:
    """FDTD vs analytical response to a Ricker pulse of centre ``f0`` Hz.

    The grid resolves ``f0`` at ``cells_per_wavelength`` cells per
    wavelength.  A point source sits ``clearance`` m inside the lower-left
    corner of the absorbing layer, and receivers lie ``separation`` m away
    along each bearing in ``bearings`` (degrees from the +x axis).  The
    scheme's dispersion is anisotropic, worst along the grid axes and
    nearly absent along the diagonal near the CFL limit, so the report
    carries the bearing-averaged NRMSE and the worst arrival difference.

    The Ricker wavelet is the forcing term of the second-order wave
    equation.  An additive pressure source of rate q(t) forces it with
    dq/dt, so q is the wavelet's running integral and each step injects the
    increment of its second integral (a Gaussian).

    Both traces are peak-normalised and compared from t = 0 until the
    analytic response has settled below 1% of its peak.
    """
    medium = medium or MediumParams()
    f_grid = f0 * cells_per_wavelength / 10.0
    ds = medium.c / f_grid / 10.0
    pad = clearance + n_pml * ds
    side = separation + 2.0 * pad
    grid = grid_for((side, side), medium.c, f_grid)
    delay = 1.2 / f0
    t_end = settling_time(f0, separation, delay, medium)
    tspec = compute_time_step(grid, medium, t_end, safety)
    dt, nt = tspec.dt, tspec.nt

    src = grid.index_of(pad, pad)
    rcvs = []
    for b in bearings:
        th = math.radians(b)
        rcvs.append((src[0] + int(round(separation * math.cos(th) / grid.ds)),
                     src[1] + int(round(separation * math.sin(th) / grid.ds))))

    edges = np.arange(nt + 1) * dt
    injected = np.diff(_ricker_second_integral(edges, f0, delay))
    ops = UpdateOperators.build(
        grid, medium, dt, damping=build_pml(grid, n_pml, medium, pml_reflection),
        source_index=src, source_width=0,
    )
    state = FieldState.zeros(grid.nx, grid.ny)
    traces, _, _ = simulate(state, ops, injected, nt, rcvs, threads=threads)

    # oracle on a finer clock; trace sample k is the field at (k + 1) dt
    t_fine = np.arange((nt + 1) * oversample + 1) * dt / oversample
    fine = Signal(ricker(t_fine, f0, delay), oversample / dt)
    results = []
    for b, rcv, tr in zip(bearings, rcvs, traces):
        dist = math.hypot(rcv[0] - src[0], rcv[1] - src[1]) * grid.ds
        ana = greens_response(dist, fine, medium).samples[oversample::oversample][:nt]
        fdtd_n = Signal(tr / np.max(np.abs(tr)), 1.0 / dt)
        ana_n = Signal(ana / np.max(np.abs(ana)), 1.0 / dt)
        results.append(BearingResult(
            float(b), dist, nrmse(ana_n, fdtd_n), peak_arrival_diff(ana_n, fdtd_n),
            fdtd_n, ana_n,
        ))
    report = ValidationReport(
        f0_hz=float(f0),
        nrmse_pct=float(np.mean([r.nrmse_pct for r in results])),
        arrival_ms=float(max(r.arrival_ms for r in results)),
        nx=grid.nx,
        ny=grid.ny,
        dt_s=dt,
        separation_m=float(separation),
    )
    return ValidationTraces(report, results)


def run_validation_suite(frequencies=DEFAULT_FREQUENCIES[:3], **kwargs) -> list[ValidationReport]:
    reports = []
    for f0 in frequencies:
        rep = validate_frequency(float(f0), **kwargs).report
        log.info("f0=%g Hz: NRMSE %.2f%%, arrival %.3f ms", f0, rep.nrmse_pct, rep.arrival_ms)
        reports.append(rep)
    nr = [r.nrmse_pct for r in reports]
    if any(b < a for a, b in zip(nr, nr[1:])):
        log.info("NRMSE is not monotone in f0: %s", nr)
    return reports


def write_reports_csv(reports, path) -> None:
    cols = [f.name for f in fields(ValidationReport)]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in reports:
            w.writerow(asdict(r))


def write_overlay_csv(result: BearingResult, fdtd_path, analytic_path) -> None:
    """Two-column (time_s, amplitude) files for an FDTD/analytic overlay plot."""
    t = (np.arange(len(result.fdtd)) + 1) / result.fdtd.fs
    for sig, path in ((result.fdtd, fdtd_path), (result.analytic, analytic_path)):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "amplitude"])
            w.writerows(zip(t.tolist(), sig.samples.tolist()))


@dataclass(frozen=True)
class BenchmarkRecord:
    area_m2: float
    f_max_hz: float
    wall_minutes: float
    cells: int
    steps: int


def _bench_once(grid: GridSpec, medium: MediumParams, t_sim: float, threads) -> tuple[float, int]:
    tspec = compute_time_step(grid, medium, t_sim)
    n_pml = max(0, min(20, (min(grid.nx, grid.ny) - 1) // 2 - 1))
    ops = UpdateOperators.build(
        grid, medium, tspec.dt, damping=build_pml(grid, n_pml, medium),
        source_index=(grid.nx // 2, grid.ny // 2), source_width=0,
    )
    f = 0.5 / (10 * grid.ds) * medium.c
    src = np.diff(ricker_integral(np.arange(tspec.nt + 1) * tspec.dt, f, 1.2 / f))
    state = FieldState.zeros(grid.nx, grid.ny)
    _, _, wall = simulate(state, ops, src, tspec.nt, [(0, 0)], threads=threads,
                          check_every=1000)
    return wall, tspec.nt


def run_benchmarks(
    areas,
    f_max_list,
    repetitions: int = 3,
    *,
    t_sim: float = 0.05,
    medium: MediumParams | None = None,
    threads: int | None = 1,
) -> list[BenchmarkRecord]:
    """Time the FDTD loop over square domains; one record per repetition.

    Areas below 1 m^2 are clamped to 1 m^2.  Run with ``threads=1`` for
    timing: concurrent workers skew the scaling.
    """
    medium = medium or MediumParams()
    # compile outside the timed region
    _bench_once(grid_for((1.0, 1.0), medium.c, 343.0 * 2), medium, 1e-3, threads)
    records = []
    for area in areas:
        area = max(float(area), 1.0)
        side = math.sqrt(area)
        for f in f_max_list:
            grid = grid_for((side, side), medium.c, float(f))
            for _ in range(repetitions):
                wall, steps = _bench_once(grid, medium, t_sim, threads)
                records.append(BenchmarkRecord(area, float(f), wall / 60.0, grid.cells, steps))
    return records


def summarize_benchmarks(records) -> list[BenchmarkRecord]:
    """Median wall time per (area, f_max)."""
    groups: dict[tuple[float, float], list[BenchmarkRecord]] = {}
    for r in records:
        groups.setdefault((r.area_m2, r.f_max_hz), []).append(r)
    return [
        BenchmarkRecord(a, f, statistics.median(x.wall_minutes for x in rs), rs[0].cells, rs[0].steps)
        for (a, f), rs in groups.items()
    ]


def write_benchmarks_csv(records, path) -> None:
    cols = [f.name for f in fields(BenchmarkRecord)]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in records:
            w.writerow(asdict(r))
