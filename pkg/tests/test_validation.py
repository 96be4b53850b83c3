import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from quadfdtd.scene import MediumParams
from quadfdtd.signals import Signal, ricker
from quadfdtd.validation import (
    BenchmarkRecord,
    greens_response,
    nrmse,
    peak_arrival_diff,
    run_benchmarks,
    settling_time,
    summarize_benchmarks,
    validate_frequency,
    write_benchmarks_csv,
    write_overlay_csv,
    write_reports_csv,
)

AIR = MediumParams()


def ricker_signal(f0=500.0, fs=48000.0, dur=0.05, delay=None):
    delay = 1.2 / f0 if delay is None else delay
    return Signal(ricker(np.arange(int(dur * fs)) / fs, f0, delay), fs)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 8.0), st.integers(0, 2 ** 31 - 1))
def test_greens_causal(r, seed):
    fs = 20000.0
    src = Signal(np.random.default_rng(seed).standard_normal(1200), fs)
    y = greens_response(r, src, AIR).samples
    t = np.arange(len(y)) / fs
    assert not y[t < r / AIR.c].any()


def test_greens_distance_guard():
    with pytest.raises(ValueError, match="two samples"):
        greens_response(0.01, ricker_signal(), AIR)
    with pytest.raises(ValueError):
        greens_response(0.0, ricker_signal(), AIR)


def test_greens_spreading_ratio():
    src = ricker_signal(500.0, 48000.0, 0.08)
    a1 = np.abs(greens_response(5.0, src, AIR).samples).max()
    a2 = np.abs(greens_response(10.0, src, AIR).samples).max()
    assert a2 / a1 == pytest.approx(1 / math.sqrt(2), rel=0.05)


def test_greens_matches_quadrature():
    """Closed-form hat integration vs adaptive quadrature of the convolution."""
    f0, delay, r = 400.0, 3e-3, 2.0
    fs = 96000.0
    src = ricker_signal(f0, fs, 0.02, delay)
    y = greens_response(r, src, AIR).samples
    a = r / AIR.c
    for t_req in (a + 1e-4, a + delay, a + delay + 1e-3, a + 0.01):
        k = int(round(t_req * fs))
        t = k / fs
        # substitute tau = a + u^2 to remove the inverse-square-root singularity
        def integrand(u):
            tau = a + u * u
            return 2 * u * ricker(t - tau, f0, delay) / (2 * np.pi * math.sqrt(tau * tau - a * a))

        ref, _ = integrate.quad(integrand, 0.0, math.sqrt(t - a), limit=400,
                                epsabs=1e-12, epsrel=1e-10)
        assert y[k] == pytest.approx(ref, abs=1e-3 * np.abs(y).max())


def test_oracle_agrees_with_refined_fdtd():
    """FDTD converges on the oracle at second order as the grid is refined."""
    errs = []
    for cpw in (10, 20, 40):
        rep = validate_frequency(500.0, separation=2.0, bearings=(0.0,),
                                 cells_per_wavelength=cpw, n_pml=2 * cpw).report
        errs.append(rep.nrmse_pct)
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3
    assert errs[2] < 0.5


def test_diagonal_propagation_nearly_dispersion_free():
    rep = validate_frequency(500.0, separation=2.0, bearings=(45.0,)).report
    assert rep.nrmse_pct < 1.0


def test_nrmse_examples():
    ref = np.sin(np.linspace(0, 6, 200))
    assert nrmse(ref, ref) == 0.0
    rng = ref.max() - ref.min()
    assert nrmse(ref, ref + 0.01 * rng) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="constant"):
        nrmse(np.ones(5), np.ones(5))
    with pytest.raises(ValueError, match="length"):
        nrmse(ref, ref[:-1])


def test_peak_arrival_examples():
    x = np.zeros(200)
    x[50] = 1.0
    a = Signal(x, 42857.0)
    b = Signal(np.roll(x, 10), 42857.0)
    assert peak_arrival_diff(a, a) == 0.0
    assert peak_arrival_diff(a, b) == pytest.approx(0.2333, abs=1e-4)
    assert peak_arrival_diff(b, a) == peak_arrival_diff(a, b)


def test_settling_time_after_arrival():
    t = settling_time(500.0, 5.0, 1.2 / 500.0, AIR)
    assert 5.0 / 343.0 + 1.2 / 500 < t < 5.0 / 343.0 + 0.2


def test_reports_and_overlay_csv(tmp_path):
    tr = validate_frequency(500.0, separation=2.0, bearings=(0.0, 45.0))
    assert len(tr.bearings) == 2
    assert tr.report.nrmse_pct == pytest.approx(np.mean([b.nrmse_pct for b in tr.bearings]))
    write_reports_csv([tr.report], tmp_path / "r.csv")
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert list(rows[0]) == ["f0_hz", "nrmse_pct", "arrival_ms", "nx", "ny", "dt_s",
                             "separation_m"]
    assert float(rows[0]["f0_hz"]) == 500.0
    write_overlay_csv(tr.bearings[0], tmp_path / "a.csv", tmp_path / "b.csv")
    a = np.loadtxt(tmp_path / "a.csv", delimiter=",", skiprows=1)
    b = np.loadtxt(tmp_path / "b.csv", delimiter=",", skiprows=1)
    assert a.shape == b.shape and a.shape[1] == 2
    np.testing.assert_array_equal(a[:, 0], b[:, 0])


def test_benchmark_repetitions_and_summary(tmp_path):
    recs = run_benchmarks([4.0], [500.0], repetitions=3, t_sim=0.01)
    assert len(recs) == 3
    assert all(r.wall_minutes > 0 for r in recs)
    assert len({(r.cells, r.steps) for r in recs}) == 1
    summ = summarize_benchmarks(recs)
    assert len(summ) == 1
    assert summ[0].wall_minutes == pytest.approx(np.median([r.wall_minutes for r in recs]))
    write_benchmarks_csv(recs, tmp_path / "b.csv")
    rows = list(csv.DictReader(open(tmp_path / "b.csv")))
    assert list(rows[0]) == ["area_m2", "f_max_hz", "wall_minutes", "cells", "steps"]
    assert len(rows) == 3


def test_benchmark_area_clamp():
    recs = run_benchmarks([0.0], [343.0], repetitions=1, t_sim=0.005)
    assert recs[0].area_m2 == 1.0
    assert recs[0].cells == 100


def test_benchmark_cells_deterministic():
    a = run_benchmarks([2.0], [500.0], 1, t_sim=0.005)[0]
    b = run_benchmarks([2.0], [500.0], 1, t_sim=0.005)[0]
    assert (a.cells, a.steps) == (b.cells, b.steps)
    assert isinstance(a, BenchmarkRecord)
