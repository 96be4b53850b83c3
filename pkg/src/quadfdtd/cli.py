"""Command-line entry point: ``quadfdtd <subcommand> ...``.

Exit codes: 0 success, 1 invalid scene or input, 2 numerical instability,
3 I/O failure, 4 validation bounds exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("quadfdtd")

EXIT_SCENE, EXIT_UNSTABLE, EXIT_IO, EXIT_BOUNDS = 1, 2, 3, 4
VALIDATE_MAX_NRMSE = 5.0
VALIDATE_MAX_ARRIVAL_MS = 1.8


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _load_scene_with_overrides(args):
    from .scene import load_scene, scene_from_dict

    cfg = load_scene(args.scene)
    data = cfg.to_dict()
    if args.f_max is not None:
        data["f_max"] = args.f_max
    if args.duration is not None:
        data["sim_duration"] = args.duration
    if args.sweep_duration is not None:
        data["sweep"]["duration"] = args.sweep_duration
    if args.sweep_f1 is not None:
        data["sweep"]["f1"] = args.sweep_f1
    for flag, key in (("safety", "safety"), ("pml_cells", "n_pml"),
                      ("pml_reflection", "pml_reflection")):
        if getattr(args, flag) is not None:
            data["solver"][key] = getattr(args, flag)
    return scene_from_dict(data)


def cmd_simulate(args) -> int:
    from .pipeline import simulate_scene

    cfg = _load_scene_with_overrides(args)
    manifest = simulate_scene(cfg, args.out, snapshot_every=args.snapshot_every,
                              threads=args.threads)
    n = sum(len(v) for v in manifest["artifacts"]["traces"].values())
    prov = manifest["provenance"]
    print(f"wrote {n} traces, {len(manifest['artifacts']['frames'])} frames to {args.out} "
          f"(grid {prov['grid']['nx']}x{prov['grid']['ny']}, {prov['nt']} steps, "
          f"fs {prov['fs']:.1f} Hz, {manifest['runtime']['wall_seconds']:.1f} s)")
    return 0


def cmd_extract_ir(args) -> int:
    from .pipeline import extract_run_irs

    manifest = extract_run_irs(args.run_dir, args.fs_out, args.ir_length)
    for lid, paths in manifest["artifacts"].get("irs", {}).items():
        print(f"{lid}: {Path(args.run_dir) / paths['wav']}")
    return 0


def cmd_render_frames(args) -> int:
    from .pipeline import render_run_frames

    names = render_run_frames(args.run_dir, args.out, args.format, args.cmap)
    print(f"rendered {len(names)} frames to {args.out}")
    return 0


def cmd_validate(args) -> int:
    from .validation import run_validation_suite, validate_frequency, write_overlay_csv, \
        write_reports_csv

    reports = run_validation_suite(
        args.frequencies, separation=args.separation, n_pml=args.pml_cells,
        pml_reflection=args.pml_reflection, safety=args.safety, threads=args.threads,
    )
    write_reports_csv(reports, args.out)
    if args.overlay_dir:
        odir = Path(args.overlay_dir)
        odir.mkdir(parents=True, exist_ok=True)
        for f0 in args.frequencies:
            tr = validate_frequency(f0, separation=args.separation, n_pml=args.pml_cells)
            b = tr.bearings[0]
            write_overlay_csv(b, odir / f"fdtd_{f0:g}Hz.csv", odir / f"analytic_{f0:g}Hz.csv")
    failed = False
    for r in reports:
        ok = r.nrmse_pct <= VALIDATE_MAX_NRMSE and r.arrival_ms <= VALIDATE_MAX_ARRIVAL_MS
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} f0={r.f0_hz:g} Hz  NRMSE={r.nrmse_pct:.2f}%  "
              f"arrival={r.arrival_ms:.3f} ms  grid={r.nx}x{r.ny}")
    return EXIT_BOUNDS if failed else 0


def cmd_bench(args) -> int:
    from .validation import run_benchmarks, summarize_benchmarks, write_benchmarks_csv

    recs = run_benchmarks(args.areas, args.fmaxes, args.repetitions, t_sim=args.t_sim,
                          threads=args.threads)
    write_benchmarks_csv(recs, args.out)
    for r in summarize_benchmarks(recs):
        print(f"area={r.area_m2:g} m2 f_max={r.f_max_hz:g} Hz cells={r.cells} "
              f"steps={r.steps} median={r.wall_minutes * 60:.3f} s")
    return 0


def cmd_auralize(args) -> int:
    from scipy.io import wavfile

    from .ir_extraction import auralize, read_wav
    from .signals import Signal, resample

    ir = read_wav(args.ir)
    fs, dry = wavfile.read(args.dry)
    if dry.ndim > 1:
        dry = dry.mean(axis=1)
    if np.issubdtype(dry.dtype, np.integer):
        dry = dry / float(np.iinfo(dry.dtype).max)
    sig = Signal(dry.astype(np.float64), float(fs))
    if sig.fs != ir.fs:
        sig = resample(sig, ir.fs)
    out = auralize(sig, ir, args.yaw)
    if out.clipped:
        log.warning("output exceeds full scale; samples beyond +/-1 are not clipped in the file")
    data = np.stack([out.left.samples, out.right.samples], axis=1).astype(np.float32)
    wavfile.write(args.out, int(round(ir.fs)), data)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    from . import __version__

    p = argparse.ArgumentParser(prog="quadfdtd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"quadfdtd {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp, scene_defaults=True):
        note = " (default: scene file, else %(default)s)" if scene_defaults else ""
        sp.add_argument("--safety", type=float, default=None if scene_defaults else 0.99,
                        help="CFL safety factor in (0, 1]" + (note or " (default: %(default)s)"))
        sp.add_argument("--pml-cells", type=int, default=None if scene_defaults else 20,
                        help="absorbing layer thickness in cells" + (note or " (default: %(default)s)"))
        sp.add_argument("--pml-reflection", type=float, default=None if scene_defaults else 1e-4,
                        help="target PML reflection coefficient" + (note or " (default: %(default)s)"))
        sp.add_argument("--threads", type=int, default=None,
                        help="solver worker threads; results do not depend on it "
                             "(default: numba's thread count)")
        sp.add_argument("--seed", type=int, default=None, help="reserved; has no effect")

    sp = sub.add_parser("simulate", help="run a scene and record microphone traces")
    sp.add_argument("--scene", required=True, type=Path, help="scene JSON file")
    sp.add_argument("--out", required=True, type=Path, help="run directory to (re)create")
    sp.add_argument("--snapshot-every", type=int, default=None,
                    help="store a pressure frame every N time steps (default: none)")
    sp.add_argument("--f-max", type=float, default=None,
                    help="override the scene's highest resolved frequency, Hz")
    sp.add_argument("--duration", type=float, default=None,
                    help="override the simulated duration, s")
    sp.add_argument("--sweep-duration", type=float, default=None,
                    help="override the sweep length, s")
    sp.add_argument("--sweep-f1", type=float, default=None,
                    help="override the sweep end frequency, Hz")
    solver_flags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("extract-ir", help="deconvolve traces into 4-channel WAV IRs")
    sp.add_argument("run_dir", type=Path, help="run directory written by 'simulate'")
    sp.add_argument("--fs-out", type=float, default=44100.0,
                    help="output sample rate, Hz (default: %(default)s)")
    sp.add_argument("--ir-length", type=int, default=None,
                    help="IR length in simulation samples (default: twice the post-sweep tail)")
    sp.set_defaults(func=cmd_extract_ir)

    sp = sub.add_parser("render-frames", help="render stored pressure snapshots to images")
    sp.add_argument("run_dir", type=Path, help="run directory written by 'simulate'")
    sp.add_argument("--out", required=True, type=Path, help="image directory to (re)create")
    sp.add_argument("--format", default="png", choices=["png", "bmp", "tiff"],
                    help="image format (default: %(default)s)")
    sp.add_argument("--cmap", default="inferno", help="matplotlib colormap (default: %(default)s)")
    sp.set_defaults(func=cmd_render_frames)

    sp = sub.add_parser("validate", help="free-field Ricker tests against the Green's function")
    sp.add_argument("--frequencies", type=_floats, default=[250.0, 500.0, 1000.0, 3000.0],
                    help="Ricker centre frequencies, Hz, comma separated "
                         "(default: 250,500,1000,3000)")
    sp.add_argument("--separation", type=float, default=5.0,
                    help="source-receiver distance, m (default: %(default)s)")
    sp.add_argument("--out", required=True, type=Path, help="report CSV path")
    sp.add_argument("--overlay-dir", type=Path, default=None,
                    help="also write time/amplitude CSV pairs for an overlay plot")
    solver_flags(sp, scene_defaults=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("bench", help="time the FDTD loop against domain area and f_max")
    sp.add_argument("--areas", type=_floats, default=[25.0, 50.0, 100.0, 200.0],
                    help="domain areas, m^2, comma separated (default: 25,50,100,200)")
    sp.add_argument("--fmaxes", type=_floats, default=[250.0, 500.0, 1000.0, 2000.0],
                    help="highest frequencies, Hz, comma separated (default: 250,500,1000,2000)")
    sp.add_argument("--repetitions", type=int, default=3,
                    help="timed runs per configuration (default: %(default)s)")
    sp.add_argument("--t-sim", type=float, default=0.05,
                    help="simulated time per run, s (default: %(default)s)")
    sp.add_argument("--threads", type=int, default=1,
                    help="worker threads; keep at 1 for scaling studies (default: %(default)s)")
    sp.add_argument("--out", required=True, type=Path, help="benchmark CSV path")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("auralize", help="convolve a dry signal with a true-stereo IR")
    sp.add_argument("--ir", required=True, type=Path, help="4-channel IR WAV")
    sp.add_argument("--dry", required=True, type=Path, help="mono (or downmixed) dry WAV")
    sp.add_argument("--yaw", type=float, default=0.0,
                    help="source bearing relative to facing direction, radians, "
                         "positive to the right (default: %(default)s)")
    sp.add_argument("--out", required=True, type=Path, help="stereo output WAV")
    sp.set_defaults(func=cmd_auralize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    from .pipeline import PipelineError
    from .scene import SceneError
    from .solver import InstabilityError

    try:
        return args.func(args)
    except SceneError as exc:
        print(f"error: invalid scene: {exc}", file=sys.stderr)
        return EXIT_SCENE
    except InstabilityError as exc:
        print(f"error: simulation unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (PipelineError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENE
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
