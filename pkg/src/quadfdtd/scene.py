"""Scene description, grid derivation, obstacle rasterization and probe placement.

A scene is a JSON document::

    {
      "domain": [32.0, 22.0],                 # Lx, Ly in meters
      "medium": {"rho0": 1.2, "c": 343.0},    # kg/m^3, m/s (optional)
      "f_max": 3000.0,                        # Hz, highest resolved frequency
      "sim_duration": 5.0,                    # s
      "sweep": {"f0": 20.0, "f1": 3000.0, "duration": 2.5},
      "source": [16.0, 11.0],                 # m
      "obstacles": [[x_min, y_min, x_max, y_max], ...],
      "listeners": [
        {"id": "L1", "position": [8.0, 6.0], "orientation": 0.0,
         "mic_spacing": 0.25}
      ],
      "solver": {"n_pml": 20, "pml_reflection": 1e-4, "safety": 0.99}
    }

Listener orientation is in radians, measured counter-clockwise from the +y
axis (orientation 0 faces +y, so "left" is -x).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .signals import SweepSpec

MIC_LABELS = ("FL", "FR", "RL", "RR")


class SceneError(ValueError):
    """Raised for malformed or inconsistent scene descriptions."""


@dataclass(frozen=True)
class MediumParams:
    rho0: float = 1.2
    c: float = 343.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise SceneError(f"medium density must be positive, got {self.rho0}")
        if not self.c > 0:
            raise SceneError(f"speed of sound must be positive, got {self.c}")


@dataclass(frozen=True)
class ListenerSpec:
    id: str
    position: tuple[float, float]
    orientation: float = 0.0
    mic_spacing: float = 0.25

    def __post_init__(self):
        if not self.mic_spacing > 0:
            raise SceneError(f"listener {self.id}: mic_spacing must be positive")

    def mic_positions(self) -> dict[str, tuple[float, float]]:
        """Physical (x, y) of the four cluster microphones keyed by label."""
        h = 0.5 * self.mic_spacing
        th = self.orientation
        fwd = np.array([-math.sin(th), math.cos(th)])
        right = np.array([math.cos(th), math.sin(th)])
        center = np.asarray(self.position, dtype=float)
        offsets = {
            "FL": fwd - right,
            "FR": fwd + right,
            "RL": -fwd - right,
            "RR": -fwd + right,
        }
        return {k: tuple(center + h * v) for k, v in offsets.items()}


@dataclass(frozen=True)
class SolverSettings:
    n_pml: int = 20
    pml_reflection: float = 1e-4
    safety: float = 0.99


@dataclass(frozen=True)
class SceneConfig:
    domain_size: tuple[float, float]
    source: tuple[float, float]
    f_max: float
    sweep: SweepSpec
    sim_duration: float
    obstacles: tuple[tuple[float, float, float, float], ...] = ()
    listeners: tuple[ListenerSpec, ...] = ()
    medium: MediumParams = field(default_factory=MediumParams)
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        validate_scene(self)

    def to_dict(self) -> dict[str, Any]:
        return {
            "domain": list(self.domain_size),
            "medium": {"rho0": self.medium.rho0, "c": self.medium.c},
            "f_max": self.f_max,
            "sim_duration": self.sim_duration,
            "sweep": {
                "f0": self.sweep.f0,
                "f1": self.sweep.f1,
                "duration": self.sweep.duration,
                "fade": self.sweep.fade,
            },
            "source": list(self.source),
            "obstacles": [list(o) for o in self.obstacles],
            "listeners": [
                {
                    "id": l.id,
                    "position": list(l.position),
                    "orientation": l.orientation,
                    "mic_spacing": l.mic_spacing,
                }
                for l in self.listeners
            ],
            "solver": {
                "n_pml": self.solver.n_pml,
                "pml_reflection": self.solver.pml_reflection,
                "safety": self.solver.safety,
            },
        }


def _inside_rect(x, y, rect) -> bool:
    x0, y0, x1, y1 = rect
    return x0 <= x <= x1 and y0 <= y <= y1


def validate_scene(cfg: SceneConfig) -> None:
    lx, ly = cfg.domain_size
    if not (lx > 0 and ly > 0):
        raise SceneError(f"domain size must be positive, got {cfg.domain_size}")
    if not cfg.f_max > 0:
        raise SceneError("f_max must be positive")
    if cfg.f_max < cfg.sweep.f1:
        raise SceneError(
            f"f_max ({cfg.f_max} Hz) is below the sweep end frequency ({cfg.sweep.f1} Hz)"
        )
    if not cfg.sim_duration > 0:
        raise SceneError("sim_duration must be positive")
    for k, (x0, y0, x1, y1) in enumerate(cfg.obstacles, start=1):
        if not (x0 < x1 and y0 < y1):
            raise SceneError(f"obstacle {k} is degenerate: {(x0, y0, x1, y1)}")
        if x0 < 0 or y0 < 0 or x1 > lx or y1 > ly:
            raise SceneError(f"obstacle {k} outside domain")

    def check_point(name, pt):
        x, y = pt
        if not (0 < x < lx and 0 < y < ly):
            raise SceneError(f"{name} at {pt} is outside the domain")
        for k, rect in enumerate(cfg.obstacles, start=1):
            if _inside_rect(x, y, rect):
                raise SceneError(f"{name} inside obstacle {k}")

    check_point("source", cfg.source)
    seen = set()
    for lst in cfg.listeners:
        if lst.id in seen:
            raise SceneError(f"duplicate listener id {lst.id!r}")
        seen.add(lst.id)
        check_point(f"listener {lst.id}", lst.position)
        for label, pos in lst.mic_positions().items():
            check_point(f"listener {lst.id} mic {label}", pos)


def _pair(value, name) -> tuple[float, float]:
    try:
        a, b = value
        return float(a), float(b)
    except (TypeError, ValueError):
        raise SceneError(f"{name} must be a pair of numbers, got {value!r}") from None


def scene_from_dict(data: dict[str, Any]) -> SceneConfig:
    if not isinstance(data, dict):
        raise SceneError("scene must be a JSON object")
    try:
        medium = MediumParams(**data.get("medium", {}))
        sw = data["sweep"]
        sweep = SweepSpec(
            f0=float(sw["f0"]),
            f1=float(sw["f1"]),
            duration=float(sw["duration"]),
            fade=float(sw.get("fade", 0.01)),
        )
        listeners = []
        for k, item in enumerate(data.get("listeners", []), start=1):
            listeners.append(
                ListenerSpec(
                    id=str(item.get("id", f"L{k}")),
                    position=_pair(item["position"], f"listener {k} position"),
                    orientation=float(item.get("orientation", 0.0)),
                    mic_spacing=float(item.get("mic_spacing", 0.25)),
                )
            )
        obstacles = []
        for k, rect in enumerate(data.get("obstacles", []), start=1):
            if len(rect) != 4:
                raise SceneError(f"obstacle {k} must have 4 coordinates")
            obstacles.append(tuple(float(v) for v in rect))
        return SceneConfig(
            domain_size=_pair(data["domain"], "domain"),
            source=_pair(data["source"], "source"),
            f_max=float(data["f_max"]),
            sweep=sweep,
            sim_duration=float(data["sim_duration"]),
            obstacles=tuple(obstacles),
            listeners=tuple(listeners),
            medium=medium,
            solver=SolverSettings(**data.get("solver", {})),
        )
    except KeyError as exc:
        raise SceneError(f"missing required field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SceneError):
            raise
        raise SceneError(str(exc)) from None


def parse_scene(text: str) -> SceneConfig:
    """Parse and validate a JSON scene document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"syntax error: {exc}") from None
    return scene_from_dict(data)


def load_scene(path) -> SceneConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scene(fh.read())


@dataclass(frozen=True)
class GridSpec:
    ds: float
    nx: int
    ny: int
    lambda_min: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cells(self) -> int:
        return self.nx * self.ny

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.arange(self.nx) + 0.5) * self.ds, (np.arange(self.ny) + 0.5) * self.ds

    def index_of(self, x: float, y: float) -> tuple[int, int]:
        """Index of the cell whose center is nearest to (x, y)."""
        i = min(max(int(math.floor(x / self.ds)), 0), self.nx - 1)
        j = min(max(int(math.floor(y / self.ds)), 0), self.ny - 1)
        return i, j


def grid_for(domain_size, c: float, f_max: float) -> GridSpec:
    lambda_min = c / f_max
    ds = lambda_min / 10.0
    lx, ly = domain_size
    # guard against ceil(31.99999999) style round-off
    nx = max(1, math.ceil(lx / ds - 1e-9))
    ny = max(1, math.ceil(ly / ds - 1e-9))
    return GridSpec(ds=ds, nx=nx, ny=ny, lambda_min=lambda_min)


def build_grid(cfg: SceneConfig) -> GridSpec:
    """Ten cells per shortest wavelength over the scene domain."""
    return grid_for(cfg.domain_size, cfg.medium.c, cfg.f_max)


def rasterize_obstacles(cfg: SceneConfig, grid: GridSpec, n_pml: int = 0) -> np.ndarray:
    """Binary mask of shape (nx, ny): 0 where a cell center lies in an obstacle.

    Cells inside the outer ``n_pml`` band are always free.
    """
    xc, yc = grid.cell_centers()
    mask = np.ones(grid.shape, dtype=np.uint8)
    for x0, y0, x1, y1 in cfg.obstacles:
        ix = (xc >= x0) & (xc <= x1)
        iy = (yc >= y0) & (yc <= y1)
        mask[np.ix_(ix, iy)] = 0
    if n_pml > 0:
        mask[:n_pml, :] = 1
        mask[-n_pml:, :] = 1
        mask[:, :n_pml] = 1
        mask[:, -n_pml:] = 1
    return mask


def write_pgm(mask: np.ndarray, path) -> None:
    """Binary PGM (P5); one pixel per cell, row 0 at the top is y = ny-1."""
    img = np.where(mask.T[::-1] > 0, 255, 0).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = int(parts[1]), int(parts[2])
    img = np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)
    return (img[::-1].T > 0).astype(np.uint8)


@dataclass(frozen=True)
class ProbeLayout:
    source_index: tuple[int, int]
    source_width_cells: int
    mic_indices: dict[str, dict[str, tuple[int, int]]]

    def flat_mics(self) -> list[tuple[str, str, tuple[int, int]]]:
        return [
            (lid, label, idx)
            for lid, mics in self.mic_indices.items()
            for label, idx in mics.items()
        ]


class ProbePlacementError(SceneError):
    pass


def source_width(lambda_min: float, ds: float) -> int:
    return max(2, int(round(lambda_min / (2.0 * ds))))


def place_probes(
    cfg: SceneConfig, grid: GridSpec, mask: np.ndarray, n_pml: int = 0
) -> ProbeLayout:
    """Snap source and quad-cluster microphones to grid cells.

    Raises ProbePlacementError when a probe lands on an obstacle cell or a
    microphone falls inside the absorbing layer.
    """
    src = grid.index_of(*cfg.source)
    if mask[src] == 0:
        raise ProbePlacementError(f"source snaps to obstacle cell {src}")
    mics: dict[str, dict[str, tuple[int, int]]] = {}
    for lst in cfg.listeners:
        cluster = {}
        for label in MIC_LABELS:
            pos = lst.mic_positions()[label]
            idx = grid.index_of(*pos)
            if mask[idx] == 0:
                raise ProbePlacementError(
                    f"listener {lst.id} mic {label} snaps to obstacle cell {idx}"
                )
            i, j = idx
            if n_pml and not (
                n_pml <= i < grid.nx - n_pml and n_pml <= j < grid.ny - n_pml
            ):
                raise ProbePlacementError(
                    f"listener {lst.id} mic {label} lies inside the PML"
                )
            cluster[label] = idx
        mics[lst.id] = cluster
    return ProbeLayout(
        source_index=src,
        source_width_cells=source_width(grid.lambda_min, grid.ds),
        mic_indices=mics,
    )
