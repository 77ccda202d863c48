"""Procedural obstacle-track generation.

A track is a flat spawn pad followed by obstacle modules laid end to end
along +x. Each module's dimensions come from a curriculum table and are
interpolated by a difficulty scalar in [0, 1]; Perlin noise roughens the
ground afterwards.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import BoxObstacle, ContractError, DomainError, HeightField, Scene

MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """A configuration is structurally invalid."""


class TerrainKind(str, enum.Enum):
    PLANE = "plane"
    STAIRS_UP = "stairs_up"
    DROP = "drop"
    JUMP = "jump"
    HURDLE = "hurdle"
    BEAM = "beam"
    POLE = "pole"
    NARROW_GATE = "narrow_gate"

    @classmethod
    def parse(cls, value) -> "TerrainKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"stairs": "stairs_up", "stairsup": "stairs_up", "gate": "narrow_gate",
                   "narrowgate": "narrow_gate"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown terrain kind {value!r}") from None


@dataclass(frozen=True)
class CurriculumParam:
    """One curriculum-scaled dimension. ``p_min``/``p_max`` are the values at
    difficulty 0 and 1 as tabulated, which need not be ordered."""

    name: str
    p_min: float
    p_max: float
    harder_direction: str = "up"


T = TerrainKind
CURRICULUM: Dict[TerrainKind, Tuple[CurriculumParam, ...]] = {
    T.STAIRS_UP: (CurriculumParam("step_height", 0.10, 0.30, "up"),
                  CurriculumParam("step_length", 0.30, 0.50, "down")),
    T.DROP: (CurriculumParam("drop_height", 0.10, 0.60, "up"),
             CurriculumParam("platform_length", 0.30, 0.50, "down")),
    T.JUMP: (CurriculumParam("wall_height", 0.05, 0.40, "up"),
             CurriculumParam("wall_depth", 0.10, 0.30, "up")),
    T.HURDLE: (CurriculumParam("hurdle_height", 0.05, 0.40, "up"),
               CurriculumParam("hurdle_depth", 0.05, 0.10, "up")),
    T.BEAM: (CurriculumParam("clearance_height", 1.33, 1.10, "down"),
             CurriculumParam("beam_depth", 0.20, 0.20, "up")),
    T.POLE: (CurriculumParam("pole_width", 0.50, 0.10, "down"),
             CurriculumParam("position_offset", 0.00, 0.00, "up")),
    T.NARROW_GATE: (CurriculumParam("gate_width", 0.80, 0.45, "down"),
                    CurriculumParam("position_offset", 0.00, 0.60, "up")),
    T.PLANE: (),
}
del T

SAMPLING_BAND = 0.1
STAIR_COUNT = 4
OBSTACLE_X = 2.0          # obstacle centre within its module
BEAM_THICKNESS = 0.15
WALL_HEIGHT = 2.0         # poles and gate walls
GATE_WALL_DEPTH = 0.20


def interp_param(p: CurriculumParam, c: float) -> float:
    if not 0.0 <= c <= 1.0:
        raise DomainError(f"difficulty {c} outside [0, 1]")
    if c == 1.0:
        return p.p_max
    return p.p_min + c * (p.p_max - p.p_min)


# -- Perlin noise ------------------------------------------------------------

_GRAD = np.array([(math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)) for k in range(8)])
_H1, _H2, _H3 = 0x9E3779B97F4A7C15, 0xC2B2AE3D27D4EB4F, 0x165667B19E3779F9


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def _lattice_gradient(ix: int, iy: int, seed: int):
    key = ((seed & MASK64) * _H1 ^ (ix & MASK64) * _H2 ^ (iy & MASK64) * _H3) & MASK64
    return _GRAD[_mix64(key) >> 61]


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def perlin2(x: float, y: float, seed: int) -> float:
    """Classic 2D gradient noise with unit lattice gradients; |value| <= sqrt(2)/2."""
    x0, y0 = math.floor(x), math.floor(y)
    fx, fy = x - x0, y - y0
    g00 = _lattice_gradient(x0, y0, seed)
    g10 = _lattice_gradient(x0 + 1, y0, seed)
    g01 = _lattice_gradient(x0, y0 + 1, seed)
    g11 = _lattice_gradient(x0 + 1, y0 + 1, seed)
    n00 = g00[0] * fx + g00[1] * fy
    n10 = g10[0] * (fx - 1.0) + g10[1] * fy
    n01 = g01[0] * fx + g01[1] * (fy - 1.0)
    n11 = g11[0] * (fx - 1.0) + g11[1] * (fy - 1.0)
    u, v = _fade(fx), _fade(fy)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    return float(nx0 + v * (nx1 - nx0))


def _mix64_np(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _lattice_gradient_np(ix, iy, seed):
    with np.errstate(over="ignore"):
        key = (np.uint64(seed & MASK64) * np.uint64(_H1)
               ^ ix.astype(np.int64).view(np.uint64) * np.uint64(_H2)
               ^ iy.astype(np.int64).view(np.uint64) * np.uint64(_H3))
        return _GRAD[(_mix64_np(key) >> np.uint64(61)).astype(np.intp)]


def perlin2_array(x, y, seed: int) -> np.ndarray:
    """Vectorised ``perlin2``; same arithmetic, so values match element-wise."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x, y = np.broadcast_arrays(x, y)
    x0, y0 = np.floor(x), np.floor(y)
    fx, fy = x - x0, y - y0
    ix, iy = x0.astype(np.int64), y0.astype(np.int64)
    g00 = _lattice_gradient_np(ix, iy, seed)
    g10 = _lattice_gradient_np(ix + 1, iy, seed)
    g01 = _lattice_gradient_np(ix, iy + 1, seed)
    g11 = _lattice_gradient_np(ix + 1, iy + 1, seed)
    n00 = g00[..., 0] * fx + g00[..., 1] * fy
    n10 = g10[..., 0] * (fx - 1.0) + g10[..., 1] * fy
    n01 = g01[..., 0] * fx + g01[..., 1] * (fy - 1.0)
    n11 = g11[..., 0] * (fx - 1.0) + g11[..., 1] * (fy - 1.0)
    u, v = _fade(fx), _fade(fy)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    return nx0 + v * (nx1 - nx0)


# -- modules -----------------------------------------------------------------

@dataclass
class ModulePatch:
    """One generated module in local coordinates (x from 0, ground level 0).

    ``profile`` holds ground heights at x = k * cell for k = 0..n; the ground
    is constant across the track width.
    """

    kind: TerrainKind
    difficulty: float
    params: Dict[str, float]
    profile: np.ndarray
    boxes: List[BoxObstacle]
    length: float


def _band_value(p: CurriculumParam, c: float, u: float) -> float:
    lo = max(0.0, c - SAMPLING_BAND)
    hi = min(1.0, c + SAMPLING_BAND)
    return interp_param(p, lo + u * (hi - lo))


def gen_module(kind, c: float, rng: np.random.Generator, *, quantiles: Optional[Sequence[float]] = None,
               length: float = 4.0, width: float = 4.0, cell: float = 0.05) -> ModulePatch:
    """Generate one module at difficulty ``c``.

    Each dimension is drawn uniformly from the curriculum values over the
    difficulty band ``[c - 0.1, c + 0.1]`` (clipped to [0, 1]). Passing
    ``quantiles`` fixes the position inside the band, which keeps dimensions
    monotone in ``c`` when several modules share them.
    """
    kind = TerrainKind.parse(kind)
    if not 0.0 <= c <= 1.0:
        raise DomainError(f"difficulty {c} outside [0, 1]")
    specs = CURRICULUM[kind]
    if quantiles is None:
        quantiles = rng.random(len(specs))
    params = {p.name: _band_value(p, c, float(u)) for p, u in zip(specs, quantiles)}
    side = -1.0 if rng.random() < 0.5 else 1.0

    n = int(round(length / cell))
    xs = np.arange(n + 1) * cell
    profile = np.zeros(n + 1)
    boxes: List[BoxObstacle] = []
    half_w = width / 2.0
    tag = kind.value

    if kind is TerrainKind.STAIRS_UP:
        h, l = params["step_height"], params["step_length"]
        steps = np.clip(np.floor((xs - 1.0) / l) + 1.0, 0.0, STAIR_COUNT)
        profile = h * steps
    elif kind is TerrainKind.DROP:
        edge = 1.0 + params["platform_length"]
        profile = np.where(xs >= edge, -params["drop_height"], 0.0)
    elif kind in (TerrainKind.JUMP, TerrainKind.HURDLE):
        pre = "wall" if kind is TerrainKind.JUMP else "hurdle"
        h, d = params[f"{pre}_height"], params[f"{pre}_depth"]
        boxes.append(BoxObstacle((OBSTACLE_X, 0.0, h / 2), (d / 2, half_w, h / 2), tag))
    elif kind is TerrainKind.BEAM:
        clear, d = params["clearance_height"], params["beam_depth"]
        boxes.append(BoxObstacle((OBSTACLE_X, 0.0, clear + BEAM_THICKNESS / 2),
                                 (d / 2, half_w, BEAM_THICKNESS / 2), tag))
    elif kind is TerrainKind.POLE:
        w, centre = params["pole_width"], side * params["position_offset"]
        boxes.append(BoxObstacle((OBSTACLE_X, centre, WALL_HEIGHT / 2), (w / 2, w / 2, WALL_HEIGHT / 2), tag))
        params = dict(params, pole_center=centre)
    elif kind is TerrainKind.NARROW_GATE:
        gap, centre = params["gate_width"], side * params["position_offset"]
        left_lo, right_hi = centre + gap / 2, centre - gap / 2
        for y0, y1 in ((left_lo, half_w), (-half_w, right_hi)):
            if y1 - y0 > 1e-9:
                boxes.append(BoxObstacle((OBSTACLE_X, (y0 + y1) / 2, WALL_HEIGHT / 2),
                                         (GATE_WALL_DEPTH / 2, (y1 - y0) / 2, WALL_HEIGHT / 2), tag))
        params = dict(params, gate_center=centre)

    return ModulePatch(kind, c, params, np.asarray(profile, dtype=np.float64), boxes, n * cell)


# -- tracks --------------------------------------------------------------------

@dataclass
class TrackSpec:
    modules: Sequence = (TerrainKind.PLANE,)
    difficulty: float = 0.0
    obstacles_per_episode: int = 5
    noise_amplitude: float = 0.03
    seed: int = 0
    shuffle: bool = True
    pad_length: float = 3.0
    module_length: float = 4.0
    width: float = 4.0
    cell: float = 0.05
    noise_scale: float = 1.0
    margin_back: float = 2.0
    margin_front: float = 4.0

    def __post_init__(self):
        self.modules = tuple(TerrainKind.parse(m) for m in self.modules)
        if not 0.0 <= self.difficulty <= 1.0:
            raise ConfigError(f"difficulty {self.difficulty} outside [0, 1]")
        if int(self.obstacles_per_episode) < 1:
            raise ConfigError("obstacles_per_episode must be >= 1")
        self.obstacles_per_episode = int(self.obstacles_per_episode)
        self.seed = int(self.seed)
        for name in ("pad_length", "module_length", "width", "cell", "noise_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.noise_amplitude < 0:
            raise ConfigError("noise_amplitude must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "TrackSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown track keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["modules"] = [m.value for m in self.modules]
        return d


@dataclass
class TrackLayout:
    heightfield: HeightField
    obstacles: Tuple[BoxObstacle, ...]
    segments: List[Tuple[float, float]]
    total_length: float
    kinds: List[TerrainKind] = field(default_factory=list)
    difficulties: List[float] = field(default_factory=list)
    params: List[Dict[str, float]] = field(default_factory=list)
    obstacle_module: List[int] = field(default_factory=list)
    width: float = 4.0

    def scene(self) -> Scene:
        return Scene(self.heightfield, self.obstacles)

    def segment_of(self, x: float) -> Optional[int]:
        for i, (a, b) in enumerate(self.segments):
            if a <= x < b:
                return i
        return None


def module_difficulties(c: float, n: int) -> List[float]:
    """Linear within-episode ramp from 0.6c up to c."""
    if n == 1:
        return [c]
    return [min(1.0, c * (0.6 + 0.4 * i / (n - 1))) for i in range(n)]


def assemble_track(spec: TrackSpec) -> TrackLayout:
    if not spec.modules:
        raise ConfigError("track spec has an empty module list")
    rng = np.random.default_rng(spec.seed)
    n = spec.obstacles_per_episode
    if spec.shuffle:
        picks = rng.integers(0, len(spec.modules), size=n)
        kinds = [spec.modules[int(i)] for i in picks]
    else:
        kinds = [spec.modules[i % len(spec.modules)] for i in range(n)]
    # one band quantile per (kind, parameter) keeps escalation monotone
    quantiles = {k: rng.random(len(CURRICULUM[k])) for k in TerrainKind}
    noise_seed = int(rng.integers(0, 2**63 - 1))

    cell = spec.cell
    n_back = int(round(spec.margin_back / cell))
    n_pad = int(round(spec.pad_length / cell))
    n_mod = int(round(spec.module_length / cell))
    n_front = int(round(spec.margin_front / cell))
    ny = int(round(spec.width / cell)) + 1
    profile = np.zeros(n_back + n_pad + n * n_mod + n_front + 1)

    pad = n_pad * cell
    boxes: List[BoxObstacle] = []
    owner: List[int] = []
    segments, params = [], []
    difficulties = module_difficulties(spec.difficulty, n)
    level = 0.0
    for i, (kind, c_i) in enumerate(zip(kinds, difficulties)):
        patch = gen_module(kind, c_i, rng, quantiles=quantiles[kind],
                           length=n_mod * cell, width=spec.width, cell=cell)
        g0 = n_back + n_pad + i * n_mod
        profile[g0:g0 + n_mod + 1] = level + patch.profile
        x0 = pad + i * n_mod * cell
        for b in patch.boxes:
            cx, cy, cz = b.center
            boxes.append(BoxObstacle((x0 + cx, cy, level + cz), b.half_extents, b.kind))
            owner.append(i)
        level += float(patch.profile[-1])
        segments.append((x0, pad + (i + 1) * n_mod * cell))
        params.append(patch.params)
    profile[n_back + n_pad + n * n_mod:] = level

    origin = (-n_back * cell, -(ny - 1) * cell / 2)
    heights = np.repeat(profile[:, None], ny, axis=1)
    if spec.noise_amplitude > 0:
        xs = origin[0] + np.arange(len(profile)) * cell
        ys = origin[1] + np.arange(ny) * cell
        gx, gy = np.meshgrid(xs / spec.noise_scale, ys / spec.noise_scale, indexing="ij")
        heights = heights + spec.noise_amplitude * perlin2_array(gx, gy, noise_seed)

    return TrackLayout(
        heightfield=HeightField(origin, cell, heights),
        obstacles=tuple(boxes),
        segments=segments,
        total_length=pad + n * n_mod * cell,
        kinds=kinds,
        difficulties=difficulties,
        params=params,
        obstacle_module=owner,
        width=spec.width,
    )


# -- export / import -----------------------------------------------------------

def export_layout(layout: TrackLayout, out_dir) -> None:
    """Write ``heightfield.csv``, ``obstacles.csv`` and a ``track.json`` sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    hf = layout.heightfield
    with open(out / "heightfield.csv", "w", newline="") as fh:
        for row in hf.heights.tolist():
            fh.write(",".join(repr(v) for v in row) + "\n")
    with open(out / "obstacles.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "cx", "cy", "cz", "hx", "hy", "hz"])
        for b in layout.obstacles:
            w.writerow([b.kind, *map(repr, b.center), *map(repr, b.half_extents)])
    meta = {
        "origin": list(hf.origin),
        "cell": hf.cell,
        "shape": list(hf.heights.shape),
        "total_length": layout.total_length,
        "width": layout.width,
        "segments": [list(s) for s in layout.segments],
        "kinds": [k.value for k in layout.kinds],
        "difficulties": layout.difficulties,
        "params": layout.params,
        "obstacle_module": layout.obstacle_module,
    }
    (out / "track.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_layout(track_dir) -> TrackLayout:
    d = Path(track_dir)
    meta = json.loads((d / "track.json").read_text())
    heights = np.loadtxt(d / "heightfield.csv", delimiter=",", ndmin=2)
    boxes = []
    with open(d / "obstacles.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            boxes.append(BoxObstacle(
                tuple(float(row[k]) for k in ("cx", "cy", "cz")),
                tuple(float(row[k]) for k in ("hx", "hy", "hz")),
                row["kind"]))
    if list(heights.shape) != meta["shape"]:
        raise ContractError(f"heightfield.csv shape {heights.shape} disagrees with track.json {meta['shape']}")
    return TrackLayout(
        heightfield=HeightField(tuple(meta["origin"]), meta["cell"], heights),
        obstacles=tuple(boxes),
        segments=[tuple(s) for s in meta["segments"]],
        total_length=meta["total_length"],
        kinds=[TerrainKind(k) for k in meta["kinds"]],
        difficulties=meta["difficulties"],
        params=meta["params"],
        obstacle_module=meta.get("obstacle_module", []),
        width=meta.get("width", 4.0),
    )
