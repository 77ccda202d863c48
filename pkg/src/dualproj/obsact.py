"""Observation assembly and composite-action decomposition."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .geometry import ContractError
from .projection import D_SHAPE, E_SHAPE, R_MAX, R_MIN, DistanceMap, ElevationMap

N_JOINTS = 12
ACTION_DIM = N_JOINTS + 1
RADIUS_CHANNEL = N_JOINTS

LAYOUT_SPEC: Tuple[Tuple[str, int], ...] = (
    ("cmd", 3),
    ("v", 3),
    ("omega", 3),
    ("g", 3),
    ("q", N_JOINTS),
    ("dq", N_JOINTS),
    ("a_prev", ACTION_DIM),
    ("E", E_SHAPE[0] * E_SHAPE[1]),
    ("D", D_SHAPE[0] * D_SHAPE[1]),
    ("r_prev", 1),
)


def _build_layout():
    out, off = {}, 0
    for name, n in LAYOUT_SPEC:
        out[name] = (off, n)
        off += n
    return out, off


LAYOUT, OBS_DIM = _build_layout()


@dataclass(frozen=True)
class ObsScales:
    cmd: Tuple[float, float, float] = (0.5, 0.5, 0.25)
    v: float = 0.5
    omega: float = 0.25
    g: float = 1.0
    q: float = 1.0
    dq: float = 0.05
    a_prev: float = 1.0
    E: float = 1.0
    r_prev: float = 1.0 / 5.0
    # the distance block is always divided by its own map radius

    @classmethod
    def from_dict(cls, d: dict) -> "ObsScales":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ContractError(f"unknown observation scale keys: {sorted(extra)}")
        d = dict(d)
        if "cmd" in d:
            d["cmd"] = tuple(float(x) for x in d["cmd"])
        return cls(**d)


@dataclass
class ProprioState:
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    g: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    q: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))
    dq: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))

    def __post_init__(self):
        for name, n in (("v", 3), ("omega", 3), ("g", 3), ("q", N_JOINTS), ("dq", N_JOINTS)):
            arr = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if arr.shape != (n,):
                raise ContractError(f"ProprioState.{name} must have length {n}, got {arr.size}")
            setattr(self, name, arr)
        if abs(float(np.linalg.norm(self.g)) - 1.0) > 1e-6:
            raise ContractError("ProprioState.g must be a unit vector")


@dataclass
class ObservationVector:
    values: np.ndarray
    layout: Dict[str, Tuple[int, int]] = field(default_factory=lambda: dict(LAYOUT))

    def component(self, name: str) -> np.ndarray:
        if name not in self.layout:
            raise ContractError(f"observation layout has no component {name!r}")
        off, n = self.layout[name]
        return self.values[off:off + n]

    def layout_json(self) -> str:
        return json.dumps({k: {"offset": o, "length": n} for k, (o, n) in self.layout.items()})

    def csv_row(self) -> str:
        return ",".join(repr(float(x)) for x in self.values)


def _vec(name, x, n):
    a = np.asarray(x, dtype=np.float64).reshape(-1)
    if a.size != n:
        raise ContractError(f"component {name!r} must have {n} elements, got {a.size}")
    return a


def assemble(cmd, s: ProprioState, prev_action, E: ElevationMap, D: DistanceMap, prev_r: float,
             scales: ObsScales = ObsScales()) -> ObservationVector:
    """Scale, flatten and concatenate the observation in the fixed component order."""
    e = np.asarray(E.cells)
    d = np.asarray(D.cells)
    if e.shape != E_SHAPE:
        raise ContractError(f"component 'E' must be {E_SHAPE}, got {e.shape}")
    if d.shape != D_SHAPE:
        raise ContractError(f"component 'D' must be {D_SHAPE}, got {d.shape}")
    parts = (
        _vec("cmd", cmd, 3) * np.asarray(scales.cmd),
        _vec("v", s.v, 3) * scales.v,
        _vec("omega", s.omega, 3) * scales.omega,
        _vec("g", s.g, 3) * scales.g,
        _vec("q", s.q, N_JOINTS) * scales.q,
        _vec("dq", s.dq, N_JOINTS) * scales.dq,
        _vec("a_prev", prev_action, ACTION_DIM) * scales.a_prev,
        e.reshape(-1) * scales.E,
        d.reshape(-1) / D.radius,  # division keeps the sentinel at exactly 1.0
        np.array([float(prev_r) * scales.r_prev]),
    )
    return ObservationVector(np.concatenate(parts))


@dataclass(frozen=True)
class CompositeAction:
    mu: np.ndarray
    q_target: np.ndarray
    r: float


def radius_from_raw(x: float) -> float:
    return min(R_MAX, max(R_MIN, 3.0 + 2.0 * math.tanh(x)))


def raw_from_radius(r: float) -> float:
    """Inverse of ``radius_from_raw`` kept finite at the bounds."""
    y = (float(r) - 3.0) / 2.0
    lim = 1.0 - 1e-12
    return math.atanh(min(lim, max(-lim, y)))


def decompose_action(mu, q_default, s_a: float = 0.25) -> CompositeAction:
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    if mu.size != ACTION_DIM:
        raise ContractError(f"action must have {ACTION_DIM} entries, got {mu.size}")
    if not np.isfinite(mu).all():
        raise ContractError("action contains non-finite entries")
    q_default = _vec("q_default", q_default, N_JOINTS)
    q_target = s_a * mu[:N_JOINTS] + q_default
    return CompositeAction(mu.copy(), q_target, radius_from_raw(float(mu[RADIUS_CHANNEL])))

