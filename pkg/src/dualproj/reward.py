"""Reward terms, default weights and the weighted ledger.

Unweighted terms carry their own sign: bonuses are >= 0 and penalties are
<= 0. The weight table stores the reference signed weights, and a term's
weighted value is ``|w| * term``. Applying the signed weight to an already
negative penalty would turn penalties into bonuses.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Dict, Mapping

import numpy as np

from .geometry import ContractError

TERMS = (
    "lin_vel_tracking",
    "ang_vel_tracking",
    "orientation",
    "ang_vel_xy",
    "hip",
    "dof_vel",
    "dof_acc",
    "action_rate",
    "energy",
    "collision",
    "penetrate",
    "dof_limits",
    "alive",
    "air_time",
    "radius_adaptive",
    "radius_smoothness",
    "radius_regularization",
)

AUX_TERMS = TERMS[2:14]

RADIUS_SIGMA = 0.5
BOUNDARY_BAND = 0.25
SPEED_GAIN = 8.0 / 3.0
SOFT_LIMIT_FRACTION = 0.9
AIR_TIME_TARGET = 0.4


@dataclass(frozen=True)
class RewardWeights:
    lin_vel_tracking: float = 2.0
    ang_vel_tracking: float = 0.5
    orientation: float = -1.0
    ang_vel_xy: float = -0.3
    hip: float = -1.0
    dof_vel: float = -1e-3
    dof_acc: float = -2.5e-7
    action_rate: float = -0.01
    energy: float = -2.5e-7
    collision: float = -3.0
    penetrate: float = -1.0
    dof_limits: float = -5.0
    alive: float = 0.15
    air_time: float = 5.0
    radius_adaptive: float = 1.0
    radius_smoothness: float = -0.1
    radius_regularization: float = -0.1

    @classmethod
    def from_dict(cls, d: Mapping) -> "RewardWeights":
        extra = set(d) - set(TERMS)
        if extra:
            raise ContractError(f"unknown reward weight keys: {sorted(extra)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def scaled(self, k: float) -> "RewardWeights":
        return RewardWeights(**{t: getattr(self, t) * k for t in TERMS})


@dataclass
class RewardBreakdown:
    terms: Dict[str, float]
    weighted: Dict[str, float]
    total: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)


# -- task -----------------------------------------------------------------------

def tracking_reward(v, omega_z: float, cmd):
    v = np.asarray(v, dtype=float)
    cmd = np.asarray(cmd, dtype=float)
    e = v[:2] - cmd[:2]
    lin = math.exp(-float(e[0] * e[0] + e[1] * e[1]))
    ang = math.exp(-(float(omega_z) - float(cmd[2])) ** 2)
    return lin, ang


# -- adaptive perception --------------------------------------------------------

def desired_radius(v_fwd: float, d_obs: float) -> float:
    if not d_obs >= 0:
        raise ContractError("d_obs must be >= 0")
    return min(5.0, max(1.0, min(1.0 + SPEED_GAIN * v_fwd, d_obs)))


def radius_adaptive_reward(r: float, r_star: float, sigma: float = RADIUS_SIGMA) -> float:
    return math.exp(-((r - r_star) ** 2) / (sigma * sigma))


def radius_smoothness(r_t: float, r_prev: float) -> float:
    return -((r_t - r_prev) ** 2)


def radius_regularization(r: float, band: float = BOUNDARY_BAND) -> float:
    hi = max(0.0, r - (5.0 - band))
    lo = max(0.0, (1.0 + band) - r)
    return -(hi * hi + lo * lo) / (band * band)


# -- auxiliary ------------------------------------------------------------------

AUX_FIELDS = (
    "gravity",          # projected gravity, base frame
    "ang_vel",          # base angular velocity
    "hip_dev",          # hip roll/yaw offsets from neutral
    "dof_vel",
    "dof_acc",
    "action",
    "prev_action",
    "torque",
    "collisions",       # number of body/feet contacts with obstacles
    "penetration",      # interpenetration depth, m
    "dof_pos",
    "dof_lower",
    "dof_upper",
    "alive",
    "air_time",         # per-foot air time at touchdown
    "first_contact",    # per-foot touchdown flags
)


def rest_state(n_joints: int = 12, n_feet: int = 2) -> dict:
    """Level, stationary, contact-free state: every penalty is zero."""
    z = np.zeros(n_joints)
    return {
        "gravity": np.array([0.0, 0.0, -1.0]),
        "ang_vel": np.zeros(3),
        "hip_dev": np.zeros(4),
        "dof_vel": z.copy(),
        "dof_acc": z.copy(),
        "action": np.zeros(n_joints + 1),
        "prev_action": np.zeros(n_joints + 1),
        "torque": z.copy(),
        "collisions": 0,
        "penetration": 0.0,
        "dof_pos": z.copy(),
        "dof_lower": np.full(n_joints, -1.0),
        "dof_upper": np.full(n_joints, 1.0),
        "alive": True,
        "air_time": np.zeros(n_feet),
        "first_contact": np.zeros(n_feet, dtype=bool),
    }


def _sq(x) -> float:
    a = np.asarray(x, dtype=float)
    return float(np.dot(a.ravel(), a.ravel()))


def auxiliary_rewards(state: Mapping) -> Dict[str, float]:
    missing = [f for f in AUX_FIELDS if f not in state]
    if missing:
        raise ContractError(f"auxiliary reward state is missing {missing}")
    g = np.asarray(state["gravity"], dtype=float)
    w = np.asarray(state["ang_vel"], dtype=float)
    q = np.asarray(state["dof_pos"], dtype=float)
    lo = np.asarray(state["dof_lower"], dtype=float)
    hi = np.asarray(state["dof_upper"], dtype=float)
    # soft limits: the central fraction of each joint's range
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * SOFT_LIMIT_FRACTION
    excess = np.maximum(0.0, (mid - half) - q) + np.maximum(0.0, q - (mid + half))
    first = np.asarray(state["first_contact"], dtype=bool)
    air = np.asarray(state["air_time"], dtype=float)
    da = np.asarray(state["action"], dtype=float) - np.asarray(state["prev_action"], dtype=float)
    return {
        "orientation": -float(g[0] * g[0] + g[1] * g[1]),
        "ang_vel_xy": -float(w[0] * w[0] + w[1] * w[1]),
        "hip": -_sq(state["hip_dev"]),
        "dof_vel": -_sq(state["dof_vel"]),
        "dof_acc": -_sq(state["dof_acc"]),
        "action_rate": -_sq(da),
        "energy": -_sq(state["torque"]),
        "collision": -float(state["collisions"]),
        "penetrate": -float(state["penetration"]),
        "dof_limits": -float(excess.sum()),
        "alive": 1.0 if state["alive"] else 0.0,
        "air_time": float(((air - AIR_TIME_TARGET) * first).sum()),
    }


# -- ledger ---------------------------------------------------------------------

def total_reward(terms: Mapping[str, float], w: RewardWeights = RewardWeights()) -> RewardBreakdown:
    """Weighted sum accumulated in ``TERMS`` order; absent terms count as zero."""
    unknown = set(terms) - set(TERMS)
    if unknown:
        raise ContractError(f"unknown reward terms: {sorted(unknown)}")
    vals, weighted = {}, {}
    total = 0.0
    for name in TERMS:
        v = float(terms.get(name, 0.0))
        vals[name] = v
        weighted[name] = abs(getattr(w, name)) * v
        total += weighted[name]
    return RewardBreakdown(vals, weighted, total)


def step_terms(v, omega_z, cmd, r, r_prev, r_star, aux_state: Mapping) -> Dict[str, float]:
    lin, ang = tracking_reward(v, omega_z, cmd)
    out = {"lin_vel_tracking": lin, "ang_vel_tracking": ang}
    out.update(auxiliary_rewards(aux_state))
    out["radius_adaptive"] = radius_adaptive_reward(r, r_star)
    out["radius_smoothness"] = radius_smoothness(r, r_prev)
    out["radius_regularization"] = radius_regularization(r)
    return out
